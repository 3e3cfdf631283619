"""Pure-numpy hot kernel for Doppler-averaged susceptibility.

Same contract as the compiled extension in _chi_fast; the backend module
picks whichever is available. Kept free of package imports so it can be
benchmarked standalone.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"

_CHUNK = 256


def averaged_chi(dp, dc_array, v_array, tw_array, inv_lp, kappa, g21, g31, om24):
    """Velocity-quadrature sum of the ladder kernel ratio, per coupling detuning.

    For each dc in dc_array computes

        sum_j  D2_j / (D1_j * D2_j + om24) * tw_j

    with D1_j = g21 - i*(dp + inv_lp*v_j) and
    D2_j = g31 - i*(dp + dc + kappa*v_j).
    tw_array carries the thermal weight times the trapezoid step factors, so
    the return value is the quadrature estimate of the velocity integral of
    chi/(i*A); the caller applies the i*A prefactor.

    Parameters
    ----------
    dp : float
        Probe detuning in MHz.
    dc_array, v_array, tw_array : ndarray of float
        Coupling detunings (MHz), velocity nodes (m/s), folded quadrature
        weights.
    inv_lp, kappa : float
        One-photon and two-photon Doppler slopes in MHz per m/s.
    g21, g31 : float
        Coherence half-widths in MHz.
    om24 : float
        omega_c^2 / 4 in MHz^2; zero selects the coupling-off two-level form.

    Returns
    -------
    ndarray of complex, same length as dc_array.
    """
    dc_array = np.asarray(dc_array, dtype=float)
    v_array = np.asarray(v_array, dtype=float)
    tw_array = np.asarray(tw_array, dtype=float)

    d1 = g21 - 1j * (dp + inv_lp * v_array)
    if om24 == 0.0:
        return np.full(len(dc_array), np.sum(tw_array / d1), dtype=complex)

    out = np.empty(len(dc_array), dtype=complex)
    for start in range(0, len(dc_array), _CHUNK):
        dc = dc_array[start : start + _CHUNK]
        d2 = g31 - 1j * ((dp + dc[:, None]) + kappa * v_array[None, :])
        ratio = d2 / (d1[None, :] * d2 + om24)
        out[start : start + _CHUNK] = ratio @ tw_array
    return out

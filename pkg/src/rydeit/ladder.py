"""Three-level ladder optical response.

The velocity-resolved susceptibility kernel of the weak-probe ladder model,
an exact steady-state optical Bloch oracle for validating it, and the
Beer-Lambert conversion from integrated absorption to transmission.

Unit conventions, applied everywhere in this package:

* detunings, Rabi frequencies and decay rates are ordinary frequencies in MHz
  (never angular);
* gamma_21 and gamma_31 are half-widths of the respective coherences, so the
  coupling-off probe line has FWHM 2*gamma_21;
* Doppler shifts enter as v/lambda with v in m/s and lambda in micrometers,
  which is numerically MHz; :func:`velocity_to_frequency_shift` is the single
  point where that conversion happens.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateModelError, ValidationError

CO_PROPAGATING = "co_propagating"
COUNTER_PROPAGATING = "counter_propagating"
GEOMETRIES = (CO_PROPAGATING, COUNTER_PROPAGATING)

NEGATIVE_ABSORPTION_TOL = 1e-12


def velocity_to_frequency_shift(v_m_per_s, wavelength_nm):
    """Doppler shift v/lambda in MHz for v in m/s and wavelength in nm.

    This is the only velocity-to-frequency conversion in the package;
    (m/s) / (micrometers) is exactly MHz.
    """
    return v_m_per_s / (wavelength_nm * 1e-3)


@dataclass(frozen=True)
class ComplexSusceptibility:
    """Susceptibility value in normalized units; absorption is the imag part."""

    real_part: float
    imag_part: float

    @classmethod
    def from_complex(cls, z: complex) -> "ComplexSusceptibility":
        return cls(real_part=float(np.real(z)), imag_part=float(np.imag(z)))

    @property
    def value(self) -> complex:
        return complex(self.real_part, self.imag_part)


@dataclass(frozen=True)
class LadderSystem:
    """Parameters of the ladder model: fields, rates, wavelengths, geometry.

    amplitude_scale times g_21 squared forms the single real prefactor of the
    susceptibility; spectra are reported in normalized units, so dimensional
    field-strength constants never appear separately.
    """

    lambda_p_nm: float = 852.0
    lambda_c_nm: float = 509.0
    omega_p_rabi: float = 0.026
    omega_c_rabi: float = 10.0
    gamma_21: float = 2.6
    gamma_31: float = 0.1
    g_21: float = 1.0
    amplitude_scale: float = 6.0e-4
    geometry: str = COUNTER_PROPAGATING

    def __post_init__(self):
        if self.lambda_p_nm <= 0 or self.lambda_c_nm <= 0:
            raise ValidationError("wavelengths must be positive")
        for name in ("omega_p_rabi", "omega_c_rabi", "gamma_21", "gamma_31"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if self.amplitude_scale <= 0:
            raise ValidationError("amplitude_scale must be positive")
        if self.geometry not in GEOMETRIES:
            raise ValidationError(
                f"geometry must be one of {GEOMETRIES}, got {self.geometry!r}"
            )

    @property
    def amplitude(self) -> float:
        """Real prefactor of the susceptibility kernel."""
        return self.g_21**2 * self.amplitude_scale

    @property
    def two_photon_sign(self) -> int:
        """Sign of the coupling term in the two-photon Doppler shift."""
        return 1 if self.geometry == CO_PROPAGATING else -1

    @property
    def inv_lambda_p(self) -> float:
        """1/lambda_p in inverse micrometers (MHz per m/s)."""
        return 1.0 / (self.lambda_p_nm * 1e-3)

    @property
    def inv_lambda_c(self) -> float:
        """1/lambda_c in inverse micrometers (MHz per m/s)."""
        return 1.0 / (self.lambda_c_nm * 1e-3)

    @property
    def two_photon_inv_wavelength(self) -> float:
        """1/lambda_p + sign * 1/lambda_c, the residual Doppler slope in MHz per m/s."""
        return self.inv_lambda_p + self.two_photon_sign * self.inv_lambda_c

    @property
    def doppler_mismatch_slope(self) -> float:
        """1 - lambda_p/lambda_c: hyperfine-interval compression on the scan axis."""
        return 1.0 - self.lambda_p_nm / self.lambda_c_nm


def susceptibility_kernel(v, delta_p, delta_c, sys: LadderSystem):
    """Velocity-resolved ladder susceptibility, complex, in normalized units.

    Evaluates i*A / [D1 + (omega_c^2/4)/D2] with
    D1 = gamma_21 - i*(delta_p + v/lambda_p) and
    D2 = gamma_31 - i*(delta_p + delta_c + (1/lambda_p +/- 1/lambda_c)*v),
    the sign set by the propagation geometry. Computed in the product form
    i*A*D2/(D1*D2 + omega_c^2/4), which stays regular wherever the model is
    defined. Broadcasts over array arguments. The thermal velocity weight is
    not included here; the doppler module applies it.

    Parameters
    ----------
    v : float or ndarray
        Atomic velocity in m/s, positive along probe propagation of the
        integrand's frame.
    delta_p, delta_c : float or ndarray
        Probe and coupling detunings in MHz.
    sys : LadderSystem
        Model parameters.

    Returns
    -------
    complex or ndarray of complex
    """
    v = np.asarray(v, dtype=float)
    delta_p = np.asarray(delta_p, dtype=float)
    delta_c = np.asarray(delta_c, dtype=float)
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(delta_p)) and np.all(np.isfinite(delta_c))):
        raise ValidationError("susceptibility_kernel requires finite inputs")
    if sys.gamma_21 <= 0:
        raise ValidationError("susceptibility_kernel requires gamma_21 > 0")

    amp = sys.amplitude
    d1 = sys.gamma_21 - 1j * (delta_p + sys.inv_lambda_p * v)
    if sys.omega_c_rabi == 0.0:
        out = np.asarray(1j * amp / np.broadcast_arrays(d1, np.zeros_like(delta_c))[0])
        return out[()] if out.ndim == 0 else out
    d2 = sys.gamma_31 - 1j * (delta_p + delta_c + sys.two_photon_inv_wavelength * v)
    out = np.asarray(1j * amp * d2 / (d1 * d2 + sys.omega_c_rabi**2 / 4.0))
    return out[()] if out.ndim == 0 else out


def _liouvillian(probe_eff, coupling_eff, sys: LadderSystem) -> np.ndarray:
    """9x9 superoperator of the ladder system in the rotating frame."""
    h = np.zeros((3, 3), dtype=complex)
    h[1, 1] = probe_eff
    h[2, 2] = probe_eff + coupling_eff
    h[0, 1] = h[1, 0] = sys.omega_p_rabi / 2.0
    h[1, 2] = h[2, 1] = sys.omega_c_rabi / 2.0

    decay_21 = np.zeros((3, 3))
    decay_21[0, 1] = np.sqrt(2.0 * sys.gamma_21)
    decay_31 = np.zeros((3, 3))
    decay_31[1, 2] = np.sqrt(2.0 * sys.gamma_31)

    eye = np.eye(3)
    lv = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for jump in (decay_21, decay_31):
        jtj = jump.conj().T @ jump
        lv += np.kron(jump, jump.conj())
        lv -= 0.5 * (np.kron(jtj, eye) + np.kron(eye, jtj.T))
    return lv


def obe_steady_state_oracle(v, delta_p, delta_c, sys: LadderSystem) -> complex:
    """Exact steady-state susceptibility from the full density matrix.

    Solves the ladder Liouvillian with the trace constraint replacing one
    redundant row and converts the ground-intermediate coherence to the same
    normalized susceptibility units as :func:`susceptibility_kernel`
    (chi = 2*A/omega_p * rho_ge). No weak-probe approximation; used as a
    validation oracle for the perturbative kernel.
    """
    if sys.omega_p_rabi <= 0:
        raise ValidationError("oracle requires omega_p_rabi > 0")
    if sys.gamma_21 == 0 and sys.gamma_31 == 0:
        raise DegenerateModelError("steady state undefined with all decay rates zero")

    probe_eff = delta_p + velocity_to_frequency_shift(v, sys.lambda_p_nm)
    coupling_eff = delta_c + sys.two_photon_sign * velocity_to_frequency_shift(
        v, sys.lambda_c_nm
    )
    mat = _liouvillian(probe_eff, coupling_eff, sys)
    mat[0, :] = 0.0
    mat[0, 0] = mat[0, 4] = mat[0, 8] = 1.0
    rhs = np.zeros(9, dtype=complex)
    rhs[0] = 1.0
    try:
        rho = np.linalg.solve(mat, rhs).reshape(3, 3)
    except np.linalg.LinAlgError as exc:
        raise DegenerateModelError(f"singular steady-state system: {exc}") from exc
    return 2.0 * sys.amplitude / sys.omega_p_rabi * complex(rho[0, 1])


def transmission(chi_imag_integrated, cell_length_mm, lambda_p_nm):
    """Beer-Lambert transmitted fraction exp(-(2*pi/lambda_p) * chi * L).

    Accepts scalars or arrays of integrated absorption (imag susceptibility).
    Values more negative than a round-off guard are rejected; tiny negative
    round-off is clamped to zero so T never exceeds 1.
    """
    if cell_length_mm <= 0:
        raise ValidationError("cell_length_mm must be positive")
    chi = np.asarray(chi_imag_integrated, dtype=float)
    if np.any(chi < -NEGATIVE_ABSORPTION_TOL):
        raise ValidationError(
            "negative absorption passed to transmission "
            f"(min {chi.min():.3e}); imag susceptibility must be >= 0"
        )
    optical_depth = (
        2.0 * np.pi * (cell_length_mm * 1e6 / lambda_p_nm) * np.clip(chi, 0.0, None)
    )
    out = np.exp(-optical_depth)
    return out[()] if out.ndim == 0 else out


def optical_depth_factor(cell_length_mm, lambda_p_nm) -> float:
    """Multiplier converting integrated imag susceptibility to optical depth."""
    return 2.0 * np.pi * cell_length_mm * 1e6 / lambda_p_nm

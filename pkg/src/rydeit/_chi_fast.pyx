# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernel for Doppler-averaged susceptibility.

Contract mirrors _chi_numpy.averaged_chi; see that module for the full
docstring. Straight nested loops over (coupling detuning, velocity node)
with no temporaries.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "cython"


def averaged_chi(double dp,
                 cnp.ndarray dc_in,
                 cnp.ndarray v_in,
                 cnp.ndarray tw_in,
                 double inv_lp, double kappa,
                 double g21, double g31, double om24):
    """Velocity-quadrature sum of the ladder kernel ratio, per coupling detuning."""
    cdef double[::1] dc_array = np.ascontiguousarray(dc_in, dtype=np.float64)
    cdef double[::1] v_array = np.ascontiguousarray(v_in, dtype=np.float64)
    cdef double[::1] tw_array = np.ascontiguousarray(tw_in, dtype=np.float64)
    cdef Py_ssize_t nd = dc_array.shape[0]
    cdef Py_ssize_t nv = v_array.shape[0]
    if tw_array.shape[0] != nv:
        raise ValueError("tw_array must match v_array length")

    out_arr = np.empty(nd, dtype=np.complex128)
    cdef double complex[::1] out = out_arr

    cdef Py_ssize_t i, j
    cdef double complex d1, d2, acc, two_level
    cdef double dp_dc, tw

    if om24 == 0.0:
        acc = 0.0
        for j in range(nv):
            d1 = g21 - 1j * (dp + inv_lp * v_array[j])
            acc = acc + tw_array[j] / d1
        two_level = acc
        for i in range(nd):
            out[i] = two_level
        return out_arr

    cdef double complex[::1] d1_cache = np.empty(nv, dtype=np.complex128)
    for j in range(nv):
        d1_cache[j] = g21 - 1j * (dp + inv_lp * v_array[j])

    for i in range(nd):
        dp_dc = dp + dc_array[i]
        acc = 0.0
        for j in range(nv):
            d2 = g31 - 1j * (dp_dc + kappa * v_array[j])
            acc = acc + tw_array[j] * d2 / (d1_cache[j] * d2 + om24)
        out[i] = acc
    return out_arr

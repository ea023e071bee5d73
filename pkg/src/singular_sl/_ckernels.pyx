# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sweep kernels; same contracts as ``_pykernels``."""
import numpy as np

from libc.math cimport hypot


cdef inline double cabs(double complex z) nogil:
    return hypot(z.real, z.imag)


def sweep_forward(const double complex[::1] psi, const double complex[::1] decay,
                  const double complex[::1] w_far, const double complex[::1] w_near):
    cdef Py_ssize_t n = psi.shape[0], k
    out = np.zeros(n, dtype=np.complex128)
    cdef double complex[::1] S = out
    cdef double complex acc = 0
    with nogil:
        for k in range(n - 1):
            acc = decay[k] * acc + w_far[k] * psi[k] + w_near[k] * psi[k + 1]
            S[k + 1] = acc
    return out


def sweep_backward(const double complex[::1] psi, const double complex[::1] decay,
                   const double complex[::1] w_far, const double complex[::1] w_near):
    cdef Py_ssize_t n = psi.shape[0], k
    out = np.zeros(n, dtype=np.complex128)
    cdef double complex[::1] S = out
    cdef double complex acc = 0
    with nogil:
        for k in range(n - 2, -1, -1):
            acc = decay[k] * acc + w_near[k] * psi[k] + w_far[k] * psi[k + 1]
            S[k] = acc
    return out


def picard_forward(const double complex[::1] a, const double complex[::1] b,
                   const double complex[::1] c, const double[::1] dt,
                   const double complex[::1] decay, const double complex[::1] w_far,
                   const double complex[::1] w_near, double tol, int n_max):
    cdef Py_ssize_t n = a.shape[0], k
    z1_arr = np.ones(n, dtype=np.complex128)
    z2_arr = np.ones(n, dtype=np.complex128)
    n1_arr = np.ones(n, dtype=np.complex128)
    n2_arr = np.ones(n, dtype=np.complex128)
    cdef double complex[::1] z1 = z1_arr, z2 = z2_arr, n1 = n1_arr, n2 = n2_arr
    cdef double complex A, S, pa, pb, pa_prev, pb_prev
    cdef double inc, zmax
    cdef int it
    increments = []
    for it in range(1, n_max + 1):
        with nogil:
            A = 0
            S = 0
            inc = 0.0
            zmax = 1.0
            pa_prev = a[0] * z1[0] + b[0] * z2[0]
            pb_prev = c[0] * z1[0] - b[0] * z2[0]
            for k in range(n - 1):
                pa = a[k + 1] * z1[k + 1] + b[k + 1] * z2[k + 1]
                pb = c[k + 1] * z1[k + 1] - b[k + 1] * z2[k + 1]
                A = A + 0.25 * dt[k] * (pa_prev + pa)
                S = decay[k] * S + w_far[k] * pb_prev + w_near[k] * pb
                n1[k + 1] = 1.0 + A + 0.5 * S
                n2[k + 1] = 1.0 + A - 0.5 * S
                inc = max(inc, max(cabs(n1[k + 1] - z1[k + 1]), cabs(n2[k + 1] - z2[k + 1])))
                zmax = max(zmax, max(cabs(n1[k + 1]), cabs(n2[k + 1])))
                pa_prev = pa
                pb_prev = pb
        z1_arr, n1_arr = n1_arr, z1_arr
        z2_arr, n2_arr = n2_arr, z2_arr
        z1, n1, z2, n2 = z1_arr, n1_arr, z2_arr, n2_arr
        increments.append(inc)
        if inc <= tol * (1.0 + zmax):
            return z1_arr, z2_arr, it, increments, True
    return z1_arr, z2_arr, n_max, increments, False


def picard_backward(const double complex[::1] a, const double complex[::1] b,
                    const double complex[::1] c, const double[::1] dt,
                    const double complex[::1] decay, const double complex[::1] w_far,
                    const double complex[::1] w_near, double tol, int n_max):
    cdef Py_ssize_t n = a.shape[0], k
    z1_arr = np.ones(n, dtype=np.complex128)
    z2_arr = np.ones(n, dtype=np.complex128)
    n1_arr = np.ones(n, dtype=np.complex128)
    n2_arr = np.ones(n, dtype=np.complex128)
    cdef double complex[::1] z1 = z1_arr, z2 = z2_arr, n1 = n1_arr, n2 = n2_arr
    cdef double complex A, S, pa, pb, pa_next, pb_next
    cdef double inc, zmax
    cdef int it
    increments = []
    for it in range(1, n_max + 1):
        with nogil:
            A = 0
            S = 0
            inc = 0.0
            zmax = 1.0
            pa_next = c[n - 1] * z1[n - 1] + b[n - 1] * z2[n - 1]
            pb_next = a[n - 1] * z1[n - 1] - b[n - 1] * z2[n - 1]
            for k in range(n - 2, -1, -1):
                pa = c[k] * z1[k] + b[k] * z2[k]
                pb = a[k] * z1[k] - b[k] * z2[k]
                A = A + 0.25 * dt[k] * (pa + pa_next)
                S = decay[k] * S + w_near[k] * pb + w_far[k] * pb_next
                n1[k] = 1.0 - A - 0.5 * S
                n2[k] = 1.0 - A + 0.5 * S
                inc = max(inc, max(cabs(n1[k] - z1[k]), cabs(n2[k] - z2[k])))
                zmax = max(zmax, max(cabs(n1[k]), cabs(n2[k])))
                pa_next = pa
                pb_next = pb
        z1_arr, n1_arr = n1_arr, z1_arr
        z2_arr, n2_arr = n2_arr, z2_arr
        z1, n1, z2, n2 = z1_arr, n1_arr, z2_arr, n2_arr
        increments.append(inc)
        if inc <= tol * (1.0 + zmax):
            return z1_arr, z2_arr, it, increments, True
    return z1_arr, z2_arr, n_max, increments, False

"""Numpy implementation of the sweep kernels (fallback for ``_ckernels``).

The first-order recurrence S[k+1] = d[k] S[k] + r[k] is evaluated in closed
form, S[k] = D[k] * sum_{j<k} r[j] / D[j+1] with D the running product of d,
in blocks short enough that D neither overflows nor underflows.
"""
import numpy as np

_BLOCK_LOG = 500.0


def linear_recurrence(decay, r):
    """S[0] = 0, S[k+1] = decay[k] * S[k] + r[k]."""
    n = decay.size
    out = np.zeros(n + 1, dtype=complex)
    if n == 0:
        return out
    L = np.zeros(n + 1, dtype=complex)
    L[1:] = np.cumsum(np.log(decay.astype(complex)))
    re = L.real
    start, carry = 0, 0.0 + 0.0j
    while start < n:
        # longest block over which Re(L) moves by at most _BLOCK_LOG
        over = np.flatnonzero(np.abs(re[start:] - re[start]) > _BLOCK_LOG)
        stop = n if over.size == 0 else min(n, max(start + 1, start + int(over[0]) - 1))
        ell = L[start:stop + 1] - L[start]
        acc = np.cumsum(r[start:stop] * np.exp(-ell[1:]))
        out[start + 1:stop + 1] = np.exp(ell[1:]) * (carry + acc)
        carry = out[stop]
        start = stop
    return out


def sweep_forward(psi, decay, w_far, w_near):
    """S[k] = int_0^{t_k} e^{-alpha (t_k - s)} psi(s) ds on a piecewise-linear psi."""
    return linear_recurrence(decay, w_far * psi[:-1] + w_near * psi[1:])


def sweep_backward(psi, decay, w_far, w_near):
    """S[k] = int_{t_k}^h e^{-alpha (s - t_k)} psi(s) ds on a piecewise-linear psi."""
    r = w_near * psi[:-1] + w_far * psi[1:]
    return linear_recurrence(decay[::-1], r[::-1])[::-1]


def _cumtrap_forward(y, dt):
    out = np.zeros(y.size, dtype=complex)
    out[1:] = np.cumsum(0.5 * dt * (y[1:] + y[:-1]))
    return out


def _cumtrap_backward(y, dt):
    out = np.zeros(y.size, dtype=complex)
    out[:-1] = np.cumsum((0.5 * dt * (y[1:] + y[:-1]))[::-1])[::-1]
    return out


def picard_forward(a, b, c, dt, decay, w_far, w_near, tol, n_max):
    """Iterate z = (1,1) + A z + B z from z = (1,1); see ``volterra.picard_solve``."""
    n = a.size
    z1 = np.ones(n, dtype=complex)
    z2 = np.ones(n, dtype=complex)
    increments = []
    for it in range(1, n_max + 1):
        A = 0.5 * _cumtrap_forward(a * z1 + b * z2, dt)
        S = 0.5 * sweep_forward(c * z1 - b * z2, decay, w_far, w_near)
        n1, n2 = 1.0 + A + S, 1.0 + A - S
        inc = max(np.max(np.abs(n1 - z1)), np.max(np.abs(n2 - z2)))
        z1, z2 = n1, n2
        increments.append(float(inc))
        if inc <= tol * (1.0 + max(np.max(np.abs(z1)), np.max(np.abs(z2)))):
            return z1, z2, it, increments, True
    return z1, z2, n_max, increments, False


def picard_backward(a, b, c, dt, decay, w_far, w_near, tol, n_max):
    """Iterate z = (1,1) + A1 z + B1 z from z = (1,1)."""
    n = a.size
    z1 = np.ones(n, dtype=complex)
    z2 = np.ones(n, dtype=complex)
    increments = []
    for it in range(1, n_max + 1):
        A = -0.5 * _cumtrap_backward(c * z1 + b * z2, dt)
        S = 0.5 * sweep_backward(a * z1 - b * z2, decay, w_far, w_near)
        n1, n2 = 1.0 + A - S, 1.0 + A + S
        inc = max(np.max(np.abs(n1 - z1)), np.max(np.abs(n2 - z2)))
        z1, z2 = n1, n2
        increments.append(float(inc))
        if inc <= tol * (1.0 + max(np.max(np.abs(z1)), np.max(np.abs(z2)))):
            return z1, z2, it, increments, True
    return z1, z2, n_max, increments, False

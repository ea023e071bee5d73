"""Hot loops of the Volterra solver, with backend selection at import.

The compiled extension ``_ckernels`` is used when it has been built;
otherwise (or when ``SINGULAR_SL_BACKEND=python``) the numpy fallback
``_pykernels`` is used. Both expose the same four functions:

``sweep_forward(psi, decay, w_far, w_near)``
    running Filon integral from the left end,
``sweep_backward(psi, decay, w_far, w_near)``
    running Filon integral from the right end,
``picard_forward(a, b, c, dt, decay, w_far, w_near, tol, n_max)``
``picard_backward(...)``
    the full fixed-point iteration, returning
    ``(z1, z2, iterations, increments, converged)``.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels

_SERIES_CUTOFF = 0.1


def _load(name: str):
    if name == "python":
        return _pykernels
    if name == "compiled":
        from . import _ckernels  # noqa: PLC0415

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def get_backend(name: str | None = None):
    """Kernel module for ``name`` ('compiled' or 'python'); default = active one."""
    return impl if name is None else _load(name)


def _select():
    wanted = os.environ.get("SINGULAR_SL_BACKEND", "").strip().lower()
    if wanted == "python":
        return "python", _pykernels
    try:
        return "compiled", _load("compiled")
    except ImportError:
        if wanted == "compiled":
            raise
        return "python", _pykernels


BACKEND, impl = _select()


def compiled_available() -> bool:
    try:
        _load("compiled")
    except ImportError:
        return False
    return True


def filon_weights(dt: np.ndarray, alpha: complex):
    """Per-cell decay factor and Filon-trapezoid weights for e^{-alpha s}.

    For a cell of width d with z = alpha d, the kernel is integrated exactly
    against the linear interpolant of psi:

        decay  = e^{-z}
        w_near = d * (z - 1 + e^{-z}) / z^2     (node where the kernel is 1)
        w_far  = d * (1 - e^{-z} - z e^{-z}) / z^2

    Small |z| uses the Taylor series to avoid cancellation.
    """
    dt = np.asarray(dt, dtype=float)
    z = alpha * dt
    decay = np.exp(-z)
    phi1 = np.empty_like(z)
    phi2 = np.empty_like(z)
    small = np.abs(z) < _SERIES_CUTOFF
    zs = -z[small]
    # phi_j(w) = sum_k w^k / (k + j)!
    term1 = np.ones_like(zs)
    term2 = np.full_like(zs, 0.5)
    s1, s2 = term1.copy(), term2.copy()
    for k in range(1, 12):
        term1 = term1 * zs / (k + 1)
        term2 = term2 * zs / (k + 2)
        s1 += term1
        s2 += term2
    phi1[small], phi2[small] = s1, s2
    zl = z[~small]
    El = decay[~small]
    phi1[~small] = (1.0 - El) / zl
    phi2[~small] = (zl - 1.0 + El) / zl**2
    w_near = dt * phi2
    w_far = dt * (phi1 - phi2)
    return decay.astype(complex), w_far.astype(complex), w_near.astype(complex)

"""Volterra integral operators and the Picard solver.

With mu = -i lambda and the shorthand

    a = sigma + g / mu,   b = f - sigma,   c = sigma - g / mu,

the solution built from the left end (exponent e^{mu t}) solves

    z = (1, 1) + A z + B z,
    (A z)(t) = 1/2 int_0^t (a z1 + b z2) (both rows),
    (B z)(t) = +-1/2 int_0^t e^{-2 mu (t - s)} (c z1 - b z2),

and the one built from the right end (exponent e^{-mu t}) solves

    z = (1, 1) + A1 z + B1 z,
    (A1 z)(t) = -1/2 int_t^h (c z1 + b z2) (both rows),
    (B1 z)(t) = -+1/2 int_t^h e^{2 mu (t - s)} (a z1 - b z2).

For Re mu >= -r every kernel is bounded by e^{2 r h} (|f| + |g| + |sigma|),
so the operators are Volterra with zero spectral radius and the Picard
iteration converges with a factorial rate.

Integrals without the exponential use the trapezoid rule; those with it use
a Filon-trapezoid rule (exact against the piecewise-linear interpolant) run
as an O(n) recursion. The recursions live in :mod:`singular_sl.kernels`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import GridError, HalfPlaneError, NoConvergence
from .liouville import TransformedSystem

MU_MIN = 1.0
GUARD_SLACK = 50.0

# Which end a branch is anchored at. With mu = -i lambda the left-anchored
# solution carries e^{mu t} = e^{-i lambda t}, i.e. the minus branch.
FORWARD_BRANCH = "minus"
BACKWARD_BRANCH = "plus"


@dataclass(frozen=True)
class SpectralPoint:
    """Spectral parameter with its half-plane convention.

    Volterra operators are only ever applied in the upper convention
    (Im lambda >= -r, i.e. Re mu >= -r); the lower one is reduced to it by
    lambda -> -lambda in :mod:`singular_sl.solutions`.
    """

    lam: complex
    r: float = 0.0
    halfplane: str = "upper"
    mu_min: float = MU_MIN

    def __post_init__(self):
        lam = complex(self.lam)
        object.__setattr__(self, "lam", lam)
        if not (self.r >= 0 and math.isfinite(self.r)):
            raise HalfPlaneError(f"r must be a finite non-negative number, got {self.r}")
        if self.halfplane == "upper":
            if lam.imag < -self.r:
                raise HalfPlaneError(f"Im lambda = {lam.imag:g} < -r = {-self.r:g} (upper half-plane)")
        elif self.halfplane == "lower":
            if lam.imag > self.r:
                raise HalfPlaneError(f"Im lambda = {lam.imag:g} > r = {self.r:g} (lower half-plane)")
        else:
            raise HalfPlaneError(f"halfplane must be 'upper' or 'lower', got {self.halfplane!r}")
        if abs(lam) < self.mu_min:
            raise HalfPlaneError(f"|mu| = {abs(lam):g} below mu_min = {self.mu_min:g}")

    @property
    def mu(self) -> complex:
        return -1j * self.lam


@dataclass(frozen=True)
class IterationConfig:
    """Knobs of the Picard solve and of the grid policy.

    ``extrapolate`` solves on the policy grid and on its bisection and
    Richardson-combines the two (fourth order instead of second).
    """

    tol: float = 1e-10
    n_max: int = 200
    kappa: float = 8.0
    n_min: int = 2048
    extrapolate: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if self.kappa < 4:
            raise ValueError("kappa must be >= 4")
        if self.n_min < 16:
            raise ValueError("n_min must be >= 16")


def grid_points(cfg: IterationConfig, lam: complex, h: float) -> int:
    """Cells needed to put ``kappa`` nodes on each wavelength of e^{2 mu t}."""
    n = max(cfg.n_min, math.ceil(cfg.kappa * (abs(lam) * h / math.pi + 1.0)))
    return 64 * math.ceil(n / 64)


@dataclass(frozen=True)
class IterationState:
    z1: np.ndarray
    z2: np.ndarray
    iterations_used: int
    final_increment: float
    apriori_tail_bound: float
    increments: tuple = field(default=(), repr=False)
    grid_points: int = 0
    branch: str = ""
    backend: str = ""

    def diagnostics(self) -> dict:
        return {
            "iterations": self.iterations_used,
            "final_increment": self.final_increment,
            "apriori_tail_bound": self.apriori_tail_bound,
            "grid_points": self.grid_points,
        }


# ---------------------------------------------------------------------------
# quadrature

def _guard(mu: complex, h: float, r: float) -> None:
    worst = 2.0 * max(0.0, -mu.real) * h
    if worst > 2.0 * r * h + GUARD_SLACK:
        raise HalfPlaneError(
            f"kernel exponent reaches {worst:.1f} > 2 r h + {GUARD_SLACK:g} (Re mu = {mu.real:g}, r = {r:g})")


def oscillatory_integral(psi, t_grid, mu: complex, direction: str = "forward", r: float = 0.0) -> np.ndarray:
    """Filon-trapezoid values of the exponentially weighted running integral.

    forward:  int_0^t e^{-2 mu (t - s)} psi(s) ds
    backward: int_t^h e^{ 2 mu (t - s)} psi(s) ds

    returned at every node of ``t_grid``. Exact when psi is piecewise linear
    on the grid, whatever mu.
    """
    t = np.asarray(t_grid, dtype=float)
    psi = np.ascontiguousarray(psi, dtype=complex)
    mu = complex(mu)
    _guard(mu, float(t[-1] - t[0]), r)
    decay, w_far, w_near = kernels.filon_weights(np.diff(t), 2.0 * mu)
    if direction == "forward":
        return kernels.impl.sweep_forward(psi, decay, w_far, w_near)
    if direction == "backward":
        return kernels.impl.sweep_backward(psi, decay, w_far, w_near)
    raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")


def _cumtrap(y, t, backward=False):
    inc = 0.5 * np.diff(t) * (y[1:] + y[:-1])
    out = np.zeros(y.size, dtype=complex)
    if backward:
        out[:-1] = np.cumsum(inc[::-1])[::-1]
    else:
        out[1:] = np.cumsum(inc)
    return out


def kernel_coefficients(ts: TransformedSystem, mu: complex):
    """(a, b, c) = (sigma + g/mu, f - sigma, sigma - g/mu)."""
    a = ts.sigma + ts.g / mu
    b = ts.f - ts.sigma
    c = ts.sigma - ts.g / mu
    return (np.ascontiguousarray(a, dtype=complex), np.ascontiguousarray(b, dtype=complex),
            np.ascontiguousarray(c, dtype=complex))


def _pair(z, n):
    z1, z2 = z
    return (np.broadcast_to(np.asarray(z1, dtype=complex), (n,)),
            np.broadcast_to(np.asarray(z2, dtype=complex), (n,)))


def apply_A(ts: TransformedSystem, sp: SpectralPoint, z):
    a, b, _ = kernel_coefficients(ts, sp.mu)
    z1, z2 = _pair(z, a.size)
    v = 0.5 * _cumtrap(a * z1 + b * z2, ts.t_grid)
    return v, v.copy()


def apply_B(ts: TransformedSystem, sp: SpectralPoint, z):
    _, b, c = kernel_coefficients(ts, sp.mu)
    z1, z2 = _pair(z, b.size)
    row = 0.5 * oscillatory_integral(c * z1 - b * z2, ts.t_grid, sp.mu, "forward", sp.r)
    return row, -row


def apply_A1(ts: TransformedSystem, sp: SpectralPoint, z):
    _, b, c = kernel_coefficients(ts, sp.mu)
    z1, z2 = _pair(z, b.size)
    v = -0.5 * _cumtrap(c * z1 + b * z2, ts.t_grid, backward=True)
    return v, v.copy()


def apply_B1(ts: TransformedSystem, sp: SpectralPoint, z):
    a, b, _ = kernel_coefficients(ts, sp.mu)
    z1, z2 = _pair(z, a.size)
    row = -0.5 * oscillatory_integral(a * z1 - b * z2, ts.t_grid, sp.mu, "backward", sp.r)
    return row, -row


def apply_operator(ts: TransformedSystem, sp: SpectralPoint, z, branch: str):
    """(A + B) z for the forward branch, (A1 + B1) z for the backward one."""
    if branch == FORWARD_BRANCH:
        ops = (apply_A, apply_B)
    elif branch == BACKWARD_BRANCH:
        ops = (apply_A1, apply_B1)
    else:
        raise ValueError(f"branch must be 'plus' or 'minus', got {branch!r}")
    (p1, p2), (q1, q2) = (op(ts, sp, z) for op in ops)
    return p1 + q1, p2 + q2


def fixed_point_residual(ts: TransformedSystem, sp: SpectralPoint, z, branch: str) -> float:
    """sup |z - (1,1) - T z| / (1 + sup |z|), T the branch's integral operator."""
    t1, t2 = apply_operator(ts, sp, z, branch)
    z1, z2 = z
    res = max(np.max(np.abs(z1 - 1.0 - t1)), np.max(np.abs(z2 - 1.0 - t2)))
    return float(res / (1.0 + max(np.max(np.abs(z1)), np.max(np.abs(z2)))))


# ---------------------------------------------------------------------------
# a-priori bounds

def apriori_bound(C: float, F_h: float, n: int) -> float:
    """2 (2C)^n F_h^n / n!, the factorial bound on the n-th operator power."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if C == 0 or F_h == 0:
        return 0.0
    return math.exp(math.log(2.0) + n * math.log(2.0 * C * F_h) - math.lgamma(n + 1))


def apriori_tail(C: float, F_h: float, n: int) -> float:
    """Sum of :func:`apriori_bound` over k >= n."""
    total, k = 0.0, max(n, 1)
    while True:
        term = apriori_bound(C, F_h, k)
        total += term
        if k > 2.0 * C * F_h and (term <= 1e-17 * max(total, 1e-300) or term == 0.0):
            return total
        k += 1


def lemma_constants(ts: TransformedSystem, sp: SpectralPoint) -> tuple[float, float]:
    """(C, F_h) for the combined operator at ``sp``.

    Each kernel entry of A + B is at most 1/2 (1 + e^{2 max(0, -Re mu) h}) v
    with v = |f| + |g| + |sigma| (using |mu| >= 1), and F_h = int_0^h v.
    """
    C = 0.5 * (1.0 + math.exp(2.0 * max(0.0, -sp.mu.real) * ts.h))
    v = ts.envelope()
    F_h = float(np.sum(0.5 * np.diff(ts.t_grid) * (v[1:] + v[:-1])))
    return C, F_h


# ---------------------------------------------------------------------------

def picard_solve(ts: TransformedSystem, sp: SpectralPoint, branch: str,
                 cfg: IterationConfig | None = None, backend=None) -> IterationState:
    """Fixed-point iteration z <- (1,1) + T z from z = (1,1).

    ``branch='minus'`` uses (A, B) (anchored at t = 0), ``branch='plus'`` uses
    (A1, B1) (anchored at t = h).
    """
    cfg = cfg or IterationConfig()
    if sp.halfplane != "upper":
        raise HalfPlaneError("integral operators are defined in the upper convention only")
    mu = sp.mu
    _guard(mu, ts.h, sp.r)
    need = grid_points(cfg, sp.lam, ts.h) + 1
    if np.unique(ts.t_grid).size < need:
        raise GridError(f"grid has {np.unique(ts.t_grid).size} nodes, policy needs {need}")

    impl = kernels.get_backend(backend)
    a, b, c = kernel_coefficients(ts, mu)
    dt = np.ascontiguousarray(np.diff(ts.t_grid), dtype=float)
    decay, w_far, w_near = kernels.filon_weights(dt, 2.0 * mu)
    if branch == FORWARD_BRANCH:
        run = impl.picard_forward
    elif branch == BACKWARD_BRANCH:
        run = impl.picard_backward
    else:
        raise ValueError(f"branch must be 'plus' or 'minus', got {branch!r}")
    z1, z2, its, increments, ok = run(a, b, c, dt, decay, w_far, w_near, float(cfg.tol), int(cfg.n_max))
    if not ok:
        raise NoConvergence(
            f"{branch} branch: increment {increments[-1]:.3e} after {its} iterations (tol {cfg.tol:.1e}); "
            "grid under-resolved or lambda outside the half-plane?")
    C, F_h = lemma_constants(ts, sp)
    return IterationState(
        z1=np.asarray(z1), z2=np.asarray(z2), iterations_used=int(its),
        final_increment=float(increments[-1]), apriori_tail_bound=apriori_tail(C, F_h, its + 1),
        increments=tuple(increments), grid_points=int(ts.t_grid.size), branch=branch,
        backend="python" if impl is kernels._pykernels else "compiled",
    )

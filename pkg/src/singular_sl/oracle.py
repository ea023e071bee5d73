"""Reference solutions used to validate the Volterra solver.

Three independent routes:

* closed form for constant coefficients,
* a transfer matrix for a single delta potential (p = 0, rho = 1),
* an adaptive high-order integrator (scipy DOP853) for smooth data.

None of them uses :mod:`singular_sl.liouville` or :mod:`singular_sl.volterra`;
the adaptive one carries x(t), the correction integral of sigma and F = int f
in its own state vector.

Anchoring mirrors the solver: in the upper convention y+ is fixed at the right
end and y- at the left end, in the lower convention the other way round. The
anchored values are the exact leading terms, so every branch coincides with
the solver's up to discretisation error.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from .coefficients import CoefficientSet, Interval
from .errors import DomainError, SpecError, StiffnessError

MIN_RTOL = 3e-14  # below this DOP853 refuses the tolerance
GOLDEN_HEADER = ["x", "re_y", "im_y", "re_y_quasi", "im_y_quasi"]


@dataclass(frozen=True)
class OracleSolution:
    x_grid: np.ndarray
    y: np.ndarray
    y_quasi: np.ndarray
    method: str
    est_error: float
    t_grid: np.ndarray | None = None

    def __post_init__(self):
        if not self.est_error >= 0:
            raise ValueError("est_error must be non-negative")
        if not (np.all(np.isfinite(self.y)) and np.all(np.isfinite(self.y_quasi))):
            raise FloatingPointError(f"{self.method}: non-finite samples")


def _sign(branch: str) -> int:
    if branch == "plus":
        return 1
    if branch == "minus":
        return -1
    raise ValueError(f"branch must be 'plus' or 'minus', got {branch!r}")


def _anchor_at_right(branch: str, halfplane: str) -> bool:
    if halfplane not in ("upper", "lower"):
        raise ValueError(f"halfplane must be 'upper' or 'lower', got {halfplane!r}")
    return (branch == "plus") == (halfplane == "upper")


def constant_closed_form(rho0: float, lam, interval, branch: str, x=None, n: int = 257) -> OracleSolution:
    """y = rho0^{-1/4} e^{+-i lam sqrt(rho0) (x - a)} and its quasi-derivative."""
    iv = interval if isinstance(interval, Interval) else Interval(*interval)
    if not rho0 > 0:
        raise DomainError("rho0 must be positive")
    s, lam = _sign(branch), complex(lam)
    x = np.linspace(iv.a, iv.b, n) if x is None else np.asarray(x, dtype=float)
    e = np.exp(s * 1j * lam * np.sqrt(rho0) * (x - iv.a))
    return OracleSolution(x_grid=x, y=rho0**-0.25 * e, y_quasi=s * 1j * lam * rho0**0.25 * e,
                          method="closed_form_constant", est_error=0.0, t_grid=np.sqrt(rho0) * (x - iv.a))


def transfer_matrix_delta(c, x0: float, lam, interval, branch: str, halfplane: str = "upper", x=None,
                          right=None, n: int = 257) -> OracleSolution:
    """Exact solution of -y'' + c delta(x - x0) y = lam^2 y.

    On each side y = A e^{i lam (x-a)} + B e^{-i lam (x-a)}; y and the
    quasi-derivative y' - c 1[x > x0] y are continuous at x0, i.e. y' jumps by
    c y(x0). ``right`` flags nodes (duplicated at x0) to be read as right limits.
    """
    iv = interval if isinstance(interval, Interval) else Interval(*interval)
    x0 = float(x0)
    if not iv.a < x0 < iv.b:
        raise DomainError(f"x0 = {x0} must lie strictly inside ({iv.a}, {iv.b})")
    s, lam, c = _sign(branch), complex(lam), complex(c)
    x = np.linspace(iv.a, iv.b, n) if x is None else np.asarray(x, dtype=float)
    right = np.zeros(x.shape, dtype=bool) if right is None else np.asarray(right, dtype=bool)

    def basis(xx):
        ep, em = np.exp(1j * lam * (xx - iv.a)), np.exp(-1j * lam * (xx - iv.a))
        return np.array([[ep, em], [1j * lam * ep, -1j * lam * em]])

    at_right = _anchor_at_right(branch, halfplane)
    xa = iv.b if at_right else iv.a
    ea = np.exp(s * 1j * lam * (xa - iv.a))
    # anchor data (y, y'); the quasi-derivative equals y' - c y on the right side
    ya, qa = ea, s * 1j * lam * ea
    dya = qa + c * ya if at_right else qa
    coef_anchor = np.linalg.solve(basis(xa), np.array([ya, dya]))
    y0, dy0 = basis(x0) @ coef_anchor
    if at_right:
        coef_right, coef_left = coef_anchor, np.linalg.solve(basis(x0), np.array([y0, dy0 - c * y0]))
    else:
        coef_left, coef_right = coef_anchor, np.linalg.solve(basis(x0), np.array([y0, dy0 + c * y0]))

    side = (x > x0) | ((x == x0) & right)
    y = np.empty(x.shape, dtype=complex)
    yq = np.empty(x.shape, dtype=complex)
    for mask, coef, sig in ((~side, coef_left, 0.0), (side, coef_right, c)):
        vals = np.einsum("ijk,j->ik", basis(x[mask]), coef) if mask.any() else np.zeros((2, 0))
        y[mask] = vals[0]
        yq[mask] = vals[1] - sig * vals[0]
    scale = max(1.0, float(np.max(np.abs(yq))))
    return OracleSolution(x_grid=x, y=y, y_quasi=yq, method="transfer_matrix_delta",
                          est_error=64 * np.finfo(float).eps * scale, t_grid=x - iv.a)


class _Smooth:
    """Right-hand side of the first-order t-system, evaluated straight from ``cs``."""

    def __init__(self, cs: CoefficientSet, lam: complex):
        self.cs, self.lam2 = cs, complex(lam) ** 2
        a = cs.interval.a
        self.base0 = complex(cs.evaluate("u", a)) / np.sqrt(float(cs.evaluate("rho", a)))

    def coeffs(self, x):
        ev = self.cs.evaluate
        p, u = complex(ev("p", x)), complex(ev("u", x))
        rho, rp = float(ev("rho", x)), float(ev("rho_prime", x))
        sq = np.sqrt(rho)
        return p, u, rho, rp, sq

    def __call__(self, t, s):
        x = s[0].real
        p, u, rho, rp, sq = self.coeffs(x)
        f = p / sq - rp / (2.0 * rho * sq)
        sigma = u / sq - self.base0 + s[1]
        g = f * sigma - sigma * sigma
        y, y1 = s[3], s[4]
        return np.array([1.0 / sq, rp * u / (2.0 * rho * rho), f,
                         sigma * y + y1, (g - self.lam2) * y + (f - sigma) * y1])


def _check_smooth(cs: CoefficientSet):
    iv = cs.interval
    inner = [xb for xb in cs.breakpoints if iv.a < xb < iv.b]
    if inner:
        raise SpecError(f"adaptive_reference needs smooth coefficients; breakpoints at {inner}")


def _integrate(rhs, span, s0, rtol, events=None, h=1.0):
    sol = solve_ivp(rhs, span, s0, method="DOP853", rtol=rtol, atol=rtol * 1e-3, events=events,
                    dense_output=True)
    if sol.status == -1:
        raise StiffnessError(f"reference integrator failed: {sol.message}")
    steps = np.abs(np.diff(sol.t))[:-1]  # the last step is cut short by the end point
    if steps.size and np.min(steps) < 1e-12 * h:
        raise StiffnessError(f"step size collapsed to {np.min(steps):.2e}")
    return sol


def _geometry(cs: CoefficientSet, rtol: float):
    """t-length h, I(h) and F(h) by integrating x(t) until x = b."""
    iv = cs.interval
    rhs = _Smooth(cs, 1.0)

    def head(t, s):
        return rhs(t, np.concatenate([s, [0.0, 0.0]]))[:3]

    def hit_b(t, s):
        return s[0].real - iv.b

    hit_b.terminal, hit_b.direction = True, 1
    guess = iv.length * np.sqrt(float(np.max(cs.evaluate("rho", np.linspace(iv.a, iv.b, 257))))) * 1.5 + 1.0
    sol = _integrate(head, (0.0, guess), np.array([iv.a, 0.0, 0.0], dtype=complex), rtol, events=hit_b)
    if not sol.t_events[0].size:
        raise StiffnessError("x(t) never reached b")
    return float(sol.t_events[0][0]), sol.y_events[0][0]


def _adaptive_once(cs, lam, branch, halfplane, rtol, t_eval):
    s, lam = _sign(branch), complex(lam)
    h, end = _geometry(cs, rtol)
    rho_a = float(cs.evaluate("rho", cs.interval.a))
    rhs = _Smooth(cs, lam)
    if _anchor_at_right(branch, halfplane):
        ea = np.exp(s * 1j * lam * h)
        cst = rho_a**-0.25 * np.exp(0.5 * end[2])
        s0 = np.array([cs.interval.b, end[1], end[2], cst * ea, s * 1j * lam * cst * ea], dtype=complex)
        span = (h, 0.0)
    else:
        cst = rho_a**-0.25
        s0 = np.array([cs.interval.a, 0.0, 0.0, cst, s * 1j * lam * cst], dtype=complex)
        span = (0.0, h)
    t_eval = np.linspace(0.0, h, 257) if t_eval is None else np.clip(np.asarray(t_eval, dtype=float), 0.0, h)
    sol = _integrate(rhs, span, s0, rtol, h=h)
    if sol.status != 0:
        raise StiffnessError(f"reference integrator stopped early: {sol.message}")
    out = sol.sol(t_eval)
    x = out[0].real
    rho = np.asarray(cs.evaluate("rho", x), dtype=float)
    return x, t_eval, out[3], np.sqrt(rho) * out[4]


def adaptive_reference(cs: CoefficientSet, lam, branch: str, tol: float = 1e-10, halfplane: str = "upper",
                       t_eval=None) -> OracleSolution:
    """Integrate the first-order t-system with DOP853 at relative tolerance ``tol``.

    ``t_eval`` gives output abscissae in the Liouville variable (default: 257
    uniform points). The returned samples come from a second run at
    ``tol / 100``; ``est_error`` is the sup difference between the two runs,
    which bounds the error of the tighter one from above.
    """
    _check_smooth(cs)
    tol = max(float(tol), MIN_RTOL)
    x, t, y, yq = _adaptive_once(cs, lam, branch, halfplane, tol, t_eval)
    _, _, y2, yq2 = _adaptive_once(cs, lam, branch, halfplane, max(tol * 1e-2, MIN_RTOL), t)
    est = float(max(np.max(np.abs(y - y2)), np.max(np.abs(yq - yq2))))
    return OracleSolution(x_grid=x, y=y2, y_quasi=yq2, method="adaptive_reference", est_error=est, t_grid=t)


# ---------------------------------------------------------------------------
# golden files

def write_golden(path, sol: OracleSolution, comment: str = "") -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# singular-sl golden v1 method={sol.method} est_error={sol.est_error:.3e} {comment}".rstrip() + "\n")
        w = csv.writer(fh)
        w.writerow(GOLDEN_HEADER)
        for row in zip(sol.x_grid, sol.y.real, sol.y.imag, sol.y_quasi.real, sol.y_quasi.imag):
            w.writerow([repr(float(v)) for v in row])


def read_golden(path) -> OracleSolution:
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
        rows = list(csv.reader(fh))
    meta = dict(item.split("=", 1) for item in first[1:].split() if "=" in item)
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return OracleSolution(x_grid=data[:, 0], y=data[:, 1] + 1j * data[:, 2], y_quasi=data[:, 3] + 1j * data[:, 4],
                          method=meta.get("method", "golden"), est_error=float(meta.get("est_error", 0.0)))


def sup_difference(x_grid, y, y_quasi, ref: OracleSolution, atol_x: float = 1e-9) -> tuple[float, float]:
    """sup |y - y_ref|, sup |y_quasi - y_quasi_ref| over reference abscissae.

    Each reference point is matched to the nearest grid node (within
    ``atol_x``); unmatched references raise.
    """
    x_grid = np.asarray(x_grid)
    idx = np.clip(np.searchsorted(x_grid, ref.x_grid), 1, x_grid.size - 1)
    left_closer = np.abs(ref.x_grid - x_grid[idx - 1]) <= np.abs(x_grid[idx] - ref.x_grid)
    idx = np.where(left_closer, idx - 1, idx)
    gap = np.max(np.abs(x_grid[idx] - ref.x_grid))
    if gap > atol_x:
        raise ValueError(f"reference abscissae not on the grid (gap {gap:.2e})")
    return (float(np.max(np.abs(np.asarray(y)[idx] - ref.y))),
            float(np.max(np.abs(np.asarray(y_quasi)[idx] - ref.y_quasi))))

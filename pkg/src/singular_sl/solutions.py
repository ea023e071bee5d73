"""Fundamental system y+-(x, lambda), remainders and decay sweeps.

Each branch is written as

    y_+-(x)       = rho^{-1/4} exp(P/2 +- i lambda t(x)) (1 + phi_+-(x)),
    y_+-^[1](x)   = +-i lambda rho^{1/4} exp(P/2 +- i lambda t(x)) (1 + psi_+-(x)),

with y^[1] = y' - h_x sqrt(rho) y the x-variable quasi-derivative. In the
upper half-plane convention y_+ is built from the right end of the interval
and y_- from the left end, each from its own Volterra equation. The lower
half-plane is handled through lambda -> -lambda and swapping the labels.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .coefficients import CoefficientSet
from .errors import HalfPlaneError, NormalizationError
from .liouville import LiouvilleMap, TransformedSystem, build_map, transform
from .volterra import (BACKWARD_BRANCH, IterationConfig, IterationState, SpectralPoint, fixed_point_residual,
                       grid_points, picard_solve)

BRANCHES = ("plus", "minus")
DECAY_THRESHOLD = 0.05
WRONSKIAN_TOL = 1e-6
UNDERFLOW = 1e-300


@dataclass(frozen=True)
class SolutionBranch:
    branch: str
    lam: complex
    x_grid: np.ndarray
    t_grid: np.ndarray
    y: np.ndarray
    y_quasi: np.ndarray
    y_quasi_t: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    state: IterationState = field(repr=False)

    @property
    def sign(self) -> int:
        return 1 if self.branch == "plus" else -1

    def leading(self, ts: TransformedSystem) -> np.ndarray:
        """rho^{-1/4} exp(P/2 +- i lambda t)."""
        return ts.rho**-0.25 * np.exp(0.5 * ts.P + self.sign * 1j * self.lam * ts.t_grid)

    def relabel(self, branch: str, lam: complex) -> "SolutionBranch":
        return replace(self, branch=branch, lam=complex(lam))


def wronskian(plus: SolutionBranch, minus: SolutionBranch) -> np.ndarray:
    """W(t) = y+ y-^[1]t - y- y+^[1]t."""
    return plus.y * minus.y_quasi_t - minus.y * plus.y_quasi_t


@dataclass(frozen=True)
class FundamentalSystem:
    plus: SolutionBranch
    minus: SolutionBranch
    wronskian: np.ndarray
    normalized_wronskian: np.ndarray
    lam: complex
    r: float
    halfplane: str
    ts: TransformedSystem = field(repr=False)
    residuals: dict = field(default_factory=dict)

    @property
    def x_grid(self) -> np.ndarray:
        return self.plus.x_grid

    @property
    def t_grid(self) -> np.ndarray:
        return self.plus.t_grid

    def branch(self, name: str) -> SolutionBranch:
        return self.plus if name == "plus" else self.minus

    def wronskian_defect(self) -> float:
        """max_t |W e^{-F} - W(0)| / |W(0)|."""
        w0 = self.normalized_wronskian[0]
        return float(np.max(np.abs(self.normalized_wronskian - w0)) / abs(w0))

    def diagnostics(self) -> dict:
        return {
            "lambda": [self.lam.real, self.lam.imag],
            "r": self.r,
            "halfplane": self.halfplane,
            "wronskian_0": [complex(self.wronskian[0]).real, complex(self.wronskian[0]).imag],
            "wronskian_defect": self.wronskian_defect(),
            "sigma_defect": self.ts.sigma_defect(),
            "identity_defect": self.ts.identity_defect(),
            "branches": {
                b.branch: {**b.state.diagnostics(), "fixed_point_residual": self.residuals.get(b.branch)}
                for b in (self.plus, self.minus)
            },
        }


@dataclass(frozen=True)
class DecayReport:
    lambda_sequence: list
    sup_phi_plus: list
    sup_phi_minus: list
    sup_psi_plus: list
    sup_psi_minus: list
    halfplanes: list
    r: float
    threshold: float = DECAY_THRESHOLD
    iterations: list = field(default_factory=list)

    def columns(self) -> dict:
        return {"sup_phi_plus": self.sup_phi_plus, "sup_phi_minus": self.sup_phi_minus,
                "sup_psi_plus": self.sup_psi_plus, "sup_psi_minus": self.sup_psi_minus}

    def passes(self) -> dict:
        """Per column: last <= threshold and last <= first / 2 (or everything zero)."""
        out = {}
        for name, vals in self.columns().items():
            first, last = vals[0], vals[-1]
            out[name] = bool(last <= self.threshold and (last <= 0.5 * first or first == 0.0))
        return out

    @property
    def ok(self) -> bool:
        return all(self.passes().values())


# ---------------------------------------------------------------------------

def assemble_branch(cs: CoefficientSet, lmap: LiouvilleMap, ts: TransformedSystem, sp: SpectralPoint,
                    state: IterationState, branch: str) -> SolutionBranch:
    """Turn the Volterra solution (z1, z2) of one branch into y, y^[1], phi, psi.

    plus (anchored at t = h):  y = c e^{-mu t} z1,  y^[1]t = -mu c e^{-mu t} z2,
                               c = rho(a)^{-1/4} e^{F(h)/2};
    minus (anchored at 0):     y = c e^{mu t} z1,   y^[1]t =  mu c e^{mu t} z2,
                               c = rho(a)^{-1/4}.
    """
    if branch not in BRANCHES:
        raise ValueError(f"branch must be 'plus' or 'minus', got {branch!r}")
    mu, t = sp.mu, ts.t_grid
    s = 1 if branch == "plus" else -1
    c = ts.rho_a**-0.25 * (np.exp(0.5 * ts.F[-1]) if branch == BACKWARD_BRANCH else 1.0)
    with np.errstate(over="ignore", under="ignore"):
        expo = np.exp(-s * mu * t)
        lead = ts.rho**-0.25 * np.exp(0.5 * ts.P + s * 1j * sp.lam * t)
    if np.min(np.abs(lead)) < UNDERFLOW or not np.all(np.isfinite(lead)):
        raise NormalizationError(f"{branch} leading term leaves the double range at lambda = {sp.lam}")
    y = c * expo * state.z1
    yqt = -s * mu * c * expo * state.z2
    y_quasi = np.sqrt(ts.rho) * yqt
    # Division by the leading term with e^{-s mu t} = e^{s i lambda t} cancelled
    # exactly, so no large exponentials meet.
    scale = c * ts.rho**0.25 * np.exp(-0.5 * ts.P)
    phi = scale * state.z1 - 1.0
    psi = scale * state.z2 - 1.0
    for name, arr in (("y", y), ("y_quasi", y_quasi)):
        if not np.all(np.isfinite(arr)):
            raise NormalizationError(f"non-finite {name} in {branch} branch at lambda = {sp.lam}")
    return SolutionBranch(branch=branch, lam=sp.lam, x_grid=lmap.x_grid, t_grid=t, y=y, y_quasi=y_quasi,
                          y_quasi_t=yqt, phi=phi, psi=psi, z1=state.z1, z2=state.z2, state=state)


def _quick_h(cs: CoefficientSet) -> float:
    return build_map(cs, 64).h


def _solve_upper(cs: CoefficientSet, lam: complex, r: float, cfg: IterationConfig, backend=None):
    sp = SpectralPoint(lam, r, "upper")
    n = grid_points(cfg, sp.lam, _quick_h(cs))
    lmap = build_map(cs, n)
    ts = transform(cs, lmap)
    states = {b: picard_solve(ts, sp, b, cfg, backend) for b in BRANCHES}
    if not cfg.extrapolate:
        residuals = {b: fixed_point_residual(ts, sp, (states[b].z1, states[b].z2), b) for b in BRANCHES}
    else:
        # the residual is a property of the discrete solve, so it is taken on the fine grid
        fmap, idx = lmap.refined()
        tsf = transform(cs, fmap)
        fine = {b: picard_solve(tsf, sp, b, cfg, backend) for b in BRANCHES}
        residuals = {b: fixed_point_residual(tsf, sp, (fine[b].z1, fine[b].z2), b) for b in BRANCHES}
        ts = TransformedSystem.extrapolate(ts, tsf, idx)
        states = {
            b: replace(fine[b], z1=(4.0 * fine[b].z1[idx] - states[b].z1) / 3.0,
                       z2=(4.0 * fine[b].z2[idx] - states[b].z2) / 3.0)
            for b in BRANCHES
        }
    branches = {b: assemble_branch(cs, lmap, ts, sp, states[b], b) for b in BRANCHES}
    return branches, ts, residuals


def _system(plus, minus, ts, lam, r, halfplane, residuals) -> FundamentalSystem:
    W = wronskian(plus, minus)
    if W[0] == 0:
        raise NormalizationError("W(0) = 0: branches are linearly dependent")
    return FundamentalSystem(plus=plus, minus=minus, wronskian=W, normalized_wronskian=W * np.exp(-ts.F),
                             lam=complex(lam), r=float(r), halfplane=halfplane, ts=ts, residuals=residuals)


def fundamental_system(cs: CoefficientSet, lam, r: float = 0.0, cfg: IterationConfig | None = None,
                       backend=None) -> FundamentalSystem:
    """Both branches at ``lam`` in the upper convention Im lambda >= -r."""
    cfg = cfg or IterationConfig()
    branches, ts, residuals = _solve_upper(cs, complex(lam), r, cfg, backend)
    return _system(branches["plus"], branches["minus"], ts, lam, r, "upper", residuals)


def solve_lower_halfplane(cs: CoefficientSet, lam, r: float = 0.0, cfg: IterationConfig | None = None,
                          backend=None) -> FundamentalSystem:
    """Both branches at ``lam`` with Im lambda <= r.

    Solves at -lambda in the upper convention; the leading terms are invariant
    under (lambda, +-) -> (-lambda, -+), so the branches swap labels and keep
    their remainders.
    """
    cfg = cfg or IterationConfig()
    lam = complex(lam)
    SpectralPoint(lam, r, "lower")
    branches, ts, residuals = _solve_upper(cs, -lam, r, cfg, backend)
    plus = branches["minus"].relabel("plus", lam)
    minus = branches["plus"].relabel("minus", lam)
    residuals = {"plus": residuals["minus"], "minus": residuals["plus"]}
    return _system(plus, minus, ts, lam, r, "lower", residuals)


def choose_halfplane(lam, r: float) -> str:
    return "upper" if complex(lam).imag >= -r else "lower"


def solve(cs: CoefficientSet, lam, r: float = 0.0, cfg: IterationConfig | None = None,
          halfplane: str = "auto", backend=None) -> FundamentalSystem:
    """Dispatch to :func:`fundamental_system` or :func:`solve_lower_halfplane`."""
    if halfplane == "auto":
        halfplane = choose_halfplane(lam, r)
    if halfplane == "upper":
        return fundamental_system(cs, lam, r, cfg, backend)
    if halfplane == "lower":
        return solve_lower_halfplane(cs, lam, r, cfg, backend)
    raise HalfPlaneError(f"halfplane must be 'upper', 'lower' or 'auto', got {halfplane!r}")


def remainder_sweep(cs: CoefficientSet, lambdas, r: float = 0.0, cfg: IterationConfig | None = None,
                    halfplane: str = "auto", jobs: int = 1, threshold: float = DECAY_THRESHOLD) -> DecayReport:
    """sup_x |phi+-|, |psi+-| along a sequence of increasing |lambda|.

    Points are independent and run on ``jobs`` threads; results keep the
    input order.
    """
    lambdas = [complex(v) for v in lambdas]
    if not lambdas:
        raise ValueError("empty lambda sequence")
    mods = [abs(v) for v in lambdas]
    if any(b < a for a, b in zip(mods, mods[1:])):
        raise ValueError("lambda sequence must be ordered by increasing |lambda|")
    cfg = cfg or IterationConfig()
    planes = [choose_halfplane(v, r) if halfplane == "auto" else halfplane for v in lambdas]

    def one(k):
        fs = solve(cs, lambdas[k], r, cfg, planes[k])
        sups = [float(np.max(np.abs(getattr(fs.branch(b), q)))) for q in ("phi", "psi") for b in BRANCHES]
        return sups, max(fs.plus.state.iterations_used, fs.minus.state.iterations_used)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, range(len(lambdas))))
    else:
        rows = [one(k) for k in range(len(lambdas))]
    cols = list(zip(*(s for s, _ in rows)))
    return DecayReport(lambda_sequence=lambdas, sup_phi_plus=list(cols[0]), sup_phi_minus=list(cols[1]),
                       sup_psi_plus=list(cols[2]), sup_psi_minus=list(cols[3]), halfplanes=planes, r=float(r),
                       threshold=threshold, iterations=[it for _, it in rows])


def geometric_sequence(start, factor: float, count: int) -> list[complex]:
    """start, start*factor, ..., count terms (a ray in the lambda-plane)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if not factor > 1:
        raise ValueError("factor must be > 1")
    return [complex(start) * factor**k for k in range(count)]


def branch_symmetry_defect(fs_upper: FundamentalSystem, fs_lower: FundamentalSystem) -> float:
    """sup |conj(y+ upper) - y- lower|, relative; zero for real data and real lambda."""
    a, b = np.conj(fs_upper.plus.y), fs_lower.minus.y
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(a)))))


__all__ = [
    "SolutionBranch", "FundamentalSystem", "DecayReport", "assemble_branch", "fundamental_system",
    "solve_lower_halfplane", "solve", "remainder_sweep", "geometric_sequence", "wronskian",
    "branch_symmetry_defect", "choose_halfplane", "WRONSKIAN_TOL",
]

"""Liouville change of variables t = int_a^x sqrt(rho) and the t-system.

In the new variable the equation reads

    -y'' + f y' + (q / rho) y = lambda^2 y,   f = p / sqrt(rho) - rho_x' / (2 rho^{3/2}),

and with sigma = int q / rho dt, the quasi-derivative y^[1] = y' - sigma y
turns it into a first-order system whose coefficients are sigma, f - sigma
and g = f sigma - sigma^2. All of them are ordinary (L1/L2) functions even
when q is a distribution.

Grids may contain a node twice: the left and right limits at a breakpoint
of u or rho'. Such zero-width cells contribute nothing to any integral.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .coefficients import CoefficientSet, node_grid
from .errors import GridError, IntegrabilityError

MIN_POINTS = 16
DENSE_FACTOR = 16
CONSISTENCY_TOL = 1e-6


@dataclass(frozen=True)
class LiouvilleMap:
    """Shared (x, t) grid plus a dense table for interpolated lookups.

    ``right[k]`` marks the second copy of a breakpoint node; coefficients are
    evaluated there as right limits. The dense table holds t and sqrt(rho) at
    the same abscissae, so t(x) is a cubic Hermite interpolant and x(t) is
    refined by a Newton step on it (both fourth-order accurate).
    """

    x_grid: np.ndarray
    t_grid: np.ndarray
    right: np.ndarray
    h: float
    x_dense: np.ndarray = field(repr=False)
    t_dense: np.ndarray = field(repr=False)
    sq_dense: np.ndarray = field(repr=False)

    def t_of_x(self, x):
        xd, td, sd = self.x_dense, self.t_dense, self.sq_dense
        x = np.asarray(x, dtype=float)
        k = np.clip(np.searchsorted(xd, x, side="right") - 1, 0, xd.size - 2)
        dx = xd[k + 1] - xd[k]
        s = (x - xd[k]) / dx
        h00, h10 = (1 + 2 * s) * (1 - s) ** 2, s * (1 - s) ** 2
        h01, h11 = s * s * (3 - 2 * s), s * s * (s - 1)
        return h00 * td[k] + h10 * dx * sd[k] + h01 * td[k + 1] + h11 * dx * sd[k + 1]

    def x_of_t(self, t):
        x = np.interp(t, self.t_dense, self.x_dense)
        for _ in range(2):
            slope = np.interp(x, self.x_dense, self.sq_dense)
            x = np.clip(x - (self.t_of_x(x) - t) / slope, self.x_dense[0], self.x_dense[-1])
        return x

    @property
    def n_points(self) -> int:
        return self.t_grid.size

    def roundtrip_defect(self) -> float:
        return float(np.max(np.abs(self.x_of_t(self.t_of_x(self.x_grid)) - self.x_grid)))

    def refined(self) -> tuple["LiouvilleMap", np.ndarray]:
        """Bisect every non-degenerate cell.

        Returns the refined map and the indices of the original nodes in it.
        """
        t, x, right = self.t_grid, self.x_grid, self.right
        wide = np.diff(t) > 0
        counts = np.ones(t.size, dtype=int)
        counts[:-1] += wide
        idx = np.concatenate([[0], np.cumsum(counts)[:-1]])
        size = int(counts.sum())
        t_new = np.empty(size)
        x_new = np.empty(size)
        r_new = np.zeros(size, dtype=bool)
        t_new[idx], x_new[idx], r_new[idx] = t, x, right
        mids = idx[:-1][wide] + 1
        t_mid = 0.5 * (t[:-1] + t[1:])[wide]
        t_new[mids] = t_mid
        x_new[mids] = self.x_of_t(t_mid)
        return replace(self, x_grid=x_new, t_grid=t_new, right=r_new), idx


def build_map(cs: CoefficientSet, resolution: int) -> LiouvilleMap:
    """Tabulate t(x) by the trapezoid rule and lay a grid uniform in t.

    ``resolution`` is the number of uniform cells; breakpoints of ``cs`` are
    inserted as (doubled) nodes on top of them.
    """
    if resolution < MIN_POINTS:
        raise GridError(f"resolution {resolution} < {MIN_POINTS} points")
    iv = cs.interval
    xd, _ = node_grid(iv, cs.breakpoints, DENSE_FACTOR * resolution)
    xd = np.unique(xd)
    sq = np.sqrt(cs.evaluate("rho", xd))
    sq_mid = np.sqrt(cs.evaluate("rho", 0.5 * (xd[1:] + xd[:-1])))
    td = _cumulative_simpson(sq[:-1], sq_mid, sq[1:], np.diff(xd))
    h = float(td[-1])
    if not np.all(np.diff(td) > 0):
        raise GridError("t(x) is not strictly increasing on the dense table")
    dense = LiouvilleMap(x_grid=xd, t_grid=td, right=np.zeros(xd.size, dtype=bool), h=h, x_dense=xd,
                         t_dense=td, sq_dense=sq)

    t = np.linspace(0.0, h, resolution + 1)
    x = dense.x_of_t(t)
    x[0], x[-1] = iv.a, iv.b
    tol = 1e-12 * iv.length
    interior = [xb for xb in cs.breakpoints if iv.a + tol < xb < iv.b - tol]
    if interior:
        xb = np.asarray(interior)
        tb = dense.t_of_x(xb)
        # drop uniform nodes that would leave a sliver cell next to a breakpoint
        close = np.min(np.abs(t[:, None] - tb[None, :]), axis=1) <= 1e-9 * h
        close[[0, -1]] = False
        t = np.concatenate([t[~close], tb, tb])
        x = np.concatenate([x[~close], xb, xb])
        order = np.argsort(t, kind="stable")
        t, x = t[order], x[order]
    right = np.zeros(x.size, dtype=bool)
    right[1:] = t[1:] == t[:-1]
    if any(xb - iv.a <= tol for xb in cs.breakpoints):
        right[0] = True
    return replace(dense, x_grid=x, t_grid=t, right=right)


def _cumulative_simpson(vl, vm, vr, dx):
    out = np.zeros(dx.size + 1, dtype=np.result_type(vl, vm, vr, float))
    out[1:] = np.cumsum(dx / 6.0 * (vl + 4.0 * vm + vr))
    return out


def compute_sigma(cs: CoefficientSet, lmap: LiouvilleMap) -> np.ndarray:
    """sigma(t) = int_0^t q / rho, normalised to sigma(0) = 0.

    Uses u / sqrt(rho) plus the absolutely convergent correction
    int rho_x' u / (2 rho^2) dt, so q is never differentiated out of u.
    """
    x, right = lmap.x_grid, lmap.right

    def integrand(xx, r=None):
        uu, rr, rpp = (cs.evaluate(n, xx, r) for n in ("u", "rho", "rho_prime"))
        return rpp * uu / (2.0 * rr**2)

    x_mid = lmap.x_of_t(0.5 * (lmap.t_grid[:-1] + lmap.t_grid[1:]))
    corr = _cumulative_simpson(integrand(x[:-1], right[:-1]), integrand(x_mid), integrand(x[1:]),
                               np.diff(lmap.t_grid))
    base = cs.evaluate("u", x, right) / np.sqrt(cs.evaluate("rho", x, right))
    return base - base[0] + corr


def _h_x(cs: CoefficientSet, lmap: LiouvilleMap) -> np.ndarray:
    """int_a^x q / sqrt(rho) dx, integrated in x (independent of sigma's t-quadrature)."""
    x, right = lmap.x_grid, lmap.right
    u = cs.evaluate("u", x, right)
    rho = cs.evaluate("rho", x, right)

    def integrand(xx, r=None):
        uu, rr, rpp = (cs.evaluate(n, xx, r) for n in ("u", "rho", "rho_prime"))
        return rpp * uu / (2.0 * rr**1.5)

    xm = 0.5 * (x[:-1] + x[1:])
    corr = _cumulative_simpson(integrand(x[:-1], right[:-1]), integrand(xm), integrand(x[1:]), np.diff(x))
    base = u / np.sqrt(rho)
    return base - base[0] + corr


@dataclass(frozen=True)
class TransformedSystem:
    """Coefficients of the first-order t-system, sampled on ``lmap``'s grid."""

    lmap: LiouvilleMap = field(repr=False)
    f: np.ndarray
    sigma: np.ndarray
    g: np.ndarray
    F: np.ndarray
    h_x: np.ndarray
    rho: np.ndarray
    P: np.ndarray
    rho_a: float

    @property
    def t_grid(self) -> np.ndarray:
        return self.lmap.t_grid

    @property
    def x_grid(self) -> np.ndarray:
        return self.lmap.x_grid

    @property
    def h(self) -> float:
        return self.lmap.h

    def sigma_defect(self) -> float:
        """sup |sigma(t(x)) - h_x(x)|."""
        return float(np.max(np.abs(self.sigma - self.h_x)))

    def identity_defect(self) -> float:
        """sup |F/2 - P/2 + ln(rho)/4 - ln(rho(a))/4| over the grid."""
        d = 0.5 * self.F - 0.5 * self.P + 0.25 * np.log(self.rho) - 0.25 * np.log(self.rho_a)
        return float(np.max(np.abs(d)))

    def envelope(self) -> np.ndarray:
        """v = |f| + |g| + |sigma|, the kernel envelope of the integral operators."""
        return np.abs(self.f) + np.abs(self.g) + np.abs(self.sigma)

    def check(self, tol: float = CONSISTENCY_TOL) -> None:
        """Raise :class:`IntegrabilityError` if an internal identity fails."""
        for name, val in (("sigma vs h_x", self.sigma_defect()), ("log-identity", self.identity_defect())):
            if not val <= tol:
                raise IntegrabilityError(f"{name} defect {val:.3e} exceeds {tol:.1e}")

    @staticmethod
    def extrapolate(coarse: "TransformedSystem", fine: "TransformedSystem", idx: np.ndarray) -> "TransformedSystem":
        """Richardson-combine two second-order tabulations on the coarse grid."""

        def rich(a, b):
            return (4.0 * b[idx] - a) / 3.0

        return replace(coarse, sigma=rich(coarse.sigma, fine.sigma), F=rich(coarse.F, fine.F),
                       h_x=rich(coarse.h_x, fine.h_x), g=rich(coarse.g, fine.g))


def transform(cs: CoefficientSet, lmap: LiouvilleMap) -> TransformedSystem:
    """Tabulate f, sigma, g, F = int f and h_x on the map's grid."""
    x, right = lmap.x_grid, lmap.right
    with np.errstate(all="ignore"):
        p = cs.evaluate("p", x, right)
        rho = cs.evaluate("rho", x, right)
        rp = cs.evaluate("rho_prime", x, right)
        f = p / np.sqrt(rho) - rp / (2.0 * rho**1.5)
        sigma = compute_sigma(cs, lmap)
        g = f * sigma - sigma**2

        x_mid = lmap.x_of_t(0.5 * (lmap.t_grid[:-1] + lmap.t_grid[1:]))

        def f_at(xx, r=None):
            pp, rr, rpp = (cs.evaluate(n, xx, r) for n in ("p", "rho", "rho_prime"))
            return pp / np.sqrt(rr) - rpp / (2.0 * rr**1.5)

        F = _cumulative_simpson(f_at(x[:-1], right[:-1]), f_at(x_mid), f_at(x[1:]), np.diff(lmap.t_grid))
        h_x = _h_x(cs, lmap)
        P = cs.P(x)
    for name, arr in (("f", f), ("sigma", sigma), ("g", g), ("F", F), ("h_x", h_x)):
        if not np.all(np.isfinite(arr)):
            raise IntegrabilityError(f"non-finite values in {name}")
    return TransformedSystem(lmap=lmap, f=f, sigma=sigma, g=g, F=F, h_x=h_x, rho=rho, P=P,
                             rho_a=float(rho[0]))

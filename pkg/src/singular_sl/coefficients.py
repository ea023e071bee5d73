"""Problem data for -y'' + p y' + q y = lambda^2 rho y on [a, b].

The potential ``q`` is never stored. It enters only through its
antiderivative ``u`` (an L2 function that may jump), which is enough for
every downstream formula.

Coefficients are plain vectorised callables ``x -> ndarray``. At a declared
breakpoint a callable returns its *left* value; right limits are obtained by
evaluating just to the right of the node (see :func:`evaluate`).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .errors import DomainError, IntegrabilityError, PositivityError, SpecError

Coefficient = Callable[[np.ndarray], np.ndarray]

RHO_MIN = 1e-8
OVERFLOW_GUARD = 1e12
VALIDATION_POINTS = 4096


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise DomainError(f"interval endpoints must be finite, got [{a}, {b}]")
        if not a < b:
            raise DomainError(f"interval requires a < b, got [{a}, {b}]")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def length(self) -> float:
        return self.b - self.a


# ---------------------------------------------------------------------------
# closed-form primitives

def _num(v):
    """JSON scalar or ``[re, im]`` pair to a Python number."""
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise SpecError(f"complex values are written as [re, im], got {v!r}")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, Mapping):
        return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
    if isinstance(v, (int, float, complex)):
        return v
    raise SpecError(f"not a number: {v!r}")


def _const(value):
    value = _num(value)

    def fn(x):
        return np.full(np.shape(x), value, dtype=complex if isinstance(value, complex) else float)

    return fn, ()


def _polynomial(coeffs):
    # ascending powers
    c = [_num(v) for v in coeffs]
    if not c:
        raise SpecError("polynomial needs at least one coefficient")
    c_desc = np.array(c[::-1])

    def fn(x):
        return np.polyval(c_desc, np.asarray(x, dtype=float))

    return fn, ()


def _trig(func="sin", amplitude=1.0, frequency=1.0, phase=0.0, offset=0.0):
    base = {"sin": np.sin, "cos": np.cos}.get(func)
    if base is None:
        raise SpecError(f"trig func must be 'sin' or 'cos', got {func!r}")
    A, w, ph, off = _num(amplitude), float(frequency), float(phase), _num(offset)

    def fn(x):
        return A * base(w * np.asarray(x, dtype=float) + ph) + off

    return fn, ()


def _exponential(amplitude=1.0, rate=1.0, offset=0.0):
    A, k, off = _num(amplitude), float(rate), _num(offset)

    def fn(x):
        return A * np.exp(k * np.asarray(x, dtype=float)) + off

    return fn, ()


def _step(x0, height=1.0, base=0.0):
    x0, c, base = float(x0), _num(height), _num(base)

    def fn(x):
        # left-continuous: the jump is felt strictly to the right of x0
        return base + c * (np.asarray(x, dtype=float) > x0)

    return fn, (x0,)


def _sawtooth(period=1.0, amplitude=1.0, x0=0.0, offset=0.0, *, interval: Interval):
    T, A, x0, off = float(period), _num(amplitude), float(x0), _num(offset)
    if T <= 0:
        raise SpecError("sawtooth period must be positive")

    def fn(x):
        s = (np.asarray(x, dtype=float) - x0) / T
        frac = s - np.ceil(s) + 1.0  # in (0, 1], left-continuous at the teeth
        return off + A * frac

    k0 = math.ceil((interval.a - x0) / T)
    k1 = math.floor((interval.b - x0) / T)
    jumps = tuple(x0 + k * T for k in range(k0, k1 + 1))
    return fn, jumps


PRIMITIVES = {
    "constant": _const,
    "polynomial": _polynomial,
    "trig": _trig,
    "exponential": _exponential,
    "step": _step,
    "sawtooth": _sawtooth,
}


def _samples(xs, values, breakpoints, hold):
    xs = np.asarray(xs, dtype=float)
    vals = np.asarray([_num(v) for v in values])
    if xs.ndim != 1 or xs.shape != vals.shape or xs.size < 2:
        raise SpecError("samples need matching 1-d 'x' and 'values' with >= 2 entries")
    if np.any(np.diff(xs) < 0):
        raise SpecError("sample abscissae must be non-decreasing")
    bps = np.asarray(sorted(breakpoints), dtype=float)
    last = xs.size - 1

    def fn(x):
        x = np.asarray(x, dtype=float)
        i = np.clip(np.searchsorted(xs, x, side="left"), 0, last)
        j = np.clip(i, 1, last)
        x0, x1 = xs[j - 1], xs[j]
        v0, v1 = vals[j - 1], vals[j]
        w = np.clip((x - x0) / np.where(x1 > x0, x1 - x0, 1.0), 0.0, 1.0)
        out = v0 + w * (v1 - v0)
        if hold and bps.size:
            # u is held constant on each side of a declared breakpoint
            k = np.minimum(np.searchsorted(bps, x0, side="right"), bps.size - 1)
            xb = bps[k]
            straddle = (xb > x0) & (xb < x1)
            out = np.where(straddle, np.where(x <= xb, v0, v1), out)
        # on a sample node (first of a duplicated pair) take that sample
        return np.where(xs[i] == x, vals[i], out)

    return fn


def _build(desc, name: str, interval: Interval, breakpoints) -> tuple[Coefficient, tuple]:
    if isinstance(desc, (int, float, complex, list)) and not isinstance(desc, bool):
        return _const(desc)
    if isinstance(desc, Mapping) and "kind" not in desc and set(desc) <= {"re", "im"}:
        return _const(desc)
    if callable(desc):
        return desc, ()
    if not isinstance(desc, Mapping) or "kind" not in desc:
        raise SpecError(f"{name}: expected {{'kind': 'expr'|'samples', ...}}, got {desc!r}")
    kind = desc["kind"]
    if kind == "expr":
        prim = desc.get("name")
        if prim not in PRIMITIVES:
            raise SpecError(f"{name}: unknown primitive {prim!r}; known: {sorted(PRIMITIVES)}")
        params = dict(desc.get("params", {}))
        try:
            if prim == "sawtooth":
                return PRIMITIVES[prim](**params, interval=interval)
            return PRIMITIVES[prim](**params)
        except TypeError as exc:
            raise SpecError(f"{name}: bad params for {prim!r}: {exc}") from None
    if kind == "samples":
        xs = desc.get("x")
        if xs is None or desc.get("values") is None:
            raise SpecError(f"{name}: samples need 'x' and 'values'")
        if min(xs) > interval.a or max(xs) < interval.b:
            raise SpecError(f"{name}: samples must cover [{interval.a}, {interval.b}]")
        return _samples(xs, desc["values"], breakpoints, hold=(name == "u")), ()
    raise SpecError(f"{name}: unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# grids and evaluation

def right_of(x: np.ndarray, right: np.ndarray | None, b: float) -> np.ndarray:
    """Shift nodes flagged ``right`` by one ulp towards ``b``."""
    x = np.asarray(x, dtype=float)
    if right is None:
        return x
    return np.where(right, np.nextafter(x, b), x)


def node_grid(interval: Interval, breakpoints, n: int):
    """Uniform grid of ``n`` cells plus breakpoints.

    Interior breakpoints appear twice: first the left limit, then the right
    limit (flagged in the returned boolean mask). A breakpoint at ``a`` is
    evaluated from the right.
    """
    a, b = interval.a, interval.b
    x = np.linspace(a, b, n + 1)
    tol = 1e-12 * (b - a)
    for xb in breakpoints:
        if abs(xb - a) <= tol or abs(xb - b) <= tol:
            continue
        k = int(np.argmin(np.abs(x - xb)))
        if abs(x[k] - xb) <= tol:
            x[k] = xb
        else:
            x = np.insert(x, np.searchsorted(x, xb), xb)
    x = np.repeat(x, [2 if a < xi < b and any(abs(xi - xb) <= tol for xb in breakpoints) else 1 for xi in x])
    right = np.zeros(x.size, dtype=bool)
    right[1:] = x[1:] == x[:-1]
    if any(abs(xb - a) <= tol for xb in breakpoints):
        right[0] = True
    return x, right


def _cumulative_simpson(vl, vm, vr, dx):
    """Cumulative per-cell Simpson sums; zero-width cells contribute 0."""
    out = np.zeros(dx.size + 1, dtype=np.result_type(vl, vm, vr, float))
    out[1:] = np.cumsum(dx / 6.0 * (vl + 4.0 * vm + vr))
    return out


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientSet:
    """Validated, immutable problem data.

    ``p`` and ``u`` may be complex; ``rho`` and ``rho_prime`` are real.
    ``P`` is the antiderivative of ``p`` with ``P(a) = 0``, tabulated once by
    Simpson's rule and evaluated by cubic Hermite interpolation.
    """

    interval: Interval
    p: Coefficient
    u: Coefficient
    rho: Coefficient
    rho_prime: Coefficient
    breakpoints: tuple[float, ...] = ()
    rho_min: float = RHO_MIN
    spec: dict | None = field(default=None, repr=False, compare=False)
    _P_cells: tuple = field(default=(), repr=False, compare=False)

    def evaluate(self, name: str, x, right=None) -> np.ndarray:
        fn = getattr(self, name)
        xe = right_of(x, right, self.interval.b)
        out = np.asarray(fn(xe))
        if out.shape != xe.shape:
            out = np.broadcast_to(out, xe.shape).copy()
        if name in ("rho", "rho_prime"):
            if np.iscomplexobj(out):
                if np.any(out.imag != 0):
                    raise SpecError(f"{name} must be real-valued")
                out = out.real
            return out.astype(float)
        return out

    def P(self, x) -> np.ndarray:
        xl, dx, Pl, Pr, pl, pr = self._P_cells
        x = np.asarray(x, dtype=float)
        k = np.clip(np.searchsorted(xl, x, side="right") - 1, 0, xl.size - 1)
        h = dx[k]
        s = (x - xl[k]) / h
        # cubic Hermite: end values P, end slopes p
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        out = h00 * Pl[k] + h10 * h * pl[k] + h01 * Pr[k] + h11 * h * pr[k]
        return np.where(x == self.interval.a, 0.0, out)

    def is_real(self) -> bool:
        """True when p and u take only real values (checked on a coarse grid)."""
        x, right = node_grid(self.interval, self.breakpoints, 64)
        for name in ("p", "u"):
            v = self.evaluate(name, x, right)
            if np.iscomplexobj(v) and np.any(v.imag):
                return False
        return True


def _tabulate_P(cs_fields: dict, interval: Interval, breakpoints):
    x, right = node_grid(interval, breakpoints, VALIDATION_POINTS)
    dx = np.diff(x)
    keep = dx > 0
    xl, xr = x[:-1][keep], x[1:][keep]
    rl = right[:-1][keep]
    p = cs_fields["p"]
    b = interval.b
    pl = np.asarray(p(right_of(xl, rl, b))) * np.ones(xl.shape)
    pr = np.asarray(p(xr)) * np.ones(xr.shape)
    pm = np.asarray(p(0.5 * (xl + xr))) * np.ones(xl.shape)
    cum = _cumulative_simpson(pl, pm, pr, xr - xl)
    return xl, xr - xl, cum[:-1], cum[1:], pl, pr


def make_coefficients(interval, p=0.0, u=0.0, rho=1.0, rho_prime=None, breakpoints=(), rho_min=RHO_MIN,
                      spec=None) -> CoefficientSet:
    """Build and validate a :class:`CoefficientSet`.

    Each coefficient may be a number, a vectorised callable or a JSON-style
    description (``{"kind": "expr", ...}`` / ``{"kind": "samples", ...}``).
    ``rho_prime`` may be omitted only when ``rho`` is a constant.
    """
    if not isinstance(interval, Interval):
        interval = Interval(*interval)
    declared = [float(v) for v in breakpoints]
    built = {}
    implied = []
    for name, desc in (("p", p), ("u", u), ("rho", rho)):
        built[name], extra = _build(desc, name, interval, declared)
        implied.extend(extra)
    if rho_prime is None:
        const_rho = isinstance(rho, (int, float)) or (
            isinstance(rho, Mapping) and rho.get("kind") == "expr" and rho.get("name") == "constant"
        )
        if not const_rho:
            raise SpecError("rho_prime must be supplied for a non-constant rho")
        rho_prime = 0.0
    built["rho_prime"], extra = _build(rho_prime, "rho_prime", interval, declared)
    implied.extend(extra)

    bps = sorted({float(v) for v in declared + implied})
    for xb in bps:
        if not interval.a <= xb <= interval.b:
            raise DomainError(f"breakpoint {xb} outside [{interval.a}, {interval.b}]")
    # merge near-duplicates
    merged: list[float] = []
    for xb in bps:
        if not merged or xb - merged[-1] > 1e-12 * interval.length:
            merged.append(xb)

    cs = CoefficientSet(interval=interval, breakpoints=tuple(merged), rho_min=rho_min, spec=spec,
                        _P_cells=_tabulate_P(built, interval, merged), **built)

    report = validate_conditions(cs)
    if not report.positivity:
        raise PositivityError(f"min rho = {report.rho_min:.3e} < rho_min = {rho_min:.1e}")
    if not report.integrable:
        bad = [k for k, ok in report.passes.items() if not ok and k != "positivity"]
        raise IntegrabilityError(f"integrability surrogate diverged for {bad}")
    return cs


@dataclass(frozen=True)
class ValidationReport:
    int_p2: float
    int_u2: float
    int_rhop_u: float
    rho_min: float
    passes: dict

    @property
    def positivity(self) -> bool:
        return self.passes["positivity"]

    @property
    def integrable(self) -> bool:
        return all(v for k, v in self.passes.items() if k != "positivity")

    @property
    def ok(self) -> bool:
        return all(self.passes.values())

    def as_dict(self) -> dict:
        return {"int_p2": self.int_p2, "int_u2": self.int_u2, "int_rhop_u": self.int_rhop_u,
                "rho_min": self.rho_min, "passes": dict(self.passes), "ok": self.ok}


def _guarded_integral(values_l, values_m, values_r, dx) -> float:
    with np.errstate(all="ignore"):
        cells = dx / 6.0 * (values_l + 4.0 * values_m + values_r)
        running = np.cumsum(cells)
    if not np.all(np.isfinite(running)) or np.any(running > OVERFLOW_GUARD):
        return math.inf
    return float(running[-1]) if running.size else 0.0


def validate_conditions(cs: CoefficientSet, n: int = VALIDATION_POINTS) -> ValidationReport:
    """Grid surrogates of the integrability and positivity conditions.

    Reports ``int |p|^2``, ``int |u|^2``, ``int |rho' u|`` (Simpson on a
    breakpoint-aligned grid) and the smallest sampled ``rho``. Never raises
    for a failed condition; :func:`make_coefficients` does.
    """
    x, right = node_grid(cs.interval, cs.breakpoints, n)
    dx = np.diff(x)
    keep = dx > 0
    xl, xr, rl = x[:-1][keep], x[1:][keep], right[:-1][keep]
    xm = 0.5 * (xl + xr)

    def at(name, pts, r=None):
        with np.errstate(all="ignore"):
            return cs.evaluate(name, pts, r)

    vals = {}
    for name in ("p", "u", "rho", "rho_prime"):
        vals[name] = (at(name, xl, rl), at(name, xm), at(name, xr))
    rho_all = np.concatenate([v for v in vals["rho"]])
    rho_low = float(np.min(rho_all)) if np.all(np.isfinite(rho_all)) else -math.inf

    w = xr - xl
    ip = _guarded_integral(*(np.abs(v) ** 2 for v in vals["p"]), w)
    iu = _guarded_integral(*(np.abs(v) ** 2 for v in vals["u"]), w)
    iru = _guarded_integral(*(np.abs(rp * uu) for rp, uu in zip(vals["rho_prime"], vals["u"])), w)
    passes = {
        "positivity": bool(rho_low >= cs.rho_min),
        "p_in_L2": math.isfinite(ip),
        "u_in_L2": math.isfinite(iu),
        "rho_prime_u_in_L1": math.isfinite(iru),
    }
    return ValidationReport(ip, iu, iru, rho_low, passes)


def ingest_coefficients(spec, rho_min: float = RHO_MIN) -> CoefficientSet:
    """Build a :class:`CoefficientSet` from a JSON description (dict, str or path).

    Keys: ``interval: [a, b]``, ``p``, ``u``, ``rho``, ``rho_prime`` and
    optionally ``breakpoints``. Missing ``p``/``u`` default to zero.
    """
    if isinstance(spec, (str, Path)):
        path = Path(spec)
        try:
            spec = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecError(f"cannot read spec {path}: {exc}") from None
    if not isinstance(spec, Mapping):
        raise SpecError("spec must be a JSON object")
    unknown = set(spec) - {"interval", "p", "u", "rho", "rho_prime", "breakpoints", "name", "comment"}
    if unknown:
        raise SpecError(f"unknown spec keys: {sorted(unknown)}")
    if "interval" not in spec or len(spec["interval"]) != 2:
        raise SpecError("spec needs 'interval': [a, b]")
    if "rho" not in spec:
        raise SpecError("spec needs 'rho'")
    return make_coefficients(
        Interval(*spec["interval"]),
        p=spec.get("p", 0.0),
        u=spec.get("u", 0.0),
        rho=spec["rho"],
        rho_prime=spec.get("rho_prime"),
        breakpoints=spec.get("breakpoints", ()),
        rho_min=rho_min,
        spec=dict(spec),
    )

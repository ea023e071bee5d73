"""Command-line front end: ``singular-sl solve|sweep|verify|compare-oracle``.

Exit codes
    0  success
    2  invalid input (spec file or command line)
    3  numerical failure (no convergence, normalisation, reference integrator)
    4  lambda outside the half-plane or below the mu_min guard
    5  sweep finished with at least one failed point
    6  an invariant or oracle comparison exceeded its tolerance
    7  sweep finished but the decay criteria failed

Errors are reported on stderr as one JSON object
``{"error": ..., "message": ..., "exit_code": ...}``.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import oracle as orc
from .coefficients import CoefficientSet, ingest_coefficients
from .errors import (DomainError, GridError, HalfPlaneError, IntegrabilityError, NoConvergence, NormalizationError,
                     PositivityError, SingularSLError, SpecError, StiffnessError)
from .solutions import BRANCHES, DECAY_THRESHOLD, WRONSKIAN_TOL, DecayReport, geometric_sequence, solve
from .volterra import IterationConfig

CSV_VERSION = "# singular-sl v1"
EXIT_OK, EXIT_SPEC, EXIT_NUMERIC, EXIT_HALFPLANE, EXIT_PARTIAL, EXIT_INVARIANT, EXIT_DECAY = 0, 2, 3, 4, 5, 6, 7

_EXIT_FOR = (
    ((SpecError, DomainError, PositivityError, IntegrabilityError, GridError), EXIT_SPEC),
    ((HalfPlaneError,), EXIT_HALFPLANE),
    ((NoConvergence, NormalizationError, StiffnessError), EXIT_NUMERIC),
)


def exit_code_for(exc: BaseException) -> int:
    for classes, code in _EXIT_FOR:
        if isinstance(exc, classes):
            return code
    return EXIT_NUMERIC


def _fmt(v) -> str:
    return repr(float(v))


def parse_complex(text: str) -> complex:
    """'re,im' or 're' -> complex."""
    parts = [p.strip() for p in str(text).split(",")]
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise SpecError(f"cannot parse complex value {text!r}; expected 're,im'")


def parse_sweep(tokens) -> list[complex]:
    """['start=re,im', 'factor=f', 'count=n'(, 'direction=re,im')] -> geometric lambda sequence."""
    kv = {}
    for tok in tokens:
        if "=" not in tok:
            raise SpecError(f"sweep token {tok!r} is not key=value")
        k, v = tok.split("=", 1)
        kv[k.strip()] = v.strip()
    missing = {"start", "factor", "count"} - set(kv)
    if missing:
        raise SpecError(f"sweep needs {sorted(missing)}")
    extra = set(kv) - {"start", "factor", "count", "direction"}
    if extra:
        raise SpecError(f"unknown sweep keys {sorted(extra)}")
    start = parse_complex(kv["start"])
    if "direction" in kv:
        d = parse_complex(kv["direction"])
        if d == 0:
            raise SpecError("sweep direction must be non-zero")
        start = abs(start) * d / abs(d)
    try:
        factor, count = float(kv["factor"]), int(kv["count"])
        return geometric_sequence(start, factor, count)
    except ValueError as exc:
        raise SpecError(f"bad sweep: {exc}") from None


@dataclass
class RunConfig:
    command: str
    spec: Path
    lambdas: list = field(default_factory=list)
    r: float = 0.0
    halfplane: str = "auto"
    iteration: IterationConfig = field(default_factory=IterationConfig)
    out: Path | None = None
    fmt: str = "csv"
    jobs: int = 1
    timing: bool = True
    oracle: str = "auto"
    oracle_tol: float = 1e-12

    def __post_init__(self):
        if self.fmt not in ("csv", "json"):
            raise SpecError(f"format must be csv or json, got {self.fmt!r}")
        if self.halfplane not in ("upper", "lower", "auto"):
            raise SpecError(f"halfplane must be upper, lower or auto, got {self.halfplane!r}")
        if not self.lambdas:
            raise SpecError("no lambda given (use --lambda or --sweep)")
        if self.jobs < 1:
            raise SpecError("--jobs must be >= 1")


# ---------------------------------------------------------------------------
# output helpers

def _sidecar(path: Path) -> Path:
    return path.with_name(path.stem + ".diagnostics.json")


def _emit(cfg: RunConfig, text: str, diagnostics: dict | None = None) -> None:
    if cfg.out is None:
        sys.stdout.write(text)
        return
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    cfg.out.write_text(text)
    if diagnostics is not None and cfg.fmt == "csv":
        _sidecar(cfg.out).write_text(json.dumps(diagnostics, indent=2, sort_keys=True) + "\n")


def _csv(columns: list[str], rows, comments=()) -> str:
    buf = io.StringIO()
    buf.write(CSV_VERSION + "\n")
    for c in comments:
        buf.write(f"# {c}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else _fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def branch_columns() -> list[str]:
    cols = ["x", "t"]
    for b in BRANCHES:
        for q in ("y", "y_quasi", "phi", "psi"):
            cols += [f"{b}_re_{q}", f"{b}_im_{q}"]
    return cols


def _branch_rows(fs):
    arrays = [fs.x_grid, fs.t_grid]
    for b in BRANCHES:
        br = fs.branch(b)
        for q in (br.y, br.y_quasi, br.phi, br.psi):
            arrays += [q.real, q.imag]
    return zip(*arrays)


def _cfg_dict(cfg: IterationConfig) -> dict:
    return {"tol": cfg.tol, "n_max": cfg.n_max, "kappa": cfg.kappa, "n_min": cfg.n_min,
            "extrapolate": cfg.extrapolate}


# ---------------------------------------------------------------------------
# commands

def cmd_solve(cfg: RunConfig, cs: CoefficientSet) -> int:
    if len(cfg.lambdas) != 1:
        raise SpecError("solve takes exactly one lambda")
    fs = solve(cs, cfg.lambdas[0], cfg.r, cfg.iteration, cfg.halfplane)
    diag = {**fs.diagnostics(), "config": _cfg_dict(cfg.iteration)}
    if cfg.fmt == "json":
        doc = {"diagnostics": diag, "columns": branch_columns(),
               "rows": [[float(v) for v in row] for row in _branch_rows(fs)]}
        _emit(cfg, _json(doc))
    else:
        lam = fs.lam
        _emit(cfg, _csv(branch_columns(), _branch_rows(fs),
                        comments=[f"lambda={_fmt(lam.real)},{_fmt(lam.imag)} r={_fmt(fs.r)} halfplane={fs.halfplane}"]),
              diag)
    return EXIT_OK


SWEEP_COLUMNS = ["lambda_re", "lambda_im", "abs_lambda", "halfplane", "sup_phi_plus", "sup_phi_minus",
                 "sup_psi_plus", "sup_psi_minus", "iterations", "wall_time", "status"]


def _sweep_point(cs, lam, cfg: RunConfig):
    t0 = time.perf_counter()
    try:
        fs = solve(cs, lam, cfg.r, cfg.iteration, cfg.halfplane)
    except SingularSLError as exc:
        tag = {EXIT_HALFPLANE: "guard", EXIT_NUMERIC: "numeric", EXIT_SPEC: "input"}[exit_code_for(exc)]
        return {"lam": lam, "status": f"FAILED({tag})", "message": str(exc)}
    sups = {f"sup_{q}_{b}": float(np.max(np.abs(getattr(fs.branch(b), q)))) for q in ("phi", "psi") for b in BRANCHES}
    return {"lam": lam, "status": "OK", "halfplane": fs.halfplane, **sups,
            "iterations": max(fs.plus.state.iterations_used, fs.minus.state.iterations_used),
            "wall_time": time.perf_counter() - t0 if cfg.timing else 0.0}


def cmd_sweep(cfg: RunConfig, cs: CoefficientSet) -> int:
    lams = cfg.lambdas
    mods = [abs(v) for v in lams]
    if any(b < a for a, b in zip(mods, mods[1:])):
        raise SpecError("sweep lambdas must be ordered by increasing |lambda|")
    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        results = list(pool.map(lambda v: _sweep_point(cs, v, cfg), lams))
    good = [r for r in results if r["status"] == "OK"]
    verdict, passes = "FAIL", {}
    if good:
        report = DecayReport(lambda_sequence=[r["lam"] for r in good],
                             **{k: [r[k] for r in good] for k in SWEEP_COLUMNS[4:8]},
                             halfplanes=[r["halfplane"] for r in good], r=cfg.r, threshold=DECAY_THRESHOLD,
                             iterations=[r["iterations"] for r in good])
        passes = report.passes()
        verdict = "PASS" if report.ok else "FAIL"
    failed = len(results) - len(good)

    rows = []
    for r in results:
        lam = r["lam"]
        if r["status"] == "OK":
            rows.append([lam.real, lam.imag, abs(lam), r["halfplane"], *(r[k] for k in SWEEP_COLUMNS[4:8]),
                         str(r["iterations"]), r["wall_time"], "OK"])
        else:
            rows.append([lam.real, lam.imag, abs(lam), "-", "nan", "nan", "nan", "nan", "-", "nan", r["status"]])
    summary = {"verdict": verdict, "passes": passes, "failed_points": failed, "threshold": DECAY_THRESHOLD,
               "r": cfg.r, "config": _cfg_dict(cfg.iteration),
               "errors": [{"lambda": [r["lam"].real, r["lam"].imag], "status": r["status"], "message": r["message"]}
                          for r in results if r["status"] != "OK"]}
    if cfg.fmt == "json":
        _emit(cfg, _json({"summary": summary, "columns": SWEEP_COLUMNS,
                          "rows": [[v if isinstance(v, str) else float(v) for v in row] for row in rows]}))
    else:
        flags = " ".join(f"{k}={'PASS' if v else 'FAIL'}" for k, v in passes.items())
        _emit(cfg, _csv(SWEEP_COLUMNS, rows, comments=[f"decay {verdict} {flags}".rstrip()]), summary)
    print(f"decay criteria: {verdict} ({failed} failed point(s))", file=sys.stderr)
    if failed:
        return EXIT_PARTIAL
    return EXIT_OK if verdict == "PASS" else EXIT_DECAY


def verify_checks(cs: CoefficientSet, lam, r: float, icfg: IterationConfig, halfplane: str = "auto") -> list[dict]:
    """Invariant defects at one lambda: (name, value, tolerance, ok) records."""
    fs = solve(cs, lam, r, icfg, halfplane)
    lmap = fs.ts.lmap
    checks = [
        ("map_roundtrip", lmap.roundtrip_defect(), 1e-10 * cs.interval.length),
        ("wronskian", fs.wronskian_defect(), WRONSKIAN_TOL),
        ("sigma_vs_h_x", fs.ts.sigma_defect(), 1e-6),
        ("log_identity", fs.ts.identity_defect(), 1e-6),
    ]
    for b in BRANCHES:
        checks.append((f"fixed_point_residual_{b}", fs.residuals[b], 10 * icfg.tol))
    return [{"lambda": [complex(lam).real, complex(lam).imag], "invariant": n, "defect": float(v), "tolerance": t,
             "ok": bool(v <= t)} for n, v, t in checks]


def cmd_verify(cfg: RunConfig, cs: CoefficientSet) -> int:
    records = []
    for lam in cfg.lambdas:
        records += verify_checks(cs, lam, cfg.r, cfg.iteration, cfg.halfplane)
    ok = all(rec["ok"] for rec in records)
    if cfg.fmt == "json":
        _emit(cfg, _json({"ok": ok, "checks": records}))
    else:
        rows = [[rec["lambda"][0], rec["lambda"][1], rec["invariant"], rec["defect"], rec["tolerance"],
                 "PASS" if rec["ok"] else "FAIL"] for rec in records]
        _emit(cfg, _csv(["lambda_re", "lambda_im", "invariant", "defect", "tolerance", "status"], rows))
    return EXIT_OK if ok else EXIT_INVARIANT


def detect_oracle(spec: dict) -> tuple[str, dict]:
    """Pick the reference solution that applies to a spec: constant, delta or adaptive."""

    def const(desc):
        if isinstance(desc, (int, float)) and not isinstance(desc, bool):
            return float(desc)
        if isinstance(desc, dict) and desc.get("kind") == "expr" and desc.get("name") == "constant":
            v = desc.get("params", {}).get("value")
            return float(v) if isinstance(v, (int, float)) else None
        return None

    p, u, rho = const(spec.get("p", 0.0)), spec.get("u", 0.0), const(spec.get("rho"))
    if p == 0.0 and rho is not None:
        if const(u) == 0.0:
            return "constant", {"rho0": rho}
        params = u.get("params", {}) if isinstance(u, dict) else {}
        if (rho == 1.0 and isinstance(u, dict) and u.get("name") == "step"
                and float(params.get("base", 0.0) or 0.0) == 0.0):
            return "delta", {"c": orc_complex(params.get("height", 1.0)), "x0": float(params["x0"])}
    return "adaptive", {}


def orc_complex(v) -> complex:
    if isinstance(v, dict):
        return complex(v.get("re", 0.0), v.get("im", 0.0))
    if isinstance(v, (list, tuple)):
        return complex(*v)
    return complex(v)


def compare_records(cs: CoefficientSet, lam, r: float, icfg: IterationConfig, halfplane: str, kind: str,
                    oracle_tol: float = 1e-12) -> list[dict]:
    fs = solve(cs, lam, r, icfg, halfplane)
    if kind == "auto":
        kind, params = detect_oracle(cs.spec or {})
    else:
        params = detect_oracle(cs.spec or {})[1]
    iv = cs.interval
    out = []
    for b in BRANCHES:
        br = fs.branch(b)
        if kind == "constant":
            ref = orc.constant_closed_form(params.get("rho0", 1.0), fs.lam, iv, b, x=fs.x_grid)
        elif kind == "delta":
            if "c" not in params:
                raise SpecError("delta oracle needs p = 0, rho = 1 and u a step")
            ref = orc.transfer_matrix_delta(params["c"], params["x0"], fs.lam, iv, b, fs.halfplane, x=fs.x_grid,
                                            right=fs.ts.lmap.right)
        elif kind == "adaptive":
            t_nodes = np.unique(fs.t_grid)
            step = max(1, t_nodes.size // 512)
            ref = orc.adaptive_reference(cs, fs.lam, b, tol=oracle_tol, halfplane=fs.halfplane,
                                         t_eval=t_nodes[::step])
        else:
            raise SpecError(f"unknown oracle {kind!r}")
        dy, dq = orc.sup_difference(fs.x_grid, br.y, br.y_quasi, ref)
        tol = max(1e-6, 100 * ref.est_error)
        out.append({"lambda": [fs.lam.real, fs.lam.imag], "branch": b, "oracle": ref.method, "sup_diff_y": dy,
                    "sup_diff_y_quasi": dq, "est_error": ref.est_error, "tolerance": tol,
                    "ok": bool(dy <= tol and dq <= tol)})
    return out


def cmd_compare_oracle(cfg: RunConfig, cs: CoefficientSet) -> int:
    records = []
    for lam in cfg.lambdas:
        records += compare_records(cs, lam, cfg.r, cfg.iteration, cfg.halfplane, cfg.oracle, cfg.oracle_tol)
    ok = all(rec["ok"] for rec in records)
    if cfg.fmt == "json":
        _emit(cfg, _json({"ok": ok, "comparisons": records}))
    else:
        cols = ["lambda_re", "lambda_im", "branch", "oracle", "sup_diff_y", "sup_diff_y_quasi", "est_error",
                "tolerance", "status"]
        rows = [[rec["lambda"][0], rec["lambda"][1], rec["branch"], rec["oracle"], rec["sup_diff_y"],
                 rec["sup_diff_y_quasi"], rec["est_error"], rec["tolerance"], "PASS" if rec["ok"] else "FAIL"]
                for rec in records]
        _emit(cfg, _csv(cols, rows))
    return EXIT_OK if ok else EXIT_INVARIANT


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "verify": cmd_verify, "compare-oracle": cmd_compare_oracle}


# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise SpecError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--spec", required=True, type=Path, help="coefficient spec (JSON)")
    common.add_argument("--lambda", dest="lambdas", action="append", default=[], metavar="RE,IM",
                        help="spectral parameter; repeatable")
    common.add_argument("--sweep", nargs="+", metavar="KEY=VALUE",
                        help="geometric sweep: start=RE,IM factor=F count=N [direction=RE,IM]")
    common.add_argument("--r", type=float, default=0.0, help="half-plane offset r >= 0")
    common.add_argument("--halfplane", choices=["upper", "lower", "auto"], default="auto")
    common.add_argument("--tol", type=float, default=IterationConfig.tol)
    common.add_argument("--kappa", type=float, default=IterationConfig.kappa)
    common.add_argument("--n-min", type=int, default=IterationConfig.n_min)
    common.add_argument("--n-max", type=int, default=IterationConfig.n_max)
    common.add_argument("--no-extrapolate", action="store_true", help="single grid, no Richardson step")
    common.add_argument("--out", type=Path, help="output file (default: stdout)")
    common.add_argument("--format", dest="fmt", choices=["csv", "json"], default="csv")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    common.add_argument("--timing", action=argparse.BooleanOptionalAction, default=True,
                        help="record wall time per sweep point (off: column is 0, output is byte-stable)")
    common.add_argument("--oracle", choices=["auto", "constant", "delta", "adaptive"], default="auto")
    common.add_argument("--oracle-tol", type=float, default=1e-12)

    parser = _Parser(prog="singular-sl", description="Fundamental systems for Sturm-Liouville problems "
                                                     "with distributional potentials.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in (("solve", "both branches at one lambda"), ("sweep", "remainder decay along lambdas"),
                            ("verify", "invariant suite"), ("compare-oracle", "solver vs reference solution")):
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def parse_run_config(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    lams = [parse_complex(v) for v in ns.lambdas]
    if ns.sweep:
        lams += parse_sweep(ns.sweep)
    try:
        icfg = IterationConfig(tol=ns.tol, n_max=ns.n_max, kappa=ns.kappa, n_min=ns.n_min,
                               extrapolate=not ns.no_extrapolate)
    except ValueError as exc:
        raise SpecError(str(exc)) from None
    if not (math.isfinite(ns.r) and ns.r >= 0):
        raise SpecError("--r must be a finite non-negative number")
    return RunConfig(command=ns.command, spec=ns.spec, lambdas=lams, r=ns.r, halfplane=ns.halfplane,
                     iteration=icfg, out=ns.out, fmt=ns.fmt, jobs=ns.jobs, timing=ns.timing, oracle=ns.oracle,
                     oracle_tol=ns.oracle_tol)


def _fail(exc: BaseException, code: int) -> int:
    rec = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, HalfPlaneError) and "mu_min" in str(exc):
        rec["guard"] = "mu_min"
    print(json.dumps(rec), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        cfg = parse_run_config(sys.argv[1:] if argv is None else argv)
        cs = ingest_coefficients(cfg.spec)
        return COMMANDS[cfg.command](cfg, cs)
    except SingularSLError as exc:
        return _fail(exc, exit_code_for(exc))


if __name__ == "__main__":
    sys.exit(main())

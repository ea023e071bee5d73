"""Acceptance gate: nine criteria, one PASS/FAIL line each.

Run with ``pytest -s tests/test_acceptance.py`` (or ``python3 tests/test_acceptance.py``)
to see the report lines.
"""
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import SPECS, delta_set, sup  # noqa: E402
from singular_sl import (SpectralPoint, apriori_bound, build_map, fundamental_system, ingest_coefficients,  # noqa: E402
                         make_coefficients, oscillatory_integral, remainder_sweep, solve, solve_lower_halfplane,
                         transform)
from singular_sl.oracle import adaptive_reference, transfer_matrix_delta  # noqa: E402
from singular_sl.volterra import apply_operator, lemma_constants  # noqa: E402

TOL = 1e-10  # IterationConfig default


def load(name):
    return ingest_coefficients(SPECS / f"{name}.json")


def criterion_1():
    cs = load("free")
    worst = 0.0
    for lam in (5, 50 + 5j, -20):
        fs = solve(cs, lam)
        worst = max(worst, *(sup(getattr(fs.branch(b), q)) for b in ("plus", "minus") for q in ("phi", "psi")))
    return worst <= 1e-8, f"max sup|phi|,|psi| = {worst:.2e} (<= 1e-8)"


def criterion_2():
    cases = [("free", 5, 0), ("free", 50 + 5j, 0), ("rho4", 5, 0), ("rho4", 30 - 1j, 2), ("smooth", 30 + 3j, 0),
             ("smooth", 100, 0), ("smooth", 20 - 1j, 2), ("delta", 40, 0), ("delta", 40 + 4j, 0), ("delta", 40 - 2j, 0)]
    worst = max(solve(load(n), lam, r).wronskian_defect() for n, lam, r in cases)
    return worst <= 1e-6, f"max |W e^-F - W(0)|/|W(0)| = {worst:.2e} over {len(cases)} systems (<= 1e-6)"


def criterion_3():
    cs = load("smooth")
    worst = 0.0
    for lam, hp, r in ((30 + 3j, "upper", 0.0), (100, "upper", 0.0), (200 - 2j, "lower", 3.0)):
        fs = solve(cs, lam, r, halfplane=hp)
        for b in ("plus", "minus"):
            br = fs.branch(b)
            ref = adaptive_reference(cs, lam, b, tol=1e-12, halfplane=hp, t_eval=fs.t_grid[::8])
            worst = max(worst, sup(br.y[::8] - ref.y), sup(br.y_quasi[::8] - ref.y_quasi))
    return worst <= 1e-6, f"max sup diff vs reference integrator = {worst:.2e} (<= 1e-6)"


def criterion_4():
    cs = delta_set(c=2.0, x0=0.5)
    worst = 0.0
    for lam in (40, 40 + 4j, 40 - 2j):
        fs = solve(cs, lam)
        for b in ("plus", "minus"):
            br = fs.branch(b)
            ref = transfer_matrix_delta(2.0, 0.5, lam, (0, 1), b, fs.halfplane, x=fs.x_grid,
                                        right=fs.ts.lmap.right)
            worst = max(worst, sup(br.y - ref.y), sup(br.y_quasi - ref.y_quasi))
    return worst <= 1e-6, f"max sup diff vs transfer matrix = {worst:.2e} (<= 1e-6)"


def criterion_5():
    mods = [25 * 2**k for k in range(6)]
    failures, worst_last = [], 0.0
    for name in ("delta", "smooth"):
        cs = load(name)
        for arg in (0.0, 0.05, -0.02):
            lams = [m * np.exp(1j * arg) for m in mods]
            rep = remainder_sweep(cs, lams, r=2.0, jobs=3)
            for col, vals in rep.columns().items():
                worst_last = max(worst_last, vals[-1])
                if not (vals[-1] <= 0.05 and vals[-1] <= 0.5 * vals[0]):
                    failures.append(f"{name}/arg={arg}/{col}")
    detail = f"6 rays, max sup at |lambda|=800 = {worst_last:.3f} (<= 0.05, <= half of |lambda|=25)"
    if failures:
        detail += "; failing: " + ", ".join(failures)
    return not failures, detail


def criterion_6():
    free, rho4 = load("free"), load("rho4")
    worst = 0.0
    for cs, lam, r in ((free, 5 - 2j, 3.0), (free, 12 + 1j, 2.0), (rho4, 9 - 0.5j, 1.0)):
        up = fundamental_system(cs, lam, r=r)
        low = solve_lower_halfplane(cs, lam, r=r)
        for b in ("plus", "minus"):
            worst = max(worst, sup(up.branch(b).y - low.branch(b).y),
                        sup(up.branch(b).y_quasi - low.branch(b).y_quasi) / abs(lam))
    # not asserted: variable coefficients, where the two conventions anchor y+ at opposite ends
    smooth = load("smooth")
    up, low = fundamental_system(smooth, 20 - 1j, r=2.0), solve_lower_halfplane(smooth, 20 - 1j, r=2.0)
    info = sup(up.plus.y - low.plus.y)
    return worst <= 1e-6, f"max sup diff upper vs lower = {worst:.2e} (<= 1e-6); smooth 20-i (info) {info:.1e}"


def criterion_7():
    cs = load("smooth")
    lm = build_map(cs, 2048)
    ts = transform(cs, lm)
    r = 0.0
    sp = SpectralPoint(30 + 3j, r=r)
    C, F_h = lemma_constants(ts, sp)
    ratios = []
    for branch in ("plus", "minus"):
        z = (np.ones(ts.t_grid.size, complex), np.ones(ts.t_grid.size, complex))
        for n in range(1, 11):
            z = apply_operator(ts, sp, z, branch)
            ratios.append(max(sup(z[0]), sup(z[1])) / (apriori_bound(C, F_h, n) * np.exp(2 * r * ts.h)))
    worst = max(ratios)
    return worst <= 1.0, f"max ||(A+B)^n 1|| / bound over n=1..10 = {worst:.3f} (<= 1)"


def criterion_8():
    t = np.linspace(0.0, 1.0, 16385)
    ratios = []
    for psi in ((t > 0.5).astype(float), np.sin(t)):
        sups = [sup(oscillatory_integral(psi, t, 2**k * (1 + 0.1j))) for k in range(3, 11)]
        ratios.append(sups[0] / sups[-1])
    worst = min(ratios)
    return worst >= 4.0, f"decrease factor k=3 -> k=10: step {ratios[0]:.1f}x, sin {ratios[1]:.1f}x (>= 4x)"


def criterion_9():
    worst = 0.0
    for name, lam, r in (("free", 5, 0), ("rho4", 5, 0), ("smooth", 30 + 3j, 0), ("smooth", 200 - 2j, 3),
                         ("delta", 40, 0), ("delta", 40 + 4j, 0)):
        fs = solve(load(name), lam, r)
        worst = max(worst, *fs.residuals.values())
    return worst <= 10 * TOL, f"max fixed-point residual = {worst:.2e} (<= {10 * TOL:.0e})"


CRITERIA = {
    1: ("free-equation exactness", criterion_1, 1.0),
    2: ("Wronskian invariance", criterion_2, 10.0),
    3: ("oracle equivalence, smooth", criterion_3, 30.0),
    4: ("oracle equivalence, distributional", criterion_4, 10.0),
    5: ("remainder decay", criterion_5, 120.0),
    6: ("half-plane consistency", criterion_6, 10.0),
    7: ("a-priori bound", criterion_7, 10.0),
    8: ("Riemann-Lebesgue", criterion_8, 5.0),
    9: ("fixed-point residual", criterion_9, 10.0),
}


def run(number):
    title, fn, limit = CRITERIA[number]
    t0 = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - t0
    ok = bool(ok) and elapsed < limit
    line = f"criterion {number} ({title}): {'PASS' if ok else 'FAIL'}  {detail}; {elapsed:.2f} s (< {limit:g} s)"
    return ok, line


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    ok, line = run(number)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [run(n) for n in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)

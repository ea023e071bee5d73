import math

import numpy as np
import pytest

from conftest import SMOOTH, expr, sup
from singular_sl import (HalfPlaneError, IterationConfig, NormalizationError, fundamental_system, make_coefficients,
                         remainder_sweep, solve, solve_lower_halfplane)
from singular_sl.oracle import adaptive_reference, transfer_matrix_delta
from singular_sl.solutions import branch_symmetry_defect, geometric_sequence


def test_free_branches_exact(free):
    fs = fundamental_system(free, 5.0)
    x = fs.x_grid
    assert sup(fs.plus.y - np.exp(5j * x)) < 1e-12
    assert sup(fs.plus.y_quasi - 5j * np.exp(5j * x)) < 1e-11
    assert sup(fs.minus.y - np.exp(-5j * x)) < 1e-12
    for b in (fs.plus, fs.minus):
        assert sup(b.phi) < 1e-14 and sup(b.psi) < 1e-14
    assert np.allclose(fs.wronskian, -10j, atol=1e-12)
    assert fs.wronskian_defect() < 1e-12


def test_constant_rho_leading_term(rho4):
    fs = fundamental_system(rho4, 5.0)
    x = fs.x_grid
    assert sup(fs.plus.y - 2**-0.5 * np.exp(10j * x)) < 1e-12
    assert sup(fs.minus.y - 2**-0.5 * np.exp(-10j * x)) < 1e-12
    assert sup(fs.plus.phi) < 1e-12 and sup(fs.minus.psi) < 1e-12


def test_delta_branch(delta):
    fs = fundamental_system(delta, 40.0)
    ref = transfer_matrix_delta(2.0, 0.5, 40.0, (0, 1), "plus", x=fs.x_grid, right=fs.ts.lmap.right)
    assert sup(fs.plus.y - ref.y) <= 1e-6
    assert sup(fs.plus.phi) <= 0.1
    assert abs(fs.wronskian[0]) > 0
    assert fs.wronskian_defect() <= 1e-6


def test_smooth_system(smooth):
    fs = fundamental_system(smooth, 30 + 3j)
    assert fs.wronskian_defect() <= 1e-6
    for b in ("plus", "minus"):
        br = fs.branch(b)
        ref = adaptive_reference(smooth, 30 + 3j, b, tol=1e-12, t_eval=fs.t_grid[::32])
        assert sup(br.y[::32] - ref.y) <= 1e-6
        assert sup(br.y_quasi[::32] - ref.y_quasi) <= 1e-6


def test_definitional_identities(smooth):
    fs = fundamental_system(smooth, 50 + 1j)
    ts = fs.ts
    for br in (fs.plus, fs.minus):
        lead = br.leading(ts)
        s = br.sign
        assert sup(br.y - lead * (1 + br.phi)) <= 1e-12 * sup(br.y)
        lead_q = s * 1j * br.lam * ts.rho**0.25 * np.exp(0.5 * ts.P + s * 1j * br.lam * ts.t_grid)
        assert sup(br.y_quasi - lead_q * (1 + br.psi)) <= 1e-12 * sup(br.y_quasi)
        assert np.array_equal(br.y_quasi, np.sqrt(ts.rho) * br.y_quasi_t)
        assert np.all(np.isfinite(br.y)) and np.all(np.isfinite(br.y_quasi))


def test_fixed_point_residuals(smooth, delta):
    for cs, lam in ((smooth, 30 + 3j), (delta, 40 + 4j)):
        fs = fundamental_system(cs, lam)
        assert all(v <= 10 * 1e-10 for v in fs.residuals.values())
    fs = fundamental_system(smooth, 60, cfg=IterationConfig(extrapolate=False))
    assert all(v <= 1e-9 for v in fs.residuals.values())


def test_lower_relabel_free(free):
    low = solve_lower_halfplane(free, -5.0)
    up = fundamental_system(free, 5.0)
    assert np.array_equal(low.plus.y, up.minus.y)
    assert np.array_equal(low.minus.y, up.plus.y)
    assert low.halfplane == "lower" and low.plus.branch == "plus"


def test_overlap_free(free):
    lam = 5 - 2j
    up = fundamental_system(free, lam, r=3)
    low = solve_lower_halfplane(free, lam, r=3)
    assert sup(up.plus.y - low.plus.y) <= 1e-8
    assert sup(up.minus.y - low.minus.y) <= 1e-8


def test_lower_smooth_invariants(smooth):
    fs = solve_lower_halfplane(smooth, 20 - 1j, r=2)
    assert fs.wronskian_defect() <= 1e-6
    for br in (fs.plus, fs.minus):
        assert sup(br.y - br.leading(fs.ts) * (1 + br.phi)) <= 1e-12 * sup(br.y)


def test_halfplane_errors(free):
    with pytest.raises(HalfPlaneError):
        fundamental_system(free, 5 - 2j, r=1)
    with pytest.raises(HalfPlaneError):
        solve_lower_halfplane(free, 5 + 2j, r=1)
    with pytest.raises(HalfPlaneError):
        solve(free, 5, halfplane="left")
    assert solve(free, 5 - 2j, r=1).halfplane == "lower"


def test_normalization_underflow(free):
    with pytest.raises(NormalizationError):
        fundamental_system(free, 300j)


def test_branch_symmetry(smooth):
    lam = 40.0
    up = fundamental_system(smooth, lam)
    low = solve_lower_halfplane(smooth, lam)
    assert branch_symmetry_defect(up, low) <= 10 * 1e-10


def test_pure_wkb_constant_rho():
    for rho0 in (0.25, 3.0, 9.0):
        cs = make_coefficients((0, 1), rho=rho0)
        fs = fundamental_system(cs, 17.0)
        assert max(sup(fs.plus.phi), sup(fs.minus.phi)) < 1e-12


def test_pure_wkb_variable_rho_decays():
    cs = make_coefficients((0, 1), rho=expr("exponential"), rho_prime=expr("exponential"))
    sups = [sup(fundamental_system(cs, lam).plus.phi) for lam in (25, 50, 100)]
    assert sups[1] <= 0.6 * sups[0] and sups[2] <= 0.6 * sups[1]


def test_sweep_free(free):
    rep = remainder_sweep(free, [5, 10, 20])
    assert all(v == 0 for col in rep.columns().values() for v in col)
    assert rep.ok


def test_sweep_delta(delta):
    lams = geometric_sequence(25, 2, 6)
    assert lams[-1] == 800
    rep = remainder_sweep(delta, lams, jobs=3)
    vals = rep.sup_phi_plus
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] <= 0.05 and rep.ok


def test_sweep_smooth_guard(smooth):
    lams = [s * (1 + 0.05j) for s in (25, 50, 100, 200, 400, 800)]
    rep = remainder_sweep(smooth, lams, r=50)
    assert max(v.imag for v in lams) == pytest.approx(40)
    assert rep.ok and rep.halfplanes == ["upper"] * 6


def test_sweep_order_checked(free):
    with pytest.raises(ValueError):
        remainder_sweep(free, [10, 5])
    with pytest.raises(ValueError):
        geometric_sequence(1, 1.0, 3)


def test_backends_give_same_system(smooth):
    a = fundamental_system(smooth, 70 + 2j, backend="python")
    b = fundamental_system(smooth, 70 + 2j)
    assert sup(a.plus.y - b.plus.y) < 1e-10 and sup(a.minus.y_quasi - b.minus.y_quasi) < 1e-8
    assert math.isfinite(a.wronskian_defect())

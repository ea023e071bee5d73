import json

import numpy as np
import pytest

from conftest import GOLDEN, SPECS
from singular_sl.cli import branch_columns, exit_code_for, main, parse_complex, parse_sweep
from singular_sl import HalfPlaneError, NoConvergence, SpecError
from singular_sl.oracle import read_golden, sup_difference


def read_csv(path):
    lines = path.read_text().splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    header = body[0].split(",")
    rows = [ln.split(",") for ln in body[1:]]
    return comments, header, rows


def numeric(header, rows, name):
    i = header.index(name)
    return np.array([float(r[i]) for r in rows])


def test_solve_free(tmp_path):
    out = tmp_path / "free.csv"
    assert main(["solve", "--spec", str(SPECS / "free.json"), "--lambda", "5,0", "--out", str(out)]) == 0
    comments, header, rows = read_csv(out)
    assert comments[0] == "# singular-sl v1"
    assert header == branch_columns()
    for col in ("plus_re_phi", "plus_im_phi", "minus_re_psi", "minus_im_psi"):
        assert np.max(np.abs(numeric(header, rows, col))) <= 1e-8
    x = numeric(header, rows, "x")
    y = numeric(header, rows, "plus_re_y") + 1j * numeric(header, rows, "plus_im_y")
    assert np.max(np.abs(y - np.exp(5j * x))) < 1e-12
    diag = json.loads((tmp_path / "free.diagnostics.json").read_text())
    assert diag["config"]["tol"] == 1e-10


def test_mu_min_guard(capsys):
    code = main(["solve", "--spec", str(SPECS / "delta.json"), "--lambda", "0.5,0"])
    assert code == 4
    rec = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert rec["guard"] == "mu_min" and rec["exit_code"] == 4


def test_solve_smooth_matches_golden(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["solve", "--spec", str(SPECS / "smooth.json"), "--lambda", "30,3", "--out", str(out)]) == 0
    _, header, rows = read_csv(out)
    x = numeric(header, rows, "x")
    for b in ("plus", "minus"):
        y = numeric(header, rows, f"{b}_re_y") + 1j * numeric(header, rows, f"{b}_im_y")
        q = numeric(header, rows, f"{b}_re_y_quasi") + 1j * numeric(header, rows, f"{b}_im_y_quasi")
        dy, dq = sup_difference(x, y, q, read_golden(GOLDEN / f"smooth_lambda30+3i_{b}.csv"))
        assert dy <= 1e-6 and dq <= 1e-6


def test_sweep_pass_and_deterministic(tmp_path):
    args = ["sweep", "--spec", str(SPECS / "delta.json"), "--sweep", "start=25,0", "factor=2", "count=5",
            "--no-timing", "--jobs", "2"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "--jobs", "1"]) == 0
    assert a.read_bytes() == b.read_bytes()
    comments, header, rows = read_csv(a)
    assert any(c.startswith("# decay PASS") for c in comments)
    assert all(r[header.index("status")] == "OK" for r in rows)
    assert np.all(numeric(header, rows, "wall_time") == 0)


def test_sweep_partial_failure(tmp_path, capsys):
    out = tmp_path / "p.csv"
    code = main(["sweep", "--spec", str(SPECS / "delta.json"), "--lambda", "0.5,0", "--lambda", "50,0",
                 "--lambda", "100,0", "--out", str(out)])
    assert code == 5
    _, header, rows = read_csv(out)
    status = [r[header.index("status")] for r in rows]
    assert status == ["FAILED(guard)", "OK", "OK"]
    summary = json.loads((tmp_path / "p.diagnostics.json").read_text())
    assert summary["failed_points"] == 1


def test_sweep_order_rejected():
    assert main(["sweep", "--spec", str(SPECS / "free.json"), "--lambda", "10,0", "--lambda", "5,0"]) == 2


def test_verify(tmp_path):
    out = tmp_path / "v.json"
    assert main(["verify", "--spec", str(SPECS / "free.json"), "--lambda", "5,0", "--format", "json",
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["ok"]
    assert all(c["defect"] <= 1e-10 for c in doc["checks"])
    assert main(["verify", "--spec", str(SPECS / "delta.json"), "--lambda", "40,0", "--out",
                 str(tmp_path / "d.csv")]) == 0


def test_verify_negative_control(tmp_path):
    out = tmp_path / "n.json"
    code = main(["verify", "--spec", str(SPECS / "rho_prime_mismatch.json"), "--lambda", "30,0", "--format", "json",
                 "--out", str(out)])
    assert code == 6
    doc = json.loads(out.read_text())
    failed = {c["invariant"] for c in doc["checks"] if not c["ok"]}
    assert failed & {"sigma_vs_h_x", "log_identity"}


def test_compare_oracle(tmp_path):
    for spec, lam in (("free.json", "5,0"), ("delta.json", "40,0"), ("smooth.json", "30,3")):
        out = tmp_path / (spec + ".json")
        assert main(["compare-oracle", "--spec", str(SPECS / spec), "--lambda", lam, "--format", "json",
                     "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["ok"] and len(doc["comparisons"]) == 2


def test_json_solve(tmp_path):
    out = tmp_path / "s.json"
    assert main(["solve", "--spec", str(SPECS / "rho4.json"), "--lambda", "5,0", "--format", "json",
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["columns"] == branch_columns()
    rows = np.array(doc["rows"])
    assert rows.shape == (2049, len(branch_columns()))
    assert np.allclose(rows[:, 2] + 1j * rows[:, 3], 2**-0.5 * np.exp(10j * rows[:, 0]), atol=1e-12)
    assert not (tmp_path / "s.diagnostics.json").exists()


def test_usage_errors(tmp_path):
    spec = str(SPECS / "free.json")
    assert main(["solve", "--spec", spec]) == 2
    assert main(["solve", "--spec", spec, "--lambda", "abc"]) == 2
    assert main(["solve", "--spec", spec, "--lambda", "5,0", "--r", "-1"]) == 2
    assert main(["bogus"]) == 2
    assert main(["solve", "--spec", str(tmp_path / "missing.json"), "--lambda", "5,0"]) == 2
    assert main(["solve", "--spec", spec, "--lambda", "5,-2", "--halfplane", "upper"]) == 4


def test_parsers():
    assert parse_complex("3,-1.5") == 3 - 1.5j
    assert parse_complex("2") == 2
    seq = parse_sweep(["start=10,0", "factor=2", "count=3", "direction=1,0.1"])
    assert len(seq) == 3 and seq[0] == pytest.approx(10 * (1 + 0.1j) / abs(1 + 0.1j))
    with pytest.raises(SpecError):
        parse_sweep(["start=1,0", "count=3"])
    assert exit_code_for(NoConvergence("x")) == 3
    assert exit_code_for(HalfPlaneError("x")) == 4

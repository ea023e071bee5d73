"""Regenerate the frozen reference tables in ``golden/``.

Run from the repository root:  python3 tests/data/make_golden.py
The tables are produced by the adaptive reference integrator alone (no part
of the Volterra solver is involved) at t = k h / 64, k = 0..64.
"""
from pathlib import Path

import numpy as np

from singular_sl import ingest_coefficients
from singular_sl.oracle import _geometry, adaptive_reference, write_golden

HERE = Path(__file__).parent
SMOOTH = HERE / "specs" / "smooth.json"


def main():
    cs = ingest_coefficients(SMOOTH)
    h, _ = _geometry(cs, 1e-13)
    t = h * np.arange(65) / 64
    for branch in ("plus", "minus"):
        sol = adaptive_reference(cs, 30 + 3j, branch, tol=1e-13, t_eval=t)
        write_golden(HERE / "golden" / f"smooth_lambda30+3i_{branch}.csv", sol, comment="lambda=30+3i upper")
        print(branch, sol.est_error)


if __name__ == "__main__":
    main()

from pathlib import Path

import numpy as np
import pytest

from singular_sl import ingest_coefficients, make_coefficients

DATA = Path(__file__).parent / "data"
SPECS = DATA / "specs"
GOLDEN = DATA / "golden"


def expr(name, **params):
    return {"kind": "expr", "name": name, "params": params}


SMOOTH = dict(p=expr("trig", func="sin"), u=expr("trig", func="cos", offset=-1.0), rho=expr("exponential"),
              rho_prime=expr("exponential"))


def delta_set(c=2.0, x0=0.5):
    return make_coefficients((0.0, 1.0), u=expr("step", x0=x0, height=c))


@pytest.fixture(scope="session")
def free():
    return ingest_coefficients(SPECS / "free.json")


@pytest.fixture(scope="session")
def rho4():
    return ingest_coefficients(SPECS / "rho4.json")


@pytest.fixture(scope="session")
def smooth():
    return ingest_coefficients(SPECS / "smooth.json")


@pytest.fixture(scope="session")
def delta():
    return ingest_coefficients(SPECS / "delta.json")


def sup(a):
    return float(np.max(np.abs(a)))

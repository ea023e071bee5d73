import numpy as np
import pytest

from singular_sl import kernels
from singular_sl import _pykernels as py

MUS = [1.0, 10j, 40 - 300j, -2 + 100j, 500 + 50j]

needs_compiled = pytest.mark.skipif(not kernels.compiled_available(), reason="extension not built")


def _setup(n=400, seed=0):
    rng = np.random.default_rng(seed)
    t = np.sort(np.concatenate([[0.0, 1.3], rng.uniform(0, 1.3, n - 2)]))
    psi = rng.normal(size=n) + 1j * rng.normal(size=n)
    return t, psi


def test_weights_series_matches_direct_formula():
    # just below the cutoff the series is used; the closed form is still accurate to ~1e-14 there
    dt = np.array([1.0])
    for phase in (0.0, 0.3, 1.7, 3.0):
        z = 0.0999 * np.exp(1j * phase)
        decay, w_far, w_near = kernels.filon_weights(dt, z)
        x = -z
        phi1 = (np.exp(x) - 1) / x
        phi2 = (np.exp(x) - 1 - x) / x**2
        assert abs(decay[0] - np.exp(-z)) < 1e-15
        assert abs(w_near[0] - phi2) < 1e-12
        assert abs(w_far[0] - (phi1 - phi2)) < 1e-12


def test_filon_exact_for_constant():
    t = np.linspace(0, 1, 11)
    d, wf, wn = kernels.filon_weights(np.diff(t), 2.0)
    out = py.sweep_forward(np.ones(11, dtype=complex), d, wf, wn)
    assert out[-1] == pytest.approx((1 - np.exp(-2.0)) / 2, abs=1e-15)


def test_filon_exact_for_linear():
    t = np.linspace(0, 2, 7)
    mu = 3 + 40j
    a = 2 * mu
    d, wf, wn = kernels.filon_weights(np.diff(t), a)
    out = py.sweep_forward((1 + 2j) * t, d, wf, wn)
    # int_0^T e^{-a(T-s)} s ds = T/a - (1 - e^{-aT})/a^2
    T = t
    expect = (1 + 2j) * (T / a - (1 - np.exp(-a * T)) / a**2)
    assert np.max(np.abs(out - expect)) < 1e-14


def test_blocked_recurrence_matches_loop():
    rng = np.random.default_rng(1)
    n = 3000
    decay = np.exp(-(rng.uniform(0, 2, n) + 1j * rng.uniform(-3, 3, n)))
    r = rng.normal(size=n) + 1j * rng.normal(size=n)
    out = py.linear_recurrence(decay, r)
    ref = np.zeros(n + 1, dtype=complex)
    for k in range(n):
        ref[k + 1] = decay[k] * ref[k] + r[k]
    assert np.max(np.abs(out - ref)) < 1e-10 * np.max(np.abs(ref))


@needs_compiled
@pytest.mark.parametrize("mu", MUS)
def test_backends_agree_on_sweeps(mu):
    c = kernels.get_backend("compiled")
    t, psi = _setup()
    d, wf, wn = kernels.filon_weights(np.diff(t), 2 * mu)
    for name in ("sweep_forward", "sweep_backward"):
        a, b = getattr(py, name)(psi, d, wf, wn), getattr(c, name)(psi, d, wf, wn)
        assert np.max(np.abs(a - b)) <= 1e-11 * max(1.0, np.max(np.abs(a)))


@needs_compiled
@pytest.mark.parametrize("name", ["picard_forward", "picard_backward"])
def test_backends_agree_on_picard(name):
    c = kernels.get_backend("compiled")
    t, _ = _setup(800, seed=2)
    x = np.linspace(0, 1, t.size)
    a, b, cc = np.exp(1j * x) * 0.3, np.cos(x) + 0j, 0.2 * x + 0.1j
    mu = 30 - 5j
    d, wf, wn = kernels.filon_weights(np.diff(t), 2 * mu)
    args = (a, b, cc, np.diff(t), d, wf, wn, 1e-12, 100)
    z1p, z2p, itp, _, okp = getattr(py, name)(*args)
    z1c, z2c, itc, _, okc = getattr(c, name)(*args)
    assert okp and okc and itp == itc
    assert np.max(np.abs(np.asarray(z1p) - z1c)) < 1e-11
    assert np.max(np.abs(np.asarray(z2p) - z2c)) < 1e-11


def test_backend_selection():
    assert kernels.get_backend("python") is py
    assert kernels.BACKEND in ("python", "compiled")
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")

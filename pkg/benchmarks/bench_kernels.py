"""Compare the compiled (Cython) and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times one Filon running-integral sweep and one full two-branch solve per
backend at several grid sizes, and checks the backends agree.
"""
import argparse
import timeit

import numpy as np

from singular_sl import fundamental_system, make_coefficients
from singular_sl.kernels import compiled_available, filon_weights, get_backend


def expr(name, **params):
    return {"kind": "expr", "name": name, "params": params}


def bench_sweep(backends, sizes, repeat):
    rng = np.random.default_rng(0)
    print(f"{'sweep_forward':<16}{'n':>9}" + "".join(f"{b:>14}" for b in backends) + f"{'speedup':>10}")
    for n in sizes:
        t = np.linspace(0.0, 1.0, n + 1)
        psi = rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1)
        decay, w_far, w_near = filon_weights(np.diff(t), 2.0 * (0.1 - 200j))
        times, outs = [], []
        for b in backends:
            mod = get_backend(b)
            outs.append(mod.sweep_forward(psi, decay, w_far, w_near))
            times.append(min(timeit.repeat(lambda: mod.sweep_forward(psi, decay, w_far, w_near),
                                           number=10, repeat=repeat)) / 10)
        if len(outs) == 2:
            assert np.max(np.abs(outs[0] - outs[1])) < 1e-10 * (1 + np.max(np.abs(outs[0])))
        print(_row("", n, times))


def bench_solve(backends, lambdas, repeat):
    cs = make_coefficients((0, 1), p=expr("trig", func="sin"), u=expr("trig", func="cos", offset=-1.0),
                           rho=expr("exponential"), rho_prime=expr("exponential"))
    print(f"{'solve |lambda|':<16}{'n':>9}" + "".join(f"{b:>14}" for b in backends) + f"{'speedup':>10}")
    for lam in lambdas:
        times, ys = [], []
        for b in backends:
            fs = fundamental_system(cs, lam, backend=b)
            ys.append(fs.plus.y)
            times.append(min(timeit.repeat(lambda: fundamental_system(cs, lam, backend=b), number=1, repeat=repeat)))
        if len(ys) == 2:
            assert np.max(np.abs(ys[0] - ys[1])) < 1e-9
        print(_row(f"{abs(lam):g}", fs.t_grid.size - 1, times))


def _row(label, n, times):
    cells = "".join(f"{1e3 * v:>12.3f}ms" for v in times)
    speed = f"{times[-1] / times[0]:>9.1f}x" if len(times) == 2 else ""
    return f"{label:<16}{n:>9}{cells}{speed}"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = ["compiled", "python"] if compiled_available() else ["python"]
    if len(backends) == 1:
        print("compiled extension not built; timing the numpy backend only")
    bench_sweep(backends, [2**10, 2**14, 2**18], args.repeat)
    print()
    bench_solve(backends, [30 + 3j, 200, 1000 + 10j], args.repeat)


if __name__ == "__main__":
    main()

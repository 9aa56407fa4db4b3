"""Time the numba kernels against the numpy fallback on identical inputs.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is called once untimed (numba compile or cache load), then timed as
the best of ``--repeat`` runs.  Outputs of the two backends are compared too.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from tailpwf.kernels import _numpy

try:
    from tailpwf.kernels import _numba
except ImportError:
    _numba = None

ALPHA, BETA, MU, DELTA = 60.0, -10.0, 0.0005, 0.012


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    x = rng.normal(0.0, 0.015, 200_000)
    edges = np.linspace(-0.2, 0.2, 2001)
    a, b = edges[:-1], edges[1:]
    returns = rng.standard_t(4, size=(1000, 30)) * 0.01
    weights = rng.dirichlet(np.ones(30), size=2000)
    return {
        "nig_logpdf (2e5 points)": lambda k: k.nig_logpdf(x, ALPHA, BETA, MU, DELTA),
        "nig_loglik_grad (2e5 points)": lambda k: k.nig_loglik_grad(x, ALPHA, BETA, MU, DELTA),
        "nig_integrate (2000 intervals)": lambda k: k.nig_integrate(a, b, ALPHA, BETA, MU, DELTA, 1e-13),
        "batch_cvar (2000 x 1000 x 30)": lambda k: k.batch_cvar(returns, weights, 0.99),
    }


def max_diff(u, v):
    """Largest elementwise difference, relative to the size of the reference."""
    if isinstance(u, tuple):
        return max(max_diff(p, q) for p, q in zip(u, v))
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    return float(np.max(np.abs(u - v)) / max(np.max(np.abs(u)), 1e-300))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':34s} {'numpy s':>10s} {'numba s':>10s} {'speedup':>8s} {'rel diff':>10s}")
    for name, call in cases(rng).items():
        t_np = best_of(lambda: call(_numpy), args.repeat)
        if _numba is None:
            print(f"{name:34s} {t_np:10.4f} {'n/a':>10s}")
            continue
        t_nb = best_of(lambda: call(_numba), args.repeat)
        diff = max_diff(call(_numpy), call(_numba))
        print(f"{name:34s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:7.1f}x {diff:10.1e}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Numba vs numpy timing for the hot kernels.

Both backends are called explicitly, so the COGSEC_DISABLE_NUMBA flag is not
needed here. Results are checked for agreement before timing is reported.
"""
import argparse
import sys
import time

import numpy as np

from cogsec._accel import HAVE_NUMBA
from cogsec.coding import gather_sum, typical_mask
from cogsec.instances import dirty_paper_mod2
from cogsec.kernels import batch_terms, pareto_mask
from cogsec.probability import random_conditional


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(scale):
    rng = np.random.default_rng(0)
    spec = dirty_paper_mod2(0.1)
    b = 2000 * scale
    px1 = rng.dirichlet(np.ones(2), size=b)
    cond = random_conditional(rng, (b, 2, 2), (1, 2, 2))
    yield "batch MI terms", f"{b} policies", lambda be: batch_terms(spec.state_pmf, spec.kernel, px1, cond, backend=be)

    pts = rng.random((5000 * scale, 3))
    yield "pareto filter", f"{len(pts)} points", lambda be: pareto_mask(pts, backend=be)

    codes = rng.integers(0, 8, size=(100_000 * scale, 12))
    pref = np.full(8, 1 / 8)
    yield "typicality", f"{len(codes)} rows", lambda be: typical_mask(codes, pref, 0.1, backend=be)

    table = rng.normal(size=(8, 2))
    y = rng.integers(0, 2, size=12)
    yield "log-likelihood", f"{len(codes)} rows", lambda be: gather_sum(table, codes, y, backend=be)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=int, default=1, help="multiply problem sizes")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not importable; only the numpy path can run")
        return 1

    print(f"{'kernel':<16} {'size':>16} {'numpy (ms)':>11} {'numba (ms)':>11} {'speedup':>8}  agree")
    print("-" * 72)
    for name, size, fn in cases(args.scale):
        fn("numba")  # compile outside the timed region
        t_np, a = best_of(lambda: fn("numpy"), args.repeat)
        t_nb, b = best_of(lambda: fn("numba"), args.repeat)
        agree = np.array_equal(a, b) if a.dtype == bool else bool(np.max(np.abs(a - b)) <= 1e-12)
        print(f"{name:<16} {size:>16} {t_np * 1e3:>11.2f} {t_nb * 1e3:>11.2f} {t_np / t_nb:>7.1f}x  {'yes' if agree else 'NO'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Acceptance criteria, one test per criterion.

Each test records a single ``criterion N [PASS|FAIL]`` line; the lines are
repeated in the pytest terminal summary (see conftest.py). Run directly with
``python3 tests/test_acceptance.py`` to print the lines without pytest.
"""
import itertools
import json
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import random_policy, random_spec  # noqa: E402
from cogsec.bounds import inner_bound_point  # noqa: E402
from cogsec.channel import AuxiliaryPolicy, build_joint, independence_check, serialize_channel_spec  # noqa: E402
from cogsec.coding import CodebookParams, generate_codebook, nearly_equal, partition_g, run_trials  # noqa: E402
from cogsec.instances import (  # noqa: E402
    bsc_pair,
    dirty_paper_mod2,
    mod2_state_only,
    uniform_split_policy,
    wiretap,
    xor_interference,
)
from cogsec.probability import (  # noqa: E402
    JointDistribution,
    csiszar_sum_check,
    entropy,
    mutual_information,
    random_pmf,
)
from cogsec.search import SearchConfig, hull_contains, search_outer, search_region, simplex_grid  # noqa: E402

# frozen closed forms, computed independently of the package
H_025 = 0.8112781244591328  # h(0.25)
ONE_MINUS_H_01 = 0.5310044064107188  # 1 - h(0.1)

RESULTS: list[str] = []
EVALUATED: list[np.ndarray] = []  # every rate triple produced during acceptance runs


def record(num, title, ok, detail):
    line = f"criterion {num:>2} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    RESULTS.append(line)
    print(line, flush=True)
    return ok


def _bsc_joint(flip):
    m = np.array([[1 - flip, flip], [flip, 1 - flip]]) / 2
    return JointDistribution(("X", "Y"), m)


def test_criterion_01_information_measures():
    t0 = time.perf_counter()
    h = entropy(_bsc_joint(0.25), "X") - mutual_information(_bsc_joint(0.25), "X", "Y")
    # H(X) - I(X;Y) = H(X|Y) = h(0.25) for a uniform input
    c = mutual_information(_bsc_joint(0.1), "X", "Y")
    err_closed = max(abs(h - H_025), abs(c - ONE_MINUS_H_01))
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        j = JointDistribution(("A", "B", "C"), random_pmf(rng, (2, 3, 2)))
        e = lambda *v: entropy(j, v)
        chain = mutual_information(j, "A", ["B", "C"]) - (
            mutual_information(j, "A", "B") + (e("A", "B") + e("B", "C") - e("A", "B", "C") - e("B"))
        )
        sym = mutual_information(j, "A", ["B", "C"]) - mutual_information(j, ["B", "C"], "A")
        worst = max(worst, abs(chain), abs(sym))
    dt = time.perf_counter() - t0
    ok = err_closed <= 1e-6 and worst <= 1e-12 and dt < 5
    assert record(1, "information measures", ok,
                  f"closed-form err {err_closed:.2e} (tol 1e-6), chain/symmetry err {worst:.2e} (tol 1e-12), {dt:.1f}s")


def test_criterion_02_csiszar_identity():
    t0 = time.perf_counter()
    worst = 0.0
    names = [f"y1_{i}" for i in (1, 2, 3)] + [f"y2_{i}" for i in (1, 2, 3)]
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        worst = max(worst, csiszar_sum_check(JointDistribution(names, random_pmf(rng, (2,) * 6))))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and dt < 30
    assert record(2, "sum identity", ok, f"max residual {worst:.2e} over 50 joints (tol 1e-9), {dt:.1f}s")


def test_criterion_03_factorization():
    t0 = time.perf_counter()
    worst, indep = 0.0, True
    rng = np.random.default_rng(3)
    for _ in range(20):
        spec = random_spec(rng, ns=int(rng.integers(1, 4)))
        pol = random_policy(rng, spec, nu=int(rng.integers(1, 4)), nv=int(rng.integers(1, 4)))
        j = build_joint(spec, pol)
        indep &= independence_check(j)
        worst = max(
            worst,
            abs(j.mass.sum() - 1),
            np.max(np.abs(j.marginal_array(["S"]) - spec.state_pmf)),
            np.max(np.abs(j.marginal_array(["X1"]) - pol.px1)),
        )
    dt = time.perf_counter() - t0
    ok = indep and worst <= 1e-12 and dt < 10
    assert record(3, "factorization", ok, f"independence {'ok' if indep else 'broken'}, marginal err {worst:.2e}, {dt:.1f}s")


def test_criterion_04_wiretap():
    t0 = time.perf_counter()
    spec = wiretap(0.25)
    point = inner_bound_point(build_joint(spec, uniform_split_policy(spec)))
    region = search_region(spec, SearchConfig(n_u=1, n_v=2, sampler="grid", grid=5, refine=0), keep_all=True)
    EVALUATED.append(region.points)
    best = float(region.points[:, 2].max())
    dt = time.perf_counter() - t0
    ok = abs(point.re2 - H_025) <= 1e-6 and best >= H_025 - 0.02 and dt < 120
    assert record(4, "wiretap reduction", ok,
                  f"re2 at V=X2 {point.re2:.9f} (target {H_025:.6f}), grid-5 best re2 {best:.6f} "
                  f"(need >= {H_025 - 0.02:.6f}), {dt:.1f}s")


def _brute_r1(spec, res):
    """Best r1 over the |U|=|V|=1 grid, one policy at a time through build_joint."""
    g = simplex_grid(spec.n_x2, res)
    best = 0.0
    for px1 in simplex_grid(spec.n_x1, res):
        for rows in itertools.product(range(len(g)), repeat=spec.n_s * spec.n_x1):
            cond = g[list(rows)].reshape(spec.n_s, spec.n_x1, 1, 1, spec.n_x2)
            best = max(best, inner_bound_point(build_joint(spec, AuxiliaryPolicy(px1, cond))).r1)
    return best


def test_criterion_05_state_cancellation():
    t0 = time.perf_counter()
    spec = dirty_paper_mod2(0.0)
    oracle = _brute_r1(spec, 5)
    region = search_region(spec, SearchConfig(n_u=1, n_v=1, sampler="grid", grid=5, refine=0), keep_all=True)
    EVALUATED.append(region.points)
    found = float(region.points[:, 0].max())
    literal = search_region(mod2_state_only(), SearchConfig(n_u=1, n_v=1, sampler="grid", grid=5, refine=0))
    dt = time.perf_counter() - t0
    ok = oracle >= 0.98 and found >= 0.98 and abs(found - oracle) <= 1e-12 and dt < 300
    assert record(5, "state cancellation", ok,
                  f"brute-force oracle r1 {oracle:.9f}, grid search r1 {found:.9f} (need >= 0.98); "
                  f"primary link without X2 reaches r1 {float(literal.hull[:, 0].max()):.2e}, {dt:.1f}s")


CONTAINMENT = {
    "bsc pair": lambda: bsc_pair(0.1, 0.2),
    "xor interference": lambda: xor_interference(0.1),
    "mod-2 state": lambda: dirty_paper_mod2(0.1),
}


def test_criterion_06_containment():
    t0 = time.perf_counter()
    cfg = SearchConfig(n_u=1, n_v=2, sampler="grid", grid=5, refine=0)
    parts, ok = [], True
    for name, make in CONTAINMENT.items():
        spec = make()
        inner = search_region(spec, cfg)
        outer = search_outer(spec, cfg)
        EVALUATED.extend([inner.points, outer.points])
        bad = [v for v in inner.hull if not hull_contains(outer.hull, np.maximum(v - 0.05, 0.0))]
        gap = 0.0
        for v in bad:
            # smallest uniform inflation that admits v
            lo, hi = 0.05, float(v.max())
            for _ in range(40):
                mid = (lo + hi) / 2
                lo, hi = (lo, mid) if hull_contains(outer.hull, np.maximum(v - mid, 0.0)) else (mid, hi)
            gap = max(gap, hi)
        ok &= not bad
        parts.append(f"{name} |S|={spec.n_s}: {len(bad)} of {len(inner.hull)} vertices outside"
                     + (f" (needs slack {gap:.3f})" if bad else ""))
    dt = time.perf_counter() - t0
    ok &= dt < 600
    assert record(6, "inner within outer + 0.05", ok, "; ".join(parts) + f", {dt:.1f}s")


def test_criterion_07_triple_invariants():
    # the search asserts these on every evaluated batch; recheck everything kept
    pts = np.vstack(EVALUATED) if EVALUATED else np.zeros((0, 3))
    ok = bool(len(pts)) and bool(np.all(pts >= 0)) and bool(np.all(pts[:, 2] <= pts[:, 1]))
    assert record(7, "rate-triple invariants", ok, f"{len(pts)} stored triples rechecked exactly")


WIRETAP_SIM = dict(n=12, eps=0.05, seed=0, slack=2 / 12, max_codewords=2**20)


def test_criterion_08_codebook_structure():
    t0 = time.perf_counter()
    pairs_ok = all(
        nearly_equal(partition_g(B, C)) and sum(partition_g(B, C)) == B
        for B in range(1, 65)
        for C in range(1, B + 1)
    )
    spec = wiretap(0.25)
    books = []
    for r2, fibers in ((0.7, 1), (0.5, 3), (0.3, 5)):
        p = CodebookParams.from_policy(spec, uniform_split_policy(spec), r1=0.0, r2=r2, fibers=fibers, **WIRETAP_SIM)
        books.append(generate_codebook(p).structure_ok())
    dt = time.perf_counter() - t0
    ok = pairs_ok and all(books) and dt < 10
    assert record(8, "codebook structure", ok,
                  f"partition check over B<=64 {'ok' if pairs_ok else 'broken'}, "
                  f"{sum(books)}/{len(books)} codebooks satisfy the counting identity, {dt:.1f}s")


def test_criterion_09_coding_behavior():
    t0 = time.perf_counter()
    spec = wiretap(0.25)
    pol = uniform_split_policy(spec)
    point = inner_bound_point(build_joint(spec, pol))
    reps = {}
    for frac in (0.7, 1.3):
        p = CodebookParams.from_policy(spec, pol, r1=frac * point.r1, r2=frac * point.r2, **WIRETAP_SIM)
        reps[frac] = (p, run_trials(spec, p, 1000))
    dt = time.perf_counter() - t0
    lo = H_025 - 0.15
    pe_ok = reps[0.7][1].pe2 < reps[1.3][1].pe2
    eq_ok = all(lo <= r.eq_rate <= p.realized_r2 for p, r in reps.values())
    ok = pe_ok and eq_ok and dt < 300
    detail = ", ".join(
        f"{int(f * 100)}%: R2 {p.realized_r2:.4f} Pe2 {r.pe2:.3f} eq {r.eq_rate:.4f}" for f, (p, r) in reps.items()
    )
    assert record(9, "coding behavior", ok, f"{detail}; window [{lo:.4f}, R2], {dt:.1f}s")


def test_criterion_10_determinism(tmp_path):
    from cogsec.cli import main

    t0 = time.perf_counter()
    spec_path = tmp_path / "wiretap.json"
    spec_path.write_text(serialize_channel_spec(wiretap(0.25)))
    outs = []
    for run in ("a", "b"):
        d = tmp_path / run
        rc1 = main(["search", str(spec_path), "--u-size", "2", "--v-size", "2", "--samples", "64",
                    "--seed", "7", "--workers", "1", "--out", str(d / "region")])
        rc2 = main(["simulate", str(spec_path), "--n", "12", "--r1", "0", "--r2", "0.5", "--trials", "100",
                    "--seed", "7", "--slack", "0.1", "--log", "--out", str(d / "sim")])
        assert rc1 == rc2 == 0
        outs.append({f.name: f.read_bytes() for f in sorted(d.iterdir())})
    same = outs[0] == outs[1] and len(outs[0]) == 6
    digest = json.loads(outs[0]["sim.json"])["manifest"][:12]
    dt = time.perf_counter() - t0
    assert record(10, "determinism", same, f"{len(outs[0])} output files byte-identical across runs "
                  f"(simulate manifest {digest}), {dt:.1f}s")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))

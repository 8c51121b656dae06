"""Policy sampling, bound evaluation over policy streams, and downward-closed hulls.

Policy identifiers are short strings that regenerate the policy from
``(spec, config)`` alone:

* ``g<n>``  n-th point of the exhaustive simplex grid
* ``c<n>``  n-th point of the coarse grid over the embedded family
  (U constant, V = X2) used by the hybrid sampler
* ``d<n>``  n-th Dirichlet(1) draw, seeded by ``(seed, n)``
* ``<id>.<k>+`` / ``<id>.<k>-``  refinement step scaling flat
  coordinate ``k`` of the parent policy by ``1 +/- step``
"""
from __future__ import annotations

import csv
import io
import json
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Iterator

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from .bounds import inner_from_terms, outer_from_terms
from .channel import AuxiliaryPolicy, ChannelSpec, default_aux_sizes, validate_channel
from .errors import ConsistencyError, DomainError, ResourceError
from .kernels import batch_terms, pareto_mask
from .probability import check_cells

SAMPLERS = ("grid", "dirichlet", "hybrid")
HULL_TOL = 1e-9
DEFAULT_MAX_POLICIES = 2 * 10**7


@dataclass(frozen=True)
class SearchConfig:
    n_u: int | None = None
    n_v: int | None = None
    sampler: str = "hybrid"
    grid: int = 3
    samples: int = 256
    refine: int = 3
    refine_top: int = 4
    refine_step: float = 0.1
    seed: int = 0
    batch: int = 4096
    max_policies: int = DEFAULT_MAX_POLICIES
    workers: int = 1

    def __post_init__(self):
        if self.sampler not in SAMPLERS:
            raise DomainError(f"sampler must be one of {SAMPLERS}, got {self.sampler!r}")
        if self.grid < 2:
            raise DomainError("grid resolution must be >= 2")
        if self.samples < 1:
            raise DomainError("sample count must be >= 1")
        if self.refine < 0 or self.refine_top < 0:
            raise DomainError("refinement settings must be nonnegative")
        if not 0 < self.refine_step < 1:
            raise DomainError("refine_step must lie in (0, 1)")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")

    def resolved(self, spec: ChannelSpec) -> "SearchConfig":
        du, dv = default_aux_sizes(spec)
        return SearchConfig(**{**asdict(self), "n_u": self.n_u or du, "n_v": self.n_v or dv})


# --- simplex grids ----------------------------------------------------------


@lru_cache(maxsize=64)
def simplex_grid(k: int, resolution: int) -> np.ndarray:
    """All pmfs on k points with coordinates in multiples of 1/(resolution-1).

    Rows are in lexicographic order of the integer compositions.
    """
    m = resolution - 1
    rows = []

    def rec(prefix, left, slots):
        if slots == 1:
            rows.append(prefix + [left])
            return
        for i in range(left, -1, -1):
            rec(prefix + [i], left - i, slots - 1)

    rec([], m, k)
    out = np.array(rows, dtype=np.float64) / m
    out.setflags(write=False)
    return out


def simplex_grid_count(k: int, resolution: int) -> int:
    return math.comb(resolution - 1 + k - 1, k - 1)


class _Layout:
    """Flat parameter layout: px1 followed by one cond slice per (s, x1)."""

    def __init__(self, spec: ChannelSpec, n_u: int, n_v: int):
        self.ns, self.nx1, self.nx2 = spec.n_s, spec.n_x1, spec.n_x2
        self.nu, self.nv = n_u, n_v
        self.slice = n_u * n_v * self.nx2
        self.nslices = self.ns * self.nx1
        self.size = self.nx1 + self.nslices * self.slice

    def cond_shape(self):
        return (self.ns, self.nx1, self.nu, self.nv, self.nx2)

    def flatten(self, px1, cond):
        return np.concatenate([np.asarray(px1).ravel(), np.asarray(cond).ravel()])

    def unflatten(self, flat):
        flat = np.asarray(flat)
        return flat[..., : self.nx1], flat[..., self.nx1:].reshape(flat.shape[:-1] + self.cond_shape())

    def slice_of(self, k):
        """(start, stop) of the simplex that flat coordinate k belongs to."""
        if k < self.nx1:
            return 0, self.nx1
        j = (k - self.nx1) // self.slice
        start = self.nx1 + j * self.slice
        return start, start + self.slice


def _mixed_radix(idx, radices):
    idx = np.asarray(idx, dtype=np.int64)
    digits = []
    for r in reversed(radices):
        digits.append(idx % r)
        idx = idx // r
    return digits[::-1]


def _grid_batch(layout: _Layout, resolution: int, idx):
    g1 = simplex_grid(layout.nx1, resolution)
    gs = simplex_grid(layout.slice, resolution)
    digits = _mixed_radix(idx, [len(g1)] + [len(gs)] * layout.nslices)
    px1 = g1[digits[0]]
    cond = np.stack([gs[d] for d in digits[1:]], axis=1).reshape((len(idx),) + layout.cond_shape())
    return px1, cond


def _grid_count(layout: _Layout, resolution: int) -> int:
    return simplex_grid_count(layout.nx1, resolution) * simplex_grid_count(layout.slice, resolution) ** layout.nslices


def _coarse_batch(layout: _Layout, resolution: int, idx):
    g1 = simplex_grid(layout.nx1, resolution)
    gs = simplex_grid(layout.nx2, resolution)
    digits = _mixed_radix(idx, [len(g1)] + [len(gs)] * layout.nslices)
    n = len(idx)
    px1 = g1[digits[0]]
    q = np.stack([gs[d] for d in digits[1:]], axis=1).reshape(n, layout.ns, layout.nx1, layout.nx2)
    cond = np.zeros((n,) + layout.cond_shape())
    for x in range(layout.nx2):
        cond[:, :, :, 0, x, x] = q[..., x]
    return px1, cond


def _coarse_count(layout: _Layout, resolution: int) -> int:
    if layout.nv < layout.nx2:
        return 0
    return simplex_grid_count(layout.nx1, resolution) * simplex_grid_count(layout.nx2, resolution) ** layout.nslices


def _dirichlet_one(layout: _Layout, seed: int, n: int):
    rng = np.random.default_rng([int(seed), int(n)])
    px1 = rng.dirichlet(np.ones(layout.nx1))
    cond = rng.dirichlet(np.ones(layout.slice), size=layout.nslices).reshape(layout.cond_shape())
    return px1, cond


def _dirichlet_batch(layout: _Layout, seed: int, idx):
    pairs = [_dirichlet_one(layout, seed, n) for n in idx]
    return np.stack([p for p, _ in pairs]), np.stack([c for _, c in pairs])


def _perturb(layout: _Layout, flat, k: int, sign: int, step: float):
    out = np.array(flat, dtype=np.float64)
    lo, hi = layout.slice_of(k)
    out[k] *= 1.0 + sign * step
    out[lo:hi] /= out[lo:hi].sum()
    return out


def _stream_plan(layout: _Layout, config: SearchConfig):
    """List of (prefix, count) blocks making up the sampled stream."""
    if config.sampler == "grid":
        count = _grid_count(layout, config.grid)
        if count > config.max_policies:
            raise ResourceError(f"exhaustive grid has {count} policies, above the cap of {config.max_policies}")
        return [("g", count)]
    plan = []
    if config.sampler == "hybrid":
        count = _coarse_count(layout, config.grid)
        if count > config.max_policies:
            raise ResourceError(f"coarse grid has {count} policies, above the cap of {config.max_policies}")
        if count:
            plan.append(("c", count))
    plan.append(("d", config.samples))
    return plan


def _batch_for(layout, config, prefix, idx):
    if prefix == "g":
        return _grid_batch(layout, config.grid, idx)
    if prefix == "c":
        return _coarse_batch(layout, config.grid, idx)
    return _dirichlet_batch(layout, config.seed, idx)


def _check_sizes(spec: ChannelSpec, config: SearchConfig):
    bad = validate_channel(spec)
    if bad:
        raise DomainError("invalid channel: " + "; ".join(bad[:5]))
    check_cells((spec.n_s, config.n_u, config.n_v, spec.n_x1, spec.n_x2, spec.n_y1, spec.n_y2))


def policy_batches(spec: ChannelSpec, config: SearchConfig) -> Iterator[tuple[list[str], np.ndarray, np.ndarray]]:
    """Yield ``(ids, px1, cond)`` batches of the deterministic policy stream."""
    config = config.resolved(spec)
    _check_sizes(spec, config)
    layout = _Layout(spec, config.n_u, config.n_v)
    for prefix, count in _stream_plan(layout, config):
        for lo in range(0, count, config.batch):
            idx = np.arange(lo, min(count, lo + config.batch))
            px1, cond = _batch_for(layout, config, prefix, idx)
            yield [f"{prefix}{i}" for i in idx], px1, cond


def sample_policies(spec: ChannelSpec, config: SearchConfig) -> Iterator[AuxiliaryPolicy]:
    """The sampled policy stream, one :class:`AuxiliaryPolicy` at a time."""
    for _, px1, cond in policy_batches(spec, config):
        for a, c in zip(px1, cond):
            yield AuxiliaryPolicy(a, c)


_ID = re.compile(r"^([gcd])(\d+)((?:\.\d+[+-])*)$")


def policy_from_id(spec: ChannelSpec, config: SearchConfig, pid: str) -> AuxiliaryPolicy:
    """Regenerate the policy named by ``pid`` under ``(spec, config)``."""
    config = config.resolved(spec)
    layout = _Layout(spec, config.n_u, config.n_v)
    m = _ID.match(pid)
    if not m:
        raise DomainError(f"malformed policy id {pid!r}")
    prefix, n, steps = m.group(1), int(m.group(2)), m.group(3)
    px1, cond = _batch_for(layout, config, prefix, np.array([n]))
    flat = layout.flatten(px1[0], cond[0])
    for k, sign in re.findall(r"\.(\d+)([+-])", steps):
        flat = _perturb(layout, flat, int(k), 1 if sign == "+" else -1, config.refine_step)
    a, c = layout.unflatten(flat)
    return AuxiliaryPolicy(a, c)


# --- hull -------------------------------------------------------------------


def _shadows(points):
    """Each point with every subset of coordinates zeroed (8 per point)."""
    masks = np.array([[(m >> i) & 1 for i in range(3)] for m in range(8)], dtype=np.float64)
    return (points[:, None, :] * masks[None, :, :]).reshape(-1, 3)


def hull_contains(vertices, point, tol: float = HULL_TOL) -> bool:
    """LP membership of ``point`` in the downward-closed hull of ``vertices``."""
    v = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    p = np.maximum(np.asarray(point, dtype=np.float64), 0.0) - tol
    if v.shape[0] == 0:
        return bool(np.all(p <= 0))
    if np.any(np.all(v >= p, axis=1)):
        return True
    if np.any(p > v.max(axis=0)):
        return False
    res = linprog(
        np.zeros(v.shape[0]),
        A_ub=-v.T,
        b_ub=-p,
        A_eq=np.ones((1, v.shape[0])),
        b_eq=[1.0],
        bounds=(0, None),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    return res.status == 0


def downward_hull(points, tol: float = HULL_TOL) -> np.ndarray:
    """Vertices of the convex hull of the points' downward shadows.

    Returns the origin followed by the Pareto-maximal extreme points in
    lexicographic order. Empty input gives just the origin.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if np.any(pts < -tol):
        raise DomainError("rate triples must be nonnegative")
    pts = np.maximum(pts, 0.0)
    pts = pts[np.any(pts > tol, axis=1)]
    origin = np.zeros((1, 3))
    if pts.shape[0] == 0:
        return origin
    cand = pts[pareto_mask(pts, tol)]
    if cand.shape[0] > 4:
        try:
            allpts = np.vstack([cand, _shadows(cand)])
            hull = ConvexHull(allpts)
            # a shadow can coincide with its own point, so match vertices by coordinates
            vpts = allpts[hull.vertices]
            near = np.all(np.abs(cand[:, None, :] - vpts[None, :, :]) <= tol, axis=2).any(axis=1)
            cand = cand[near]
        except QhullError:
            pass
    # drop candidates inside the hull of the others, largest sum first kept
    order = np.lexsort((cand[:, 2], cand[:, 1], cand[:, 0], -cand.sum(axis=1)))
    cand = cand[order]
    keep = np.ones(cand.shape[0], dtype=bool)
    for i in range(cand.shape[0] - 1, -1, -1):
        others = cand[keep & (np.arange(cand.shape[0]) != i)]
        if others.shape[0] and hull_contains(others, cand[i], tol):
            keep[i] = False
    cand = cand[keep]
    cand = cand[np.lexsort((cand[:, 2], cand[:, 1], cand[:, 0]))]
    return np.vstack([origin, cand])


# --- search -----------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def _round12(x):
    return float(_fmt(x))


@dataclass
class RegionSample:
    bound: str
    points: np.ndarray
    ids: list[str]
    hull: np.ndarray
    config: SearchConfig
    evaluated: int = 0
    meta: dict = field(default_factory=dict)

    def contains(self, point, tol: float = HULL_TOL) -> bool:
        return hull_contains(self.hull, point, tol)

    def best(self, axis: int):
        i = int(np.argmax(self.points[:, axis]))
        return self.ids[i], self.points[i]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r1", "r2", "re2", "policy_id"])
        for p, pid in zip(self.points, self.ids):
            w.writerow([_fmt(p[0]), _fmt(p[1]), _fmt(p[2]), pid])
        return buf.getvalue()

    def sidecar(self) -> dict:
        return {
            "bound": self.bound,
            "config": asdict(self.config),
            "seed": int(self.config.seed),
            "evaluated": int(self.evaluated),
            "points": len(self.ids),
            "hull": [[_round12(x) for x in v] for v in self.hull],
            **self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.sidecar(), indent=2, sort_keys=True)


def _evaluate(spec, kind, px1, cond):
    t = batch_terms(spec.state_pmf, spec.kernel, px1, cond)
    tri = inner_from_terms(t) if kind == "inner" else outer_from_terms(t)
    # rate-triple invariants hold exactly after clamping; checked on every batch
    if tri.size and (tri.min() < 0.0 or np.any(tri[:, 2] > tri[:, 1])):
        raise ConsistencyError(f"{kind} bound produced a triple violating 0 <= re2 <= r2")
    return tri


def _eval_job(args):
    ps, kernel, kind, px1, cond = args
    return _evaluate(ChannelSpec(ps, kernel), kind, px1, cond)


def _significant(points, ids, tol):
    """Keep points not dominated by another point (hull can only use these)."""
    if len(ids) == 0:
        return points, ids
    mask = pareto_mask(points, tol)
    return points[mask], [i for i, m in zip(ids, mask) if m]


def _search(spec: ChannelSpec, config: SearchConfig, kind: str, keep_all: bool = False) -> RegionSample:
    config = config.resolved(spec)
    _check_sizes(spec, config)
    layout = _Layout(spec, config.n_u, config.n_v)
    pts_parts, id_parts = [], []
    evaluated = 0
    batches = policy_batches(spec, config)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            staged = [(ids, (spec.state_pmf, spec.kernel, kind, px1, cond)) for ids, px1, cond in batches]
            results = pool.map(_eval_job, [job for _, job in staged])
            for (ids, _), tri in zip(staged, results):
                evaluated += len(ids)
                p, i = (tri, ids) if keep_all else _significant(tri, ids, 0.0)
                pts_parts.append(p)
                id_parts.extend(i)
    else:
        for ids, px1, cond in batches:
            tri = _evaluate(spec, kind, px1, cond)
            evaluated += len(ids)
            p, i = (tri, ids) if keep_all else _significant(tri, ids, 0.0)
            pts_parts.append(p)
            id_parts.extend(i)
    points = np.vstack(pts_parts) if pts_parts else np.zeros((0, 3))
    ids = id_parts
    if not keep_all:
        points, ids = _significant(points, ids, 0.0)
    hull = downward_hull(points)

    refined = 0
    if config.refine and config.refine_top and len(ids):
        points, ids, hull, refined, extra = _refine(spec, config, layout, kind, points, ids, hull)
        evaluated += extra
    return RegionSample(kind, points, ids, hull, config, evaluated, {"refined_points": refined})


def _refine(spec, config, layout, kind, points, ids, hull):
    score = points.sum(axis=1)
    order = np.lexsort((np.arange(len(ids)), -score))
    bases = [ids[i] for i in order[: config.refine_top]]
    flats = {pid: layout.flatten(*_unpack(policy_from_id(spec, config, pid))) for pid in bases}
    points, ids = list(points), list(ids)
    accepted = evaluated = 0
    for _ in range(config.refine):
        new_bases = []
        for pid in bases:
            flat = flats[pid]
            cand_ids, cand = [], []
            for k in np.flatnonzero(flat > 0):
                for sign, ch in ((1, "+"), (-1, "-")):
                    cand_ids.append(f"{pid}.{k}{ch}")
                    cand.append(_perturb(layout, flat, int(k), sign, config.refine_step))
            if not cand:
                continue
            cand = np.array(cand)
            px1, cond = layout.unflatten(cand)
            tri = _evaluate(spec, kind, px1, cond)
            evaluated += len(cand_ids)
            best = None
            for j in np.argsort(-tri.sum(axis=1), kind="stable"):
                if not hull_contains(hull, tri[j]):
                    best = j
                    break
            if best is None:
                continue
            nid = cand_ids[best]
            flats[nid] = cand[best]
            points.append(tri[best])
            ids.append(nid)
            new_bases.append(nid)
            accepted += 1
            hull = downward_hull(np.array(points))
        if not new_bases:
            break
        bases = new_bases
    return np.array(points), ids, hull, accepted, evaluated


def _unpack(policy: AuxiliaryPolicy):
    return policy.px1, policy.cond


def search_region(spec: ChannelSpec, config: SearchConfig = SearchConfig(), keep_all: bool = False) -> RegionSample:
    """Inner-bound region traced over the sampled policies."""
    return _search(spec, config, "inner", keep_all)


def search_outer(spec: ChannelSpec, config: SearchConfig = SearchConfig(), keep_all: bool = False) -> RegionSample:
    """Outer-bound region traced over the same policy family."""
    return _search(spec, config, "outer", keep_all)

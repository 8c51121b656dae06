"""Hot loops, each with a numba kernel and a pure-numpy twin.

The public wrappers dispatch on :func:`cogsec._accel.use_numba`. Both
paths must agree to float round-off; ``tests/test_kernels.py`` checks this
and ``benchmarks/bench_kernels.py`` times them against each other.
"""
from __future__ import annotations

import math

import numpy as np

from ._accel import njit, use_numba
from .bounds import TERMS
from .channel import JOINT_NAMES
from .errors import ConsistencyError
from .probability import CLAMP_TOL, ZERO_MASS

# --- batch information terms -------------------------------------------------

_AXIS = {n: i for i, n in enumerate(JOINT_NAMES)}


def _term_plan():
    """Unique entropy subsets and, per term, (+/-) references into them."""
    subsets: list[tuple[int, ...]] = []

    def ref(names):
        key = tuple(sorted(_AXIS[n] for n in names))
        if key not in subsets:
            subsets.append(key)
        return subsets.index(key)

    plan = []
    for _, a, b, c in TERMS:
        if c:
            plan.append(((ref(a + c), ref(b + c)), (ref(a + b + c), ref(c))))
        else:
            plan.append(((ref(a), ref(b)), (ref(a + b),)))
    return subsets, plan


SUBSETS, PLAN = _term_plan()


def _subset_keys(cards):
    """keys[k, cell] = flat index of ``cell`` inside the marginal of subset k."""
    cards = tuple(int(c) for c in cards)
    grids = np.indices(cards).reshape(len(cards), -1)
    keys = np.zeros((len(SUBSETS), grids.shape[1]), dtype=np.int64)
    sizes = np.zeros(len(SUBSETS), dtype=np.int64)
    for k, sub in enumerate(SUBSETS):
        key = np.zeros(grids.shape[1], dtype=np.int64)
        for ax in sub:
            key = key * cards[ax] + grids[ax]
        keys[k] = key
        sizes[k] = math.prod(cards[ax] for ax in sub)
    return keys, sizes


@njit(cache=True)
def _entropies_nb(ps, px1, cond, kern, keys, sizes):
    nb = px1.shape[0]
    ns, nx1, nu, nv, nx2 = cond.shape[1], cond.shape[2], cond.shape[3], cond.shape[4], cond.shape[5]
    ny1, ny2 = kern.shape[3], kern.shape[4]
    ncell = ns * nu * nv * nx1 * nx2 * ny1 * ny2
    nsub = keys.shape[0]
    out = np.empty((nb, nsub))
    p = np.empty(ncell)
    buf = np.empty(sizes.max())
    inv_ln2 = 1.0 / np.log(2.0)
    for b in range(nb):
        c = 0
        for s in range(ns):
            for u in range(nu):
                for v in range(nv):
                    for a in range(nx1):
                        w = ps[s] * px1[b, a]
                        for x in range(nx2):
                            wc = w * cond[b, s, a, u, v, x]
                            for y in range(ny1):
                                for z in range(ny2):
                                    p[c] = wc * kern[s, a, x, y, z]
                                    c += 1
        for k in range(nsub):
            m = sizes[k]
            for i in range(m):
                buf[i] = 0.0
            for i in range(ncell):
                buf[keys[k, i]] += p[i]
            h = 0.0
            for i in range(m):
                q = buf[i]
                if q > 1e-15:
                    h -= q * np.log(q)
            out[b, k] = h * inv_ln2
    return out


def _entropies_np(ps, px1, cond, kern, keys, sizes, chunk_cells=1 << 22):
    nb = px1.shape[0]
    ncell = keys.shape[1]
    out = np.empty((nb, keys.shape[0]))
    step = max(1, chunk_cells // max(ncell, 1))
    for lo in range(0, nb, step):
        hi = min(nb, lo + step)
        p = np.einsum("s,ba,bsauvx,saxyz->bsuvaxyz", ps, px1[lo:hi], cond[lo:hi], kern, optimize=True)
        p = p.reshape(hi - lo, ncell)
        for k in range(keys.shape[0]):
            m = np.zeros((hi - lo, int(sizes[k])))
            # scatter-add along the cell axis; keys[k] is shared by every row
            np.add.at(m, (slice(None), keys[k]), p)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where(m > ZERO_MASS, m * np.log2(np.where(m > ZERO_MASS, m, 1.0)), 0.0)
            out[lo:hi, k] = -t.sum(axis=1)
    return out


def _terms_from_entropies(h):
    t = np.empty((h.shape[0], len(PLAN)))
    for j, (plus, minus) in enumerate(PLAN):
        t[:, j] = sum(h[:, i] for i in plus) - sum(h[:, i] for i in minus)
    low = t.min() if t.size else 0.0
    if low < -CLAMP_TOL:
        raise ConsistencyError(f"batch MI term evaluated to {low!r} < 0 beyond round-off")
    return np.maximum(t, 0.0)


def batch_terms(state_pmf, kernel, px1, cond, backend=None) -> np.ndarray:
    """MI terms (B, 9) for a batch of policies on one channel.

    ``px1`` has shape (B, |X1|) and ``cond`` (B, |S|, |X1|, |U|, |V|, |X2|).
    """
    ps = np.ascontiguousarray(state_pmf, dtype=np.float64)
    kern = np.ascontiguousarray(kernel, dtype=np.float64)
    px1 = np.ascontiguousarray(px1, dtype=np.float64)
    cond = np.ascontiguousarray(cond, dtype=np.float64)
    s, x1, u, v, x2 = cond.shape[1:]
    cards = (s, u, v, x1, x2, kern.shape[3], kern.shape[4])
    keys, sizes = _subset_keys(cards)
    if backend is None:
        backend = "numba" if use_numba() else "numpy"
    if backend == "numba":
        h = _entropies_nb(ps, px1, cond, kern, keys, sizes)
    else:
        h = _entropies_np(ps, px1, cond, kern, keys, sizes)
    return _terms_from_entropies(h)


# --- Pareto filter ----------------------------------------------------------


@njit(cache=True)
def _pareto_nb(pts, tol):
    # pts sorted by descending coordinate sum: a point can only be dominated
    # by an earlier one
    n = pts.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    kept = np.empty((n, 3))
    nk = 0
    for i in range(n):
        dominated = False
        for j in range(nk):
            if (
                kept[j, 0] >= pts[i, 0] - tol
                and kept[j, 1] >= pts[i, 1] - tol
                and kept[j, 2] >= pts[i, 2] - tol
            ):
                dominated = True
                break
        if not dominated:
            keep[i] = True
            kept[nk] = pts[i]
            nk += 1
    return keep


def _pareto_np(pts, tol, block=2048):
    n = pts.shape[0]
    keep = np.zeros(n, dtype=bool)
    kept = np.empty((0, 3))
    for lo in range(0, n, block):
        chunk = pts[lo:lo + block]
        # against everything kept so far
        if kept.shape[0]:
            dom = np.zeros(chunk.shape[0], dtype=bool)
            for klo in range(0, kept.shape[0], block):
                kb = kept[klo:klo + block]
                dom |= np.all(kb[None, :, :] >= chunk[:, None, :] - tol, axis=2).any(axis=1)
        else:
            dom = np.zeros(chunk.shape[0], dtype=bool)
        # within the chunk, earlier rows dominate later ones
        ge = np.all(chunk[None, :, :] >= chunk[:, None, :] - tol, axis=2)
        ge = np.tril(ge, k=-1)
        for i in np.flatnonzero(~dom):
            earlier = np.flatnonzero(ge[i, :i])
            if np.any(~dom[earlier] & keep[lo + earlier]):
                dom[i] = True
            else:
                keep[lo + i] = True
        kept = np.vstack([kept, chunk[keep[lo:lo + chunk.shape[0]]]])
    return keep


def pareto_mask(points, tol=1e-9, backend=None) -> np.ndarray:
    """Mask of points not weakly dominated (within ``tol``) by an earlier kept point.

    Points are processed in order of descending coordinate sum, so exact
    duplicates keep only their first occurrence.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    order = np.lexsort((np.arange(len(pts)), -pts.sum(axis=1)))
    sorted_pts = np.ascontiguousarray(pts[order])
    if backend is None:
        backend = "numba" if use_numba() else "numpy"
    if backend == "numba":
        keep_sorted = _pareto_nb(sorted_pts, tol)
    else:
        keep_sorted = _pareto_np(sorted_pts, tol)
    mask = np.zeros(len(pts), dtype=bool)
    mask[order[keep_sorted]] = True
    return mask

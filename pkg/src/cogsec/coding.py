"""Monte Carlo simulation of the random-binning cognitive coding scheme.

Codebook layout for each primary codeword ``u_i``::

    v[i, j, a, b]   j: bin (carries the confidential message with c)
                    a: subbin (covering index chosen by the encoder)
                    b: position inside the subbin (randomization)

The confidential message is ``w2 = (j, c)``; ``b`` is drawn uniformly from
the fiber ``g^{-1}(c)`` of a nearly-equal partition ``g`` of the subbin
positions. Counts round ``2**(n * rate)`` to the nearest integer (min 1):

* ``M1``   = round(2^{n R1})                      primary messages
* ``J``    = round(2^{n R2} / C)                  bins, ``C`` = fibers
* ``A``    = round(2^{n (Lmax - Lout)})           subbins per bin
* ``Bsz``  = max(C, round(C 2^{n (Lout + slack)}))  positions per subbin

with ``Lout = I(V; Y1, U, X1)`` and ``Lmax = max(Lout, I(V; S, U, X1))``
taken from the generating joint.
"""
from __future__ import annotations

import functools
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._accel import njit, use_numba
from .channel import AuxiliaryPolicy, ChannelSpec, build_joint
from .errors import DomainError, GenerationError, ResourceError
from .probability import JointDistribution, mutual_information

DEFAULT_MAX_CODEWORDS = 2**16
DEFAULT_MAX_STATE_SEQUENCES = 2**12
TYPICAL_SLACK = 1e-12


# --- partition map ------------------------------------------------------------


def partition_g(bin_size: int, target_size: int) -> list[int]:
    """Fiber sizes of a nearly-equal partition of ``bin_size`` items into ``target_size`` parts."""
    B, C = int(bin_size), int(target_size)
    if C < 1 or B < 1:
        raise DomainError("partition sizes must be positive")
    if C > B:
        raise DomainError(f"cannot partition {B} items into {C} nonempty fibers")
    q, r = divmod(B, C)
    return [q + 1] * r + [q] * (C - r)


def nearly_equal(sizes) -> bool:
    """Every fiber is at most twice as large as every other one."""
    return len(sizes) > 0 and min(sizes) >= 1 and max(sizes) <= 2 * min(sizes)


def partition_map(bin_size: int, target_size: int) -> np.ndarray:
    """``g[b]`` = fiber label of position b (contiguous fibers)."""
    sizes = partition_g(bin_size, target_size)
    return np.repeat(np.arange(len(sizes)), sizes)


# --- typicality kernels ---------------------------------------------------------


@njit(cache=True)
def _typical_nb(codes, pref, eps):
    m, n = codes.shape
    k = pref.shape[0]
    out = np.zeros(m, dtype=np.bool_)
    counts = np.zeros(k)
    for r in range(m):
        for c in range(k):
            counts[c] = 0.0
        for t in range(n):
            counts[codes[r, t]] += 1.0
        ok = True
        for c in range(k):
            f = counts[c] / n
            if pref[c] <= 0.0:
                if counts[c] > 0.0:
                    ok = False
                    break
            elif abs(f - pref[c]) > eps:
                ok = False
                break
        out[r] = ok
    return out


def _typical_np(codes, pref, eps):
    m, n = codes.shape
    k = pref.shape[0]
    flat = codes + (np.arange(m, dtype=np.int64) * k)[:, None]
    counts = np.bincount(flat.ravel(), minlength=m * k).reshape(m, k).astype(np.float64)
    zero = pref <= 0.0
    bad_zero = (counts[:, zero] > 0).any(axis=1)
    bad = (np.abs(counts[:, ~zero] / n - pref[~zero]) > eps).any(axis=1)
    return ~(bad_zero | bad)


def typical_mask(codes, pref, eps, backend=None) -> np.ndarray:
    """Strong typicality of each row of joint-letter ``codes`` against the flat pmf ``pref``.

    A row is typical when every joint letter frequency is within ``eps`` of
    its probability and zero-probability letters never occur.
    """
    codes = np.ascontiguousarray(np.atleast_2d(codes), dtype=np.int64)
    pref = np.ascontiguousarray(pref, dtype=np.float64).ravel()
    if codes.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    if backend is None:
        backend = "numba" if use_numba() else "numpy"
    eps = float(eps) + TYPICAL_SLACK
    if backend == "numba":
        return _typical_nb(codes, pref, eps)
    return _typical_np(codes, pref, eps)


@njit(cache=True)
def _typical_tail_nb(base, y, ny, pref, eps):
    m, n = base.shape
    k = pref.shape[0]
    out = np.zeros(m, dtype=np.bool_)
    counts = np.zeros(k)
    for r in range(m):
        for c in range(k):
            counts[c] = 0.0
        for t in range(n):
            counts[base[r, t] * ny + y[t]] += 1.0
        ok = True
        for c in range(k):
            if pref[c] <= 0.0:
                if counts[c] > 0.0:
                    ok = False
                    break
            elif abs(counts[c] / n - pref[c]) > eps:
                ok = False
                break
        out[r] = ok
    return out


def typical_tail_mask(base, y, ny, pref, eps, backend=None) -> np.ndarray:
    """:func:`typical_mask` of the codes ``base * ny + y`` without materializing them."""
    base = np.ascontiguousarray(np.atleast_2d(base), dtype=np.int64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    pref = np.ascontiguousarray(pref, dtype=np.float64).ravel()
    if backend is None:
        backend = "numba" if use_numba() else "numpy"
    if backend == "numba" and base.shape[0]:
        return _typical_tail_nb(base, y, int(ny), pref, float(eps) + TYPICAL_SLACK)
    return typical_mask(base * int(ny) + y[None, :], pref, eps, backend="numpy")


@njit(cache=True)
def _gather_sum_nb(table, codes, y):
    m, n = codes.shape
    out = np.empty(m)
    for r in range(m):
        acc = 0.0
        for t in range(n):
            acc += table[codes[r, t], y[t]]
        out[r] = acc
    return out


def gather_sum(table, codes, y, backend=None) -> np.ndarray:
    """``out[r] = sum_t table[codes[r, t], y[t]]`` (letterwise log-likelihoods)."""
    table = np.ascontiguousarray(table, dtype=np.float64)
    codes = np.ascontiguousarray(codes, dtype=np.int64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if backend is None:
        backend = "numba" if use_numba() else "numpy"
    if backend == "numba":
        return _gather_sum_nb(table, codes, y)
    return table[codes, y[None, :]].sum(axis=1)


def joint_codes(seqs, cards) -> np.ndarray:
    """Combine aligned integer sequences into one joint-letter code per position."""
    code = np.zeros(np.broadcast_shapes(*(np.shape(s) for s in seqs)), dtype=np.int64)
    for s, c in zip(seqs, cards):
        code = code * int(c) + np.asarray(s, dtype=np.int64)
    return code


# --- parameters -------------------------------------------------------------------


def _conditional(joint_arr, n_given):
    """Normalize the trailing axes of a marginal given the leading ``n_given`` axes.

    Rows with zero mass become uniform; typical sequences never visit them.
    """
    lead = joint_arr.shape[:n_given]
    flat = joint_arr.reshape(lead + (-1,))
    z = flat.sum(axis=-1, keepdims=True)
    out = np.where(z > 0, flat / np.where(z > 0, z, 1.0), 1.0 / flat.shape[-1])
    return out.reshape(joint_arr.shape)


def _count(n, rate, scale=1.0):
    return max(1, int(round(scale * 2.0 ** (n * rate))))


@dataclass(frozen=True, eq=False)
class CodebookParams:
    """Blocklength, rates, generating pmfs and derived codebook sizes."""

    n: int
    r1: float
    r2: float
    spec: ChannelSpec
    joint: JointDistribution
    eps: float = 0.05
    seed: int = 0
    fibers: int = 1
    slack: float = 0.0
    max_codewords: int = DEFAULT_MAX_CODEWORDS
    max_state_sequences: int = DEFAULT_MAX_STATE_SEQUENCES
    sizes: dict = field(init=False)
    info: dict = field(init=False)

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("blocklength n must be >= 1")
        if self.r1 < 0 or self.r2 < 0:
            raise DomainError("rates must be nonnegative")
        if self.eps <= 0:
            raise DomainError("typicality epsilon must be positive")
        if self.fibers < 1:
            raise DomainError("fiber count must be >= 1")
        if self.slack < 0:
            raise DomainError("randomization slack must be nonnegative")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        l_out = mutual_information(self.joint, ("V",), ("Y1", "U", "X1"))
        l_state = mutual_information(self.joint, ("V",), ("S", "U", "X1"))
        l_max = max(l_out, l_state)
        n, C = self.n, self.fibers
        sizes = {
            "M1": _count(n, self.r1),
            "J": max(1, int(round(2.0 ** (n * self.r2) / C))),
            "C": C,
            "A": _count(n, l_max - l_out),
            "Bsz": max(C, _count(n, l_out + self.slack, scale=C)),
        }
        sizes["M2"] = sizes["J"] * C
        sizes["per_u"] = sizes["J"] * sizes["A"] * sizes["Bsz"]
        sizes["codewords"] = sizes["M1"] * sizes["per_u"]
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "info", {"I(V;Y1,U,X1)": l_out, "I(V;S,U,X1)": l_state})

    @classmethod
    def from_policy(cls, spec: ChannelSpec, policy: AuxiliaryPolicy, n, r1, r2, **kw) -> "CodebookParams":
        return cls(n=n, r1=r1, r2=r2, spec=spec, joint=build_joint(spec, policy), **kw)

    @property
    def realized_r1(self):
        return math.log2(self.sizes["M1"]) / self.n

    @property
    def realized_r2(self):
        return math.log2(self.sizes["M2"]) / self.n

    def pmfs(self) -> dict:
        """Generating and reference pmfs derived from the joint."""
        j = self.joint
        m = j.marginal_array
        return {
            "U": m(("U",)),
            "V|U": _conditional(m(("U", "V")), 1),
            "X1|U": _conditional(m(("U", "X1")), 1),
            "X2|V,U,S": _conditional(m(("V", "U", "S", "X2")), 3),
            "S": m(("S",)),
            "UV": m(("U", "V")),
            "UX1": m(("U", "X1")),
            "VUS": m(("V", "U", "S")),
            "X1Y1": m(("X1", "Y1")),
            "VUY2": m(("V", "U", "Y2")),
            "X1VY1": m(("X1", "V", "Y1")),
        }

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "r1": self.r1,
            "r2": self.r2,
            "eps": self.eps,
            "seed": int(self.seed),
            "fibers": self.fibers,
            "slack": self.slack,
            "sizes": dict(self.sizes),
            "realized_r1": self.realized_r1,
            "realized_r2": self.realized_r2,
            **{k: v for k, v in self.info.items()},
        }


# --- codebook -----------------------------------------------------------------------


@dataclass(eq=False)
class Codebook:
    params: CodebookParams
    u: np.ndarray  # (M1, n)
    x1: np.ndarray  # (M1, n)
    v: np.ndarray  # (M1, J, A, Bsz, n)
    g: np.ndarray  # (Bsz,) fiber label of each subbin position
    fibers: tuple  # fiber sizes
    pmfs: dict

    @property
    def n(self):
        return self.params.n

    @functools.cached_property
    def vu_codes(self) -> np.ndarray:
        """Joint (v, u_i) letter codes for every v-sequence, shape (codewords, n)."""
        nu, nv = self.pmfs["V|U"].shape
        u = np.broadcast_to(self.u[:, None, None, None, :], self.v.shape)
        return joint_codes((self.v, u), (nv, nu)).reshape(-1, self.n)

    @property
    def sizes(self):
        return self.params.sizes

    def structure_ok(self) -> bool:
        s = self.sizes
        M1, J, A, Bsz = s["M1"], s["J"], s["A"], s["Bsz"]
        return (
            self.v.shape == (M1, J, A, Bsz, self.n)
            and J * A * Bsz == s["per_u"]
            and M1 * J * A * Bsz == s["codewords"]
            and len(self.fibers) == s["C"]
            and sum(self.fibers) == Bsz
            and nearly_equal(self.fibers)
        )


def _draw_letters(rng, cond_rows, given):
    """Sample one letter per entry of ``given`` from ``cond_rows[given]``."""
    cum = np.cumsum(cond_rows[given], axis=-1)
    r = rng.random(given.shape + (1,))
    out = (r > cum).sum(axis=-1)
    return np.minimum(out, cond_rows.shape[-1] - 1)


def _typical_draws(rng, count, n, sampler, check, what, max_rounds=400):
    """Rejection-sample ``count`` typical length-n rows."""
    got = []
    have = 0
    batch = max(64, 4 * count)
    for _ in range(max_rounds):
        cand = sampler(batch)
        ok = check(cand)
        if ok.any():
            got.append(cand[ok])
            have += int(ok.sum())
        if have >= count:
            return np.concatenate(got)[:count]
    raise GenerationError(
        f"typical set for {what} looks empty at n={n}: found {have} of {count} sequences "
        f"after {max_rounds * batch} draws; increase epsilon or n"
    )


def generate_codebook(params: CodebookParams) -> Codebook:
    """Random codebook with the bin/subbin structure; deterministic given the seed."""
    s = params.sizes
    if s["codewords"] > params.max_codewords:
        raise ResourceError(f"codebook needs {s['codewords']} v-sequences, above the cap of {params.max_codewords}")
    n, eps = params.n, params.eps
    pm = params.pmfs()
    nu, nv = pm["V|U"].shape
    rng = np.random.default_rng([int(params.seed), 0])

    pu = pm["U"]
    u = _typical_draws(
        rng,
        s["M1"],
        n,
        lambda b: _draw_letters(rng, pu[None, :], np.zeros((b, n), dtype=np.int64)),
        lambda c: typical_mask(c, pu, eps),
        "U",
    )
    pux1 = pm["UX1"].ravel()
    nx1 = pm["X1|U"].shape[1]
    x1 = np.empty_like(u)
    for i in range(s["M1"]):
        ui = u[i]
        x1[i] = _typical_draws(
            rng,
            1,
            n,
            lambda b: _draw_letters(rng, pm["X1|U"], np.broadcast_to(ui, (b, n))),
            lambda c: typical_mask(joint_codes((ui[None, :], c), (nu, nx1)), pux1, eps),
            f"X1 given u[{i}]",
        )[0]

    puv = pm["UV"].ravel()
    per_u = s["per_u"]
    v = np.empty((s["M1"], per_u, n), dtype=np.int64)
    for i in range(s["M1"]):
        ui = u[i]
        v[i] = _typical_draws(
            rng,
            per_u,
            n,
            lambda b: _draw_letters(rng, pm["V|U"], np.broadcast_to(ui, (b, n))),
            lambda c: typical_mask(joint_codes((ui[None, :], c), (nu, nv)), puv, eps),
            f"V given u[{i}]",
        )
        # random assignment of the generated sequences to (bin, subbin, position) slots
        v[i] = v[i][rng.permutation(per_u)]
    v = v.reshape(s["M1"], s["J"], s["A"], s["Bsz"], n)

    fibers = tuple(partition_g(s["Bsz"], s["C"]))
    if not nearly_equal(fibers):
        raise AssertionError(f"partition {fibers} violates the nearly-equal condition")
    cb = Codebook(params, u, x1, v, partition_map(s["Bsz"], s["C"]), fibers, pm)
    if not cb.structure_ok():
        raise AssertionError("codebook structure identity failed")
    return cb


# --- encoding / decoding ---------------------------------------------------------


@dataclass(frozen=True)
class Encoding:
    x1: np.ndarray
    x2: np.ndarray
    index: tuple  # (i, j, a, b)
    failed: bool


def _split_w2(codebook: Codebook, w2):
    s = codebook.sizes
    if isinstance(w2, (tuple, list)):
        j, c = (int(x) for x in w2)
    else:
        j, c = divmod(int(w2), s["C"])
    if not (0 <= j < s["J"] and 0 <= c < s["C"]):
        raise DomainError(f"message w2={w2} out of range (J={s['J']}, C={s['C']})")
    return j, c


def _check_seq(seq, n, card, what):
    seq = np.asarray(seq, dtype=np.int64)
    if seq.shape != (n,):
        raise DomainError(f"{what} must have length {n}, got shape {seq.shape}")
    if seq.min(initial=0) < 0 or seq.max(initial=0) >= card:
        raise DomainError(f"{what} has symbols outside 0..{card - 1}")
    return seq


def covering_choice(codebook: Codebook, i: int, j: int, b: int, s_seq) -> int | None:
    """First subbin a with (v[i,j,a,b], u_i, s) jointly typical, or None."""
    pm = codebook.pmfs
    nv, nu, ns = pm["VUS"].shape
    cands = codebook.v[i, j, :, b, :]
    codes = joint_codes((cands, codebook.u[i][None, :], np.asarray(s_seq)[None, :]), (nv, nu, ns))
    ok = typical_mask(codes, pm["VUS"].ravel(), codebook.params.eps)
    hits = np.flatnonzero(ok)
    return int(hits[0]) if hits.size else None


def encode(codebook: Codebook, w1: int, w2, s_seq, rng: np.random.Generator) -> Encoding:
    """Channel inputs for messages (w1, w2) under state sequence ``s_seq``.

    ``w2`` is ``(j, c)`` or the flat index ``j * C + c``. The position b is
    drawn uniformly from the fiber of c, and the first subbin whose
    v-sequence is typical with (u, s) is used; if none is, the encoder
    flags a failure and transmits subbin 0.
    """
    s = codebook.sizes
    n = codebook.n
    if not 0 <= int(w1) < s["M1"]:
        raise DomainError(f"message w1={w1} out of range (M1={s['M1']})")
    j, c = _split_w2(codebook, w2)
    spec = codebook.params.spec
    s_seq = _check_seq(s_seq, n, spec.n_s, "state sequence")
    fiber = np.flatnonzero(codebook.g == c)
    b = int(fiber[rng.integers(len(fiber))])
    a = covering_choice(codebook, int(w1), j, b, s_seq)
    failed = a is None
    a = 0 if failed else a
    v = codebook.v[int(w1), j, a, b]
    u = codebook.u[int(w1)]
    px2 = codebook.pmfs["X2|V,U,S"]
    cum = np.cumsum(px2[v, u, s_seq], axis=-1)
    x2 = np.minimum((rng.random((n, 1)) > cum).sum(axis=-1), px2.shape[-1] - 1)
    return Encoding(codebook.x1[int(w1)].copy(), x2, (int(w1), j, a, b), failed)


def transmit(spec: ChannelSpec, x1, x2, s_seq, rng: np.random.Generator):
    """Sample (y1, y2) letterwise from the channel kernel."""
    k = spec.kernel[s_seq, x1, x2]  # (n, Y1, Y2)
    n = k.shape[0]
    flat = k.reshape(n, -1)
    cum = np.cumsum(flat, axis=-1)
    idx = np.minimum((rng.random((n, 1)) > cum).sum(axis=-1), flat.shape[1] - 1)
    return np.divmod(idx, spec.n_y2)


def decode_primary(codebook: Codebook, y1) -> int | None:
    """Unique i with (x1_i, y1) jointly typical, else None."""
    spec = codebook.params.spec
    y1 = _check_seq(y1, codebook.n, spec.n_y1, "y1 sequence")
    ref = codebook.pmfs["X1Y1"]
    codes = joint_codes((codebook.x1, y1[None, :]), ref.shape)
    hits = np.flatnonzero(typical_mask(codes, ref.ravel(), codebook.params.eps))
    return int(hits[0]) if hits.size == 1 else None


def decode_secondary(codebook: Codebook, y2) -> tuple | None:
    """Unique (i, j, a, b) with (v, u_i, y2) jointly typical, else None."""
    spec = codebook.params.spec
    y2 = _check_seq(y2, codebook.n, spec.n_y2, "y2 sequence")
    ref = codebook.pmfs["VUY2"]
    ok = typical_tail_mask(codebook.vu_codes, y2, ref.shape[2], ref.ravel(), codebook.params.eps)
    hits = np.flatnonzero(ok)
    if hits.size != 1:
        return None
    return tuple(int(x) for x in np.unravel_index(hits[0], codebook.v.shape[:4]))


def decode_genie(codebook: Codebook, y1, i: int, j: int, a: int) -> int | None:
    """Receiver-1 diagnostic: given (i, j, a), the unique b with (x1_i, v, y1) typical."""
    spec = codebook.params.spec
    y1 = _check_seq(y1, codebook.n, spec.n_y1, "y1 sequence")
    ref = codebook.pmfs["X1VY1"]
    cands = codebook.v[i, j, a]
    codes = joint_codes((codebook.x1[i][None, :], cands, y1[None, :]), ref.shape)
    hits = np.flatnonzero(typical_mask(codes, ref.ravel(), codebook.params.eps))
    return int(hits[0]) if hits.size == 1 else None


def message_of(codebook: Codebook, index) -> tuple[int, int]:
    """Confidential message (j, c) carried by a v-index (i, j, a, b)."""
    _, j, _, b = index
    return int(j), int(codebook.g[b])


# --- equivocation ------------------------------------------------------------------


def _letter_tables(codebook: Codebook):
    """log q(y1 | x1, v, u, s) indexed [(x1, v, u), s, y1]."""
    spec = codebook.params.spec
    px2 = codebook.pmfs["X2|V,U,S"]  # (V, U, S, X2)
    k1 = spec.kernel_y1()  # (S, X1, X2, Y1)
    q = np.einsum("vusx,saxy->avusy", px2, k1)  # (X1, V, U, S, Y1)
    nx1, nv, nu, ns, ny1 = q.shape
    return q.reshape(nx1 * nv * nu, ns, ny1)


def _logsumexp(a, axis=None):
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis) if axis is not None else out.item()


class _Equivocation:
    """Exact posterior of the confidential message at receiver 1."""

    def __init__(self, codebook: Codebook):
        self.cb = codebook
        s = codebook.sizes
        spec = codebook.params.spec
        self.q = _letter_tables(codebook)
        nx1 = spec.n_x1
        nv, nu = codebook.pmfs["V|U"].shape[1], codebook.pmfs["V|U"].shape[0]
        n = codebook.n
        M1, J, A, Bsz = s["M1"], s["J"], s["A"], s["Bsz"]
        # candidates are (i, j, b); the subbin is chosen by the encoder
        self.x1 = np.broadcast_to(codebook.x1[:, None, None, :], (M1, J, Bsz, n))
        self.u = np.broadcast_to(codebook.u[:, None, None, :], (M1, J, Bsz, n))
        self.dims = (nx1, nv, nu)
        self.log_fiber = -np.log(np.array(codebook.fibers, dtype=np.float64))[codebook.g]  # per b
        ps = spec.state_pmf
        self.state_dependent = A > 1
        if not self.state_dependent:
            # the transmitted v does not depend on s: marginalize S per letter
            r = np.einsum("ksy,s->ky", self.q, ps)
            with np.errstate(divide="ignore"):
                self.tables = [(0.0, np.log(r), None)]
            v = codebook.v[:, :, 0, :, :]
            self.codes_fixed = joint_codes((self.x1, v, self.u), self.dims).reshape(-1, n)
        else:
            n_seq = spec.n_s**n
            if n_seq > codebook.params.max_state_sequences:
                raise ResourceError(
                    f"exact equivocation needs {n_seq} state sequences, above the cap of "
                    f"{codebook.params.max_state_sequences}"
                )
            self.tables = []
            for s_seq in itertools.product(range(spec.n_s), repeat=n):
                s_seq = np.array(s_seq, dtype=np.int64)
                with np.errstate(divide="ignore"):
                    logp = float(np.log(ps[s_seq]).sum())
                if not np.isfinite(logp):
                    continue
                choice = self._choices(s_seq)
                v = np.take_along_axis(codebook.v, choice[:, :, None, :, None], axis=2)[:, :, 0]
                codes = joint_codes((self.x1, v, self.u), self.dims).reshape(-1, n)
                with np.errstate(divide="ignore"):
                    table = np.log(self.q[:, s_seq, :])  # (K, n, Y1)
                self.tables.append((logp, table, codes))

    def _choices(self, s_seq):
        cb = self.cb
        s = cb.sizes
        pm = cb.pmfs
        nv, nu, ns = pm["VUS"].shape
        n = cb.n
        u = np.broadcast_to(cb.u[:, None, None, None, :], cb.v.shape)
        codes = joint_codes((cb.v, u, np.broadcast_to(s_seq, cb.v.shape)), (nv, nu, ns)).reshape(-1, n)
        ok = typical_mask(codes, pm["VUS"].ravel(), cb.params.eps).reshape(s["M1"], s["J"], s["A"], s["Bsz"])
        first = np.argmax(ok, axis=2)  # 0 when none is typical (failure fallback)
        return first

    def log_likelihood(self, y1):
        """log p(y1 | i, j, b) for every candidate, shape (M1, J, Bsz)."""
        cb = self.cb
        s = cb.sizes
        shape = (s["M1"], s["J"], s["Bsz"])
        n = cb.n
        if not self.state_dependent:
            _, table, _ = self.tables[0]
            return gather_sum(table, self.codes_fixed, y1).reshape(shape)
        parts = []
        t_idx = np.arange(n)
        for logp, table, codes in self.tables:
            # per-letter table for this state sequence: [K, t] at y1_t
            lt = table[:, t_idx, y1]  # (K, n)
            parts.append(logp + lt[codes, t_idx[None, :]].sum(axis=1))
        return _logsumexp(np.stack(parts), axis=0).reshape(shape)

    def posterior_entropy(self, y1) -> float:
        """H(W2 | Y1 = y1) in bits under uniform messages."""
        ll = self.log_likelihood(y1) + self.log_fiber[None, None, :]
        s = self.cb.sizes
        # sum over w1 and over positions in each fiber -> log p(y1, j, c) up to a constant
        C = s["C"]
        per_c = np.stack([_logsumexp(ll[:, :, self.cb.g == c], axis=2) for c in range(C)], axis=-1)  # (M1, J, C)
        lj = _logsumexp(per_c, axis=0).ravel()  # (J*C,)
        z = _logsumexp(lj)
        if not np.isfinite(z):
            return float(math.log2(s["M2"]))
        logp = lj - z
        p = np.exp(logp)
        mask = p > 0
        return float(-(p[mask] * logp[mask]).sum() / math.log(2))


# --- trials ------------------------------------------------------------------------


@dataclass
class SimReport:
    params: dict
    seed: int
    trials: int
    pe1: float
    pe2: float
    eq_rate: float
    encoder_failure_rate: float
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "params": _round_tree(self.params),
            "seed": int(self.seed),
            "trials": int(self.trials),
            "pe1": _r12(self.pe1),
            "pe2": _r12(self.pe2),
            "eq_rate": None if math.isnan(self.eq_rate) else _r12(self.eq_rate),
            "encoder_failure_rate": _r12(self.encoder_failure_rate),
            **_round_tree(self.extra),
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def _r12(x):
    return float(format(float(x), ".12g"))


def _round_tree(obj):
    if isinstance(obj, dict):
        return {k: _round_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_tree(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return _r12(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def run_trials(
    spec: ChannelSpec, params: CodebookParams, trials: int, log=None, equivocation: bool = True
) -> SimReport:
    """Monte Carlo estimates of Pe1, Pe2 and the equivocation rate.

    Each trial draws uniform messages and an i.i.d. state sequence with its
    own generator seeded by ``(seed, 1, trial)``. ``log`` (a list) receives
    one dict per trial when given. With ``equivocation=False`` the exact
    posterior is skipped and ``eq_rate`` is NaN.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    if params.spec is not spec and not (
        np.array_equal(params.spec.kernel, spec.kernel) and np.array_equal(params.spec.state_pmf, spec.state_pmf)
    ):
        raise DomainError("codebook parameters were built for a different channel")
    cb = generate_codebook(params)
    eq = _Equivocation(cb) if equivocation else None
    s = cb.sizes
    n = params.n
    err1 = err2 = fails = 0
    h_total = 0.0
    for t in range(trials):
        rng = np.random.default_rng([int(params.seed), 1, t])
        w1 = int(rng.integers(s["M1"]))
        w2 = (int(rng.integers(s["J"])), int(rng.integers(s["C"])))
        s_seq = rng.choice(spec.n_s, size=n, p=spec.state_pmf)
        enc = encode(cb, w1, w2, s_seq, rng)
        y1, y2 = transmit(spec, enc.x1, enc.x2, s_seq, rng)
        d1 = decode_primary(cb, y1)
        d2 = decode_secondary(cb, y2)
        e1 = d1 != w1
        e2 = enc.failed or d2 is None or message_of(cb, d2) != w2
        h = eq.posterior_entropy(y1) if eq is not None else math.nan
        err1 += e1
        err2 += e2
        fails += enc.failed
        h_total += h
        if log is not None:
            log.append(
                {"trial": t, "w1": w1, "j": w2[0], "c": w2[1], "failed": bool(enc.failed),
                 "err1": bool(e1), "err2": bool(e2), "h_w2_given_y1": h}
            )
    return SimReport(
        params=params.as_dict(),
        seed=int(params.seed),
        trials=trials,
        pe1=err1 / trials,
        pe2=err2 / trials,
        eq_rate=h_total / trials / n,
        encoder_failure_rate=fails / trials,
        extra={"backend": "numba" if use_numba() else "numpy"},
    )

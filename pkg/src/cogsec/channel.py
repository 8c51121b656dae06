"""Channel and auxiliary-policy declarations, file formats, and the joint pmf.

Tensor index order is fixed for interchange:

* channel kernel ``P(y1, y2 | x1, x2, s)`` is indexed ``[s, x1, x2, y1, y2]``
* policy conditional ``P(u, v, x2 | s, x1)`` is indexed ``[s, x1, u, v, x2]``

The joint built from a (spec, policy) pair has variables
``S, U, V, X1, X2, Y1, Y2`` in that order.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParseError
from .probability import JointDistribution, check_cells, conditional_mi

JOINT_NAMES = ("S", "U", "V", "X1", "X2", "Y1", "Y2")
VALID_TOL = 1e-12
INPUT_TOL = 1e-9
INDEPENDENCE_TOL = 1e-10


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    """State pmf and transition kernel of the state-dependent channel."""

    state_pmf: np.ndarray
    kernel: np.ndarray
    notes: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "state_pmf", _frozen(self.state_pmf))
        object.__setattr__(self, "kernel", _frozen(self.kernel))
        if self.state_pmf.ndim != 1:
            raise DomainError("state_pmf must be one-dimensional")
        if self.kernel.ndim != 5:
            raise DomainError("kernel must be indexed [s][x1][x2][y1][y2]")
        if self.kernel.shape[0] != self.state_pmf.shape[0]:
            raise DomainError(
                f"kernel has {self.kernel.shape[0]} state slices but state_pmf has {self.state_pmf.shape[0]} entries"
            )
        if min(self.kernel.shape) < 1:
            raise DomainError("alphabet sizes must be positive")

    @property
    def alphabets(self) -> dict:
        s, x1, x2, y1, y2 = self.kernel.shape
        return {"x1": x1, "x2": x2, "s": s, "y1": y1, "y2": y2}

    @property
    def n_s(self):
        return self.kernel.shape[0]

    @property
    def n_x1(self):
        return self.kernel.shape[1]

    @property
    def n_x2(self):
        return self.kernel.shape[2]

    @property
    def n_y1(self):
        return self.kernel.shape[3]

    @property
    def n_y2(self):
        return self.kernel.shape[4]

    def kernel_y1(self) -> np.ndarray:
        """P(y1 | s, x1, x2) indexed ``[s, x1, x2, y1]``."""
        return self.kernel.sum(axis=4)

    def kernel_y2(self) -> np.ndarray:
        """P(y2 | s, x1, x2) indexed ``[s, x1, x2, y2]``."""
        return self.kernel.sum(axis=3)


@dataclass(frozen=True, eq=False)
class AuxiliaryPolicy:
    """Input pmf of X1 and the cognitive encoder's conditional P(u, v, x2 | s, x1)."""

    px1: np.ndarray
    cond: np.ndarray
    notes: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "px1", _frozen(self.px1))
        object.__setattr__(self, "cond", _frozen(self.cond))
        if self.px1.ndim != 1:
            raise DomainError("px1 must be one-dimensional")
        if self.cond.ndim != 5:
            raise DomainError("cond must be indexed [s][x1][u][v][x2]")
        if self.cond.shape[1] != self.px1.shape[0]:
            raise DomainError(f"cond has {self.cond.shape[1]} x1 slices but px1 has {self.px1.shape[0]} entries")

    @property
    def n_u(self):
        return self.cond.shape[2]

    @property
    def n_v(self):
        return self.cond.shape[3]

    @property
    def alphabets(self) -> dict:
        return {"u": self.n_u, "v": self.n_v}


def default_aux_sizes(spec: ChannelSpec) -> tuple[int, int]:
    """Default |U|, |V|: ``|X1||S| + 1`` and ``|X2||S| + 2``."""
    return spec.n_x1 * spec.n_s + 1, spec.n_x2 * spec.n_s + 2


def _pmf_violations(name, p, tol):
    out = []
    neg = np.argwhere(p < 0)
    for idx in neg:
        out.append(f"{name}{list(map(int, idx))} is negative ({p[tuple(idx)]!r})")
    total = float(p.sum())
    if abs(total - 1.0) > tol:
        out.append(f"{name} sums to {total!r}")
    return out


def _slice_violations(name, t, n_lead, labels, tol):
    out = []
    lead = t.shape[:n_lead]
    flat = t.reshape(lead + (-1,))
    sums = flat.sum(axis=-1)
    for idx in np.ndindex(*lead):
        row = flat[idx]
        where = ",".join(f"{lab}={i}" for lab, i in zip(labels, idx))
        if np.any(row < 0):
            out.append(f"{name} slice ({where}) has negative entries")
        if abs(sums[idx] - 1.0) > tol:
            out.append(f"{name} slice ({where}) sums to {float(sums[idx])!r}")
    return out


def validate_channel(spec: ChannelSpec, tol: float = VALID_TOL) -> list[str]:
    """Every normalization or negativity violation; empty list when valid."""
    out = _pmf_violations("state_pmf", spec.state_pmf, tol)
    out += _slice_violations("kernel", spec.kernel, 3, ("s", "x1", "x2"), tol)
    return out


def validate_policy(policy: AuxiliaryPolicy, tol: float = VALID_TOL) -> list[str]:
    out = _pmf_violations("px1", policy.px1, tol)
    out += _slice_violations("cond", policy.cond, 2, ("s", "x1"), tol)
    return out


def check_compatible(spec: ChannelSpec, policy: AuxiliaryPolicy):
    if policy.cond.shape[0] != spec.n_s:
        raise DomainError(f"policy has |S|={policy.cond.shape[0]}, channel has |S|={spec.n_s}")
    if policy.px1.shape[0] != spec.n_x1:
        raise DomainError(f"policy has |X1|={policy.px1.shape[0]}, channel has |X1|={spec.n_x1}")
    if policy.cond.shape[4] != spec.n_x2:
        raise DomainError(f"policy has |X2|={policy.cond.shape[4]}, channel has |X2|={spec.n_x2}")


def build_joint(spec: ChannelSpec, policy: AuxiliaryPolicy) -> JointDistribution:
    """Joint pmf P_S P_X1 P(u,v,x2|s,x1) P(y1,y2|s,x1,x2) over ``JOINT_NAMES``."""
    check_compatible(spec, policy)
    bad = validate_channel(spec) + validate_policy(policy)
    if bad:
        raise DomainError("invalid channel/policy: " + "; ".join(bad[:5]))
    s, x1, x2, y1, y2 = spec.kernel.shape
    check_cells((s, policy.n_u, policy.n_v, x1, x2, y1, y2))
    # axes: s u v a(x1) b(x2) c(y1) d(y2)
    mass = np.einsum(
        "s,a,sauvb,sabcd->suvabcd", spec.state_pmf, policy.px1, policy.cond, spec.kernel, optimize=True
    )
    return JointDistribution(JOINT_NAMES, mass)


def independence_check(joint: JointDistribution, tol: float = INDEPENDENCE_TOL) -> bool:
    """True when (Y1, Y2) is independent of (U, V) given (S, X1, X2)."""
    value = conditional_mi(joint, ("Y1", "Y2"), ("U", "V"), ("S", "X1", "X2"))
    return value <= tol


# --- file formats -----------------------------------------------------------


def _load(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno} col {exc.colno}") from None


def _require(doc, key, where=""):
    if not isinstance(doc, dict):
        raise ParseError("expected a JSON object", where or "<root>")
    if key not in doc:
        raise ParseError(f"missing field {key!r}", f"{where}.{key}" if where else key)
    return doc[key]


def _alphabet(doc, key, where):
    val = _require(doc, key, where)
    if isinstance(val, bool) or not isinstance(val, int) or val < 1:
        raise ParseError(f"alphabet size must be a positive integer, got {val!r}", f"{where}.{key}")
    return val


def _tensor(value, shape, path):
    """Check nesting against ``shape`` and return a float array."""
    def walk(v, depth, loc):
        if depth == len(shape):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ParseError(f"expected a number, got {type(v).__name__}", loc)
            return
        if not isinstance(v, list):
            raise ParseError(f"expected an array of length {shape[depth]}", loc)
        if len(v) != shape[depth]:
            raise ParseError(f"expected length {shape[depth]}, got {len(v)}", loc)
        for i, item in enumerate(v):
            walk(item, depth + 1, f"{loc}[{i}]")

    walk(value, 0, path)
    return np.array(value, dtype=np.float64).reshape(shape)


def _normalize_input(name, arr, n_lead, strict, notes):
    """Renormalize slices within ``INPUT_TOL``; reject larger errors when strict."""
    lead = arr.shape[:n_lead]
    flat = arr.reshape(lead + (-1,))
    if np.any(flat < 0):
        if strict:
            idx = tuple(int(i) for i in np.argwhere(flat < 0)[0])
            raise ParseError("negative probability", f"{name}{list(idx)}")
        return arr
    sums = flat.sum(axis=-1, keepdims=True)
    err = np.abs(sums - 1.0)
    if strict and np.any(err > INPUT_TOL):
        idx = tuple(int(i) for i in np.argwhere(err[..., 0] > INPUT_TOL)[0])
        raise ParseError(f"slice sums to {float(sums[idx][0])!r}, not 1 within {INPUT_TOL:g}", f"{name}{list(idx)}")
    # round-off below the validation tolerance is left alone
    fixable = (err > VALID_TOL) & (err <= INPUT_TOL)
    if np.any(fixable):
        notes.append(f"{name}: renormalized {int(fixable.sum())} slice(s) off by at most {float(err.max()):.3g}")
        flat = np.where(fixable, flat / sums, flat)
        warnings.warn(notes[-1], stacklevel=3)
    return flat.reshape(arr.shape)


def parse_channel_spec(text: str, *, strict: bool = True) -> ChannelSpec:
    """Parse the JSON channel document.

    With ``strict=False`` normalization failures are kept in the returned
    spec so :func:`validate_channel` can report them.
    """
    doc = _load(text)
    alph = _require(doc, "alphabets")
    sizes = {k: _alphabet(alph, k, "alphabets") for k in ("x1", "x2", "s", "y1", "y2")}
    notes: list[str] = []
    ps = _tensor(_require(doc, "state_pmf"), (sizes["s"],), "state_pmf")
    kshape = (sizes["s"], sizes["x1"], sizes["x2"], sizes["y1"], sizes["y2"])
    kernel = _tensor(_require(doc, "kernel"), kshape, "kernel")
    ps = _normalize_input("state_pmf", ps[None, :], 1, strict, notes)[0]
    kernel = _normalize_input("kernel", kernel, 3, strict, notes)
    return ChannelSpec(ps, kernel, notes=tuple(notes))


def parse_policy(text: str, *, strict: bool = True) -> AuxiliaryPolicy:
    """Parse the JSON policy document (``alphabets``, ``px1``, ``cond``)."""
    doc = _load(text)
    alph = _require(doc, "alphabets")
    nu = _alphabet(alph, "u", "alphabets")
    nv = _alphabet(alph, "v", "alphabets")
    px1_raw = _require(doc, "px1")
    if not isinstance(px1_raw, list):
        raise ParseError("expected an array", "px1")
    px1 = _tensor(px1_raw, (len(px1_raw),), "px1")
    cond_raw = _require(doc, "cond")
    if not isinstance(cond_raw, list) or not cond_raw:
        raise ParseError("expected a nonempty array indexed [s][x1][u][v][x2]", "cond")
    first = cond_raw[0]
    n_s = len(cond_raw)
    try:
        n_x2 = len(first[0][0][0])
    except (TypeError, IndexError, KeyError):
        raise ParseError("expected nesting depth 5 ([s][x1][u][v][x2])", "cond[0]") from None
    cond = _tensor(cond_raw, (n_s, len(px1), nu, nv, n_x2), "cond")
    notes: list[str] = []
    px1 = _normalize_input("px1", px1[None, :], 1, strict, notes)[0]
    cond = _normalize_input("cond", cond, 2, strict, notes)
    return AuxiliaryPolicy(px1, cond, notes=tuple(notes))


def channel_to_dict(spec: ChannelSpec) -> dict:
    return {"alphabets": spec.alphabets, "state_pmf": spec.state_pmf.tolist(), "kernel": spec.kernel.tolist()}


def policy_to_dict(policy: AuxiliaryPolicy) -> dict:
    return {"alphabets": policy.alphabets, "px1": policy.px1.tolist(), "cond": policy.cond.tolist()}


def serialize_channel_spec(spec: ChannelSpec) -> str:
    return json.dumps(channel_to_dict(spec))


def serialize_policy(policy: AuxiliaryPolicy) -> str:
    return json.dumps(policy_to_dict(policy))

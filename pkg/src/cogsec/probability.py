"""Finite joint pmfs and the information measures evaluated on them.

All logarithms are base 2. Cells with mass below ``ZERO_MASS`` are treated
as exact zeros inside log terms (0 log 0 = 0).
"""
from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConsistencyError, DomainError, ResourceError

ZERO_MASS = 1e-15
NORM_TOL = 1e-12
CLAMP_TOL = 1e-12
DEFAULT_MAX_CELLS = 10**7


def max_cells():
    """Dense-tensor cell cap; ``COGSEC_MAX_CELLS`` overrides the default."""
    env = os.environ.get("COGSEC_MAX_CELLS")
    if env:
        try:
            return int(float(env))
        except ValueError as exc:
            raise DomainError(f"COGSEC_MAX_CELLS is not a number: {env!r}") from exc
    return DEFAULT_MAX_CELLS


def check_cells(cards, what="joint distribution"):
    cells = math.prod(int(c) for c in cards)
    cap = max_cells()
    if cells > cap:
        raise ResourceError(f"{what} needs {cells} cells, above the cap of {cap} (set COGSEC_MAX_CELLS)")
    return cells


def _as_names(vars_) -> tuple[str, ...]:
    if isinstance(vars_, str):
        return (vars_,)
    return tuple(vars_)


@dataclass(frozen=True)
class Variable:
    name: str
    cardinality: int

    def __post_init__(self):
        if int(self.cardinality) < 1:
            raise DomainError(f"variable {self.name!r} has cardinality {self.cardinality} < 1")


class JointDistribution:
    """Dense pmf tensor with one named axis per variable.

    Instances are immutable: the mass array is copied and flagged read-only.
    """

    __slots__ = ("_names", "_mass", "_index")

    def __init__(self, names: Sequence[str], mass, *, tol: float = NORM_TOL):
        names = tuple(names)
        mass = np.array(mass, dtype=np.float64)
        if len(set(names)) != len(names):
            raise DomainError(f"duplicate variable names in {names}")
        if mass.ndim != len(names):
            raise DomainError(f"mass has {mass.ndim} axes but {len(names)} variables were named")
        if any(c < 1 for c in mass.shape):
            raise DomainError("every variable needs cardinality >= 1")
        check_cells(mass.shape)
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise DomainError("pmf entries must be finite and nonnegative")
        total = float(mass.sum())
        if abs(total - 1.0) > tol:
            raise DomainError(f"pmf sums to {total!r}, not 1 within {tol:g}")
        mass.setflags(write=False)
        self._names = names
        self._mass = mass
        self._index = {n: i for i, n in enumerate(names)}

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    @property
    def mass(self) -> np.ndarray:
        return self._mass

    @property
    def cards(self) -> tuple[int, ...]:
        return self._mass.shape

    @property
    def variables(self) -> tuple[Variable, ...]:
        return tuple(Variable(n, c) for n, c in zip(self._names, self.cards))

    def card(self, name):
        return self.cards[self.axis(name)]

    def axis(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise DomainError(f"unknown variable {name!r}; joint has {self._names}") from None

    def __contains__(self, name):
        return name in self._index

    def __repr__(self):
        dims = ", ".join(f"{n}:{c}" for n, c in zip(self._names, self.cards))
        return f"JointDistribution({dims})"

    def marginal_array(self, keep) -> np.ndarray:
        """Marginal mass with axes in the order given by ``keep``."""
        keep = _as_names(keep)
        axes = [self.axis(n) for n in keep]
        if len(set(axes)) != len(axes):
            raise DomainError(f"repeated variable in {keep}")
        drop = tuple(i for i in range(len(self._names)) if i not in axes)
        m = self._mass.sum(axis=drop) if drop else self._mass
        # after summing, remaining axes are in joint order; permute to keep order
        remaining = sorted(axes)
        return np.transpose(m, [remaining.index(a) for a in axes])

    def marginalize(self, keep) -> "JointDistribution":
        if isinstance(keep, (set, frozenset)):
            for n in keep:
                self.axis(n)
            keep = tuple(n for n in self._names if n in keep)
        keep = _as_names(keep)
        if not keep:
            raise DomainError("marginalize needs at least one variable to keep")
        return JointDistribution(keep, self.marginal_array(keep))

    def condition(self, given: dict) -> "JointDistribution":
        """Condition on ``{name: value}`` and renormalize over the remaining axes."""
        if not given:
            return self
        idx = [slice(None)] * len(self._names)
        for name, value in given.items():
            ax = self.axis(name)
            if not 0 <= int(value) < self.cards[ax]:
                raise DomainError(f"value {value} out of range for {name!r}")
            idx[ax] = int(value)
        sub = self._mass[tuple(idx)]
        z = float(sub.sum())
        if z <= ZERO_MASS:
            raise DomainError(f"conditioning event {given} has zero probability")
        rest = tuple(n for n in self._names if n not in given)
        if not rest:
            raise DomainError("conditioning on every variable leaves nothing")
        return JointDistribution(rest, sub / z)

    def rename(self, mapping: dict) -> "JointDistribution":
        return JointDistribution([mapping.get(n, n) for n in self._names], self._mass)


def _plogp(p: np.ndarray) -> float:
    p = p[p > ZERO_MASS]
    return float(-(p * np.log2(p)).sum())


def entropy(joint: JointDistribution, vars_) -> float:
    """Joint entropy H(vars) in bits."""
    names = _as_names(vars_)
    if not names:
        raise DomainError("entropy of an empty variable set is undefined here")
    return _plogp(joint.marginal_array(names).ravel())


def _clamp(value: float, what: str) -> float:
    if value < 0.0:
        if value > -CLAMP_TOL:
            return 0.0
        raise ConsistencyError(f"{what} evaluated to {value!r} < 0 beyond round-off")
    return value


def _check_disjoint(*groups):
    seen = set()
    for g in groups:
        overlap = seen.intersection(g)
        if overlap:
            raise DomainError(f"variable sets overlap on {sorted(overlap)}")
        seen.update(g)


def mutual_information(joint: JointDistribution, a, b) -> float:
    """I(a; b) = H(a) + H(b) - H(a, b)."""
    a, b = _as_names(a), _as_names(b)
    if not a or not b:
        raise DomainError("mutual information needs two nonempty variable sets")
    _check_disjoint(a, b)
    value = entropy(joint, a) + entropy(joint, b) - entropy(joint, a + b)
    return _clamp(value, f"I({','.join(a)}; {','.join(b)})")


def conditional_mi(joint: JointDistribution, a, b, c=()) -> float:
    """I(a; b | c) = H(a,c) + H(b,c) - H(a,b,c) - H(c); ``c`` may be empty."""
    a, b, c = _as_names(a), _as_names(b), _as_names(c)
    if not c:
        return mutual_information(joint, a, b)
    if not a or not b:
        raise DomainError("conditional mutual information needs nonempty a and b")
    _check_disjoint(a, b, c)
    value = entropy(joint, a + c) + entropy(joint, b + c) - entropy(joint, a + b + c) - entropy(joint, c)
    return _clamp(value, f"I({','.join(a)}; {','.join(b)} | {','.join(c)})")


def conditional_mi_direct(joint: JointDistribution, a, b, c=()) -> float:
    """I(a; b | c) as the expectation of log p(a,b,c)p(c) / (p(a,c)p(b,c)).

    Independent of :func:`entropy`; used to cross-check the entropy route.
    """
    a, b, c = _as_names(a), _as_names(b), _as_names(c)
    _check_disjoint(a, b, c)
    pabc = joint.marginal_array(a + b + c)
    na, nb, nc = len(a), len(b), len(c)
    pac = pabc.sum(axis=tuple(range(na, na + nb)), keepdims=True)
    pbc = pabc.sum(axis=tuple(range(na)), keepdims=True)
    pc = pabc.sum(axis=tuple(range(na + nb)), keepdims=True)
    mask = pabc > ZERO_MASS
    num = (pabc * pc)[mask]
    den = np.broadcast_to(pac * pbc, pabc.shape)[mask]
    value = float((pabc[mask] * np.log2(num / den)).sum())
    return _clamp(value, "direct conditional MI")


_SEQ_LABEL = re.compile(r"^(y1|y2)_(\d+)$")


def _sequence_length(joint: JointDistribution) -> int:
    found = {"y1": set(), "y2": set()}
    for name in joint.names:
        m = _SEQ_LABEL.match(name)
        if not m:
            raise DomainError(f"label {name!r} is not of the form y1_<i> or y2_<i>")
        found[m.group(1)].add(int(m.group(2)))
    n = len(found["y1"])
    expected = set(range(1, n + 1))
    if n < 1 or found["y1"] != expected or found["y2"] != expected:
        raise DomainError("sequence labels must be y1_1..y1_n and y2_1..y2_n for the same n >= 1")
    return n


def _cmi_or_zero(joint, a, b, c):
    if not a or not b:
        return 0.0
    return conditional_mi(joint, a, b, c)


def csiszar_sums(joint: JointDistribution) -> tuple[float, float]:
    """Both sides of the Csiszar sum identity for sequences y1_i, y2_i.

    Returns ``(sum_i I(y2^{i-1}; y1_i | y1_{i+1}^n), sum_i I(y1_{i+1}^n; y2_i | y2^{i-1}))``.
    """
    n = _sequence_length(joint)
    y1 = [f"y1_{i}" for i in range(1, n + 1)]
    y2 = [f"y2_{i}" for i in range(1, n + 1)]
    left = right = 0.0
    for i in range(n):
        past2 = tuple(y2[:i])
        future1 = tuple(y1[i + 1:])
        left += _cmi_or_zero(joint, past2, (y1[i],), future1)
        right += _cmi_or_zero(joint, future1, (y2[i],), past2)
    return left, right


def csiszar_sum_check(joint: JointDistribution) -> float:
    """Absolute residual of the Csiszar sum identity (should be ~0)."""
    left, right = csiszar_sums(joint)
    return abs(left - right)


def random_pmf(rng: np.random.Generator, shape, alpha: float = 1.0) -> np.ndarray:
    """Symmetric Dirichlet draw normalized over the whole tensor."""
    shape = tuple(shape)
    p = rng.dirichlet(np.full(math.prod(shape), alpha))
    return p.reshape(shape)


def random_conditional(rng: np.random.Generator, cond_shape, out_shape, alpha: float = 1.0) -> np.ndarray:
    """Tensor of shape ``cond_shape + out_shape`` whose out-slices are Dirichlet pmfs."""
    cond_shape, out_shape = tuple(cond_shape), tuple(out_shape)
    k = math.prod(out_shape)
    rows = rng.dirichlet(np.full(k, alpha), size=math.prod(cond_shape) or 1)
    return rows.reshape(cond_shape + out_shape)


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def names_of(vars_: Iterable[str]) -> tuple[str, ...]:
    return _as_names(vars_)

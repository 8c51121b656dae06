"""Inner (achievable) and outer bounds on the (R1, R2, Re2) region at one joint.

Every bound is assembled from nine mutual-information terms; the same
assembly is applied to single joints here and to policy batches in
:mod:`cogsec.kernels`, so both paths produce identical triples.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .channel import JOINT_NAMES, AuxiliaryPolicy, ChannelSpec, build_joint
from .errors import ConsistencyError, DomainError
from .probability import JointDistribution, conditional_mi, conditional_mi_direct

CROSS_CHECK_TOL = 1e-12
TIE_TOL = 1e-12

# (name, a, b, c) for I(a; b | c)
TERMS = (
    ("I(U,X1;Y1)", ("U", "X1"), ("Y1",), ()),
    ("I(U,X1;S)", ("U", "X1"), ("S",), ()),
    ("I(V;Y2)", ("V",), ("Y2",), ()),
    ("I(V;U,X1,S)", ("V",), ("U", "X1", "S"), ()),
    ("I(V;U,X1,Y1)", ("V",), ("U", "X1", "Y1"), ()),
    ("I(X2;Y2|X1,S)", ("X2",), ("Y2",), ("X1", "S")),
    ("I(X2;Y1|X1,S)", ("X2",), ("Y1",), ("X1", "S")),
    ("I(X2;Y2|U,X1,S)", ("X2",), ("Y2",), ("U", "X1", "S")),
    ("I(X2;Y1|U,X1,S)", ("X2",), ("Y1",), ("U", "X1", "S")),
)
TERM_NAMES = tuple(t[0] for t in TERMS)
(T_UX1_Y1, T_UX1_S, T_V_Y2, T_V_UX1S, T_V_UX1Y1, T_X2_Y2_X1S, T_X2_Y1_X1S, T_X2_Y2_UX1S, T_X2_Y1_UX1S) = range(9)


@dataclass(frozen=True)
class RateTriple:
    """(R1, R2, Re2) in bits per channel use."""

    r1: float
    r2: float
    re2: float

    def __post_init__(self):
        if min(self.r1, self.r2, self.re2) < 0:
            raise DomainError(f"negative rate in {self}")
        if self.re2 > self.r2:
            raise DomainError(f"equivocation rate {self.re2} exceeds r2 {self.r2}")

    def as_tuple(self):
        return (self.r1, self.r2, self.re2)

    def as_dict(self):
        return {"r1": self.r1, "r2": self.r2, "re2": self.re2}


def _require_full(joint: JointDistribution):
    missing = [n for n in JOINT_NAMES if n not in joint]
    if missing:
        raise DomainError(f"joint is missing variables {missing}")


def mi_terms(joint: JointDistribution, cross_check: bool = False) -> np.ndarray:
    """The nine MI terms of ``TERMS`` as an array.

    With ``cross_check`` each term is also computed by the direct
    log-ratio expectation and must agree within ``CROSS_CHECK_TOL``.
    """
    _require_full(joint)
    out = np.empty(len(TERMS))
    for k, (name, a, b, c) in enumerate(TERMS):
        out[k] = conditional_mi(joint, a, b, c)
        if cross_check:
            direct = conditional_mi_direct(joint, a, b, c)
            if abs(direct - out[k]) > CROSS_CHECK_TOL:
                raise ConsistencyError(f"{name}: entropy route {out[k]!r} vs direct route {direct!r}")
    return out


def inner_from_terms(t: np.ndarray) -> np.ndarray:
    """Clamped inner-bound triples from term arrays of shape (..., 9)."""
    t = np.asarray(t)
    r1 = np.maximum(0.0, t[..., T_UX1_Y1] - t[..., T_UX1_S])
    r2 = np.maximum(0.0, t[..., T_V_Y2] - t[..., T_V_UX1S])
    sec = t[..., T_V_Y2] - np.maximum(t[..., T_V_UX1S], t[..., T_V_UX1Y1])
    re2 = np.minimum(r2, np.maximum(0.0, sec))
    return np.stack([r1, r2, re2], axis=-1)


def outer_from_terms(t: np.ndarray) -> np.ndarray:
    """Clamped outer-bound triples from term arrays of shape (..., 9)."""
    t = np.asarray(t)
    r1 = np.maximum(0.0, t[..., T_UX1_Y1] - t[..., T_UX1_S])
    r2 = np.maximum(0.0, t[..., T_X2_Y2_X1S])
    sec = np.minimum(
        t[..., T_X2_Y2_X1S] - t[..., T_X2_Y1_X1S],
        t[..., T_X2_Y2_UX1S] - t[..., T_X2_Y1_UX1S],
    )
    re2 = np.minimum(r2, np.maximum(0.0, sec))
    return np.stack([r1, r2, re2], axis=-1)


def _triple(row) -> RateTriple:
    return RateTriple(float(row[0]), float(row[1]), float(row[2]))


def inner_bound_point(joint: JointDistribution, cross_check: bool = False) -> RateTriple:
    return _triple(inner_from_terms(mi_terms(joint, cross_check)))


def outer_bound_point(joint: JointDistribution, cross_check: bool = False) -> RateTriple:
    return _triple(outer_from_terms(mi_terms(joint, cross_check)))


def inner_unclamped(joint: JointDistribution) -> tuple[float, float, float]:
    """Raw right-hand sides of the three inner-bound inequalities."""
    t = mi_terms(joint)
    return (
        t[T_UX1_Y1] - t[T_UX1_S],
        t[T_V_Y2] - t[T_V_UX1S],
        t[T_V_Y2] - max(t[T_V_UX1S], t[T_V_UX1Y1]),
    )


def reduce_no_secrecy(spec: ChannelSpec, policy: AuxiliaryPolicy) -> tuple[float, float]:
    """(R1, R2) limits with the secrecy constraint dropped."""
    p = inner_bound_point(build_joint(spec, policy))
    return p.r1, p.r2


def reduce_no_state(spec: ChannelSpec, policy: AuxiliaryPolicy) -> RateTriple:
    """Inner bound for a stateless channel (|S| = 1), where all S terms vanish."""
    if spec.n_s != 1:
        raise DomainError(f"reduce_no_state requires |S| = 1, got |S| = {spec.n_s}")
    return inner_bound_point(build_joint(spec, policy))


class Regime(enum.Enum):
    STATE_DOMINANT = "StateDominant"
    OUTPUT_DOMINANT = "OutputDominant"


@dataclass(frozen=True)
class CaseSplit:
    regime: Regime
    state_term: float
    output_term: float
    remark_pair: tuple[float, float] | None = None


def case_split(joint: JointDistribution) -> CaseSplit:
    """Classify by which subtrahend dominates the equivocation bound.

    StateDominant when I(V;U,X1,S) exceeds I(V;U,X1,Y1) by more than
    ``TIE_TOL``; otherwise OutputDominant, with the rate pair
    (I(U,X1;Y1) - I(U,X1;S), I(V;Y2) - I(V;U,X1,Y1)).
    """
    t = mi_terms(joint)
    state, output = float(t[T_V_UX1S]), float(t[T_V_UX1Y1])
    if state > output + TIE_TOL:
        return CaseSplit(Regime.STATE_DOMINANT, state, output)
    pair = (float(t[T_UX1_Y1] - t[T_UX1_S]), float(t[T_V_Y2] - t[T_V_UX1Y1]))
    return CaseSplit(Regime.OUTPUT_DOMINANT, state, output, pair)

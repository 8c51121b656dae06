"""Small named channels and policies used by tests, examples and the CLI."""
from __future__ import annotations

import numpy as np

from .channel import AuxiliaryPolicy, ChannelSpec


def bsc(flip: float) -> np.ndarray:
    """Binary symmetric transition matrix [input, output]."""
    return np.array([[1 - flip, flip], [flip, 1 - flip]])


def _kernel_from(ns, nx1, nx2, ny1, ny2, law):
    """Build a kernel from ``law(s, x1, x2) -> (P(y1), P(y2))`` with y1, y2 independent given inputs."""
    k = np.zeros((ns, nx1, nx2, ny1, ny2))
    for s in range(ns):
        for a in range(nx1):
            for b in range(nx2):
                p1, p2 = law(s, a, b)
                k[s, a, b] = np.outer(p1, p2)
    return k


def noiseless_orthogonal() -> ChannelSpec:
    """Y1 = X1 and Y2 = X2, binary, no state."""
    eye = np.eye(2)
    return ChannelSpec([1.0], _kernel_from(1, 2, 2, 2, 2, lambda s, a, b: (eye[a], eye[b])))


def bsc_pair(flip1: float, flip2: float) -> ChannelSpec:
    """Y1 = X1 through BSC(flip1), Y2 = X2 through BSC(flip2), no state."""
    m1, m2 = bsc(flip1), bsc(flip2)
    return ChannelSpec([1.0], _kernel_from(1, 2, 2, 2, 2, lambda s, a, b: (m1[a], m2[b])))


def wiretap(flip: float = 0.25) -> ChannelSpec:
    """Degraded wiretap: |X1| = |S| = 1, Y2 = X2, Y1 = X2 through BSC(flip)."""
    eye, m = np.eye(2), bsc(flip)
    return ChannelSpec([1.0], _kernel_from(1, 1, 2, 2, 2, lambda s, a, b: (m[b], eye[b])))


def pure_noise(n: int = 2) -> ChannelSpec:
    """Both outputs uniform and independent of every input."""
    u = np.full(n, 1.0 / n)
    return ChannelSpec([1.0], _kernel_from(1, n, n, n, n, lambda s, a, b: (u, u)))


def noisy_eavesdropper(flip2: float = 0.0) -> ChannelSpec:
    """|X1| = |S| = 1; Y1 is pure noise, Y2 = X2 through BSC(flip2)."""
    u, m = np.full(2, 0.5), bsc(flip2)
    return ChannelSpec([1.0], _kernel_from(1, 1, 2, 2, 2, lambda s, a, b: (u, m[b])))


def xor_interference(y2_flip: float = 0.1) -> ChannelSpec:
    """No state: Y1 = X1 xor X2 (the primary hears the cognitive input), Y2 = X2 through BSC(y2_flip)."""
    eye, m = np.eye(2), bsc(y2_flip)
    return ChannelSpec([1.0], _kernel_from(1, 2, 2, 2, 2, lambda s, a, b: (eye[a ^ b], m[b])))


def dirty_paper_mod2(y2_flip: float = 0.0) -> ChannelSpec:
    """Binary mod-2 state: S uniform, Y1 = X1 xor X2 xor S, Y2 = X2 through BSC(y2_flip).

    The cognitive encoder knows S and can cancel it on the primary link by
    sending X2 = S.
    """
    eye, m = np.eye(2), bsc(y2_flip)
    return ChannelSpec([0.5, 0.5], _kernel_from(2, 2, 2, 2, 2, lambda s, a, b: (eye[a ^ b ^ s], m[b])))


def mod2_state_only() -> ChannelSpec:
    """Y1 = X1 xor S with no X2 term on the primary link; Y2 = X2. S uniform."""
    eye = np.eye(2)
    return ChannelSpec([0.5, 0.5], _kernel_from(2, 2, 2, 2, 2, lambda s, a, b: (eye[a ^ s], eye[b])))


def state_bsc(flip: float = 0.1) -> ChannelSpec:
    """S uniform switches the primary link between BSC(flip) and BSC(1/2); Y2 = X2 xor S."""
    m, half, eye = bsc(flip), bsc(0.5), np.eye(2)
    return ChannelSpec(
        [0.5, 0.5],
        _kernel_from(2, 2, 2, 2, 2, lambda s, a, b: ((m if s == 0 else half)[a], eye[b ^ s])),
    )


CHANNELS = {
    "noiseless": noiseless_orthogonal,
    "bsc-pair": lambda: bsc_pair(0.1, 0.1),
    "wiretap": wiretap,
    "pure-noise": pure_noise,
    "noisy-eavesdropper": noisy_eavesdropper,
    "xor-interference": xor_interference,
    "dirty-paper": dirty_paper_mod2,
    "mod2-state-only": mod2_state_only,
    "state-bsc": state_bsc,
}


def uniform_split_policy(spec: ChannelSpec) -> AuxiliaryPolicy:
    """X1 uniform, U constant, V = X2 uniform and independent of (S, X1)."""
    ns, nx1, nx2 = spec.n_s, spec.n_x1, spec.n_x2
    cond = np.zeros((ns, nx1, 1, nx2, nx2))
    for x in range(nx2):
        cond[:, :, 0, x, x] = 1.0 / nx2
    return AuxiliaryPolicy(np.full(nx1, 1.0 / nx1), cond)


def state_cancel_policy(spec: ChannelSpec) -> AuxiliaryPolicy:
    """X1 uniform, U and V constant, X2 = S (requires |X2| >= |S|)."""
    ns, nx1, nx2 = spec.n_s, spec.n_x1, spec.n_x2
    cond = np.zeros((ns, nx1, 1, 1, nx2))
    for s in range(ns):
        cond[s, :, 0, 0, s] = 1.0
    return AuxiliaryPolicy(np.full(nx1, 1.0 / nx1), cond)


def constant_policy(spec: ChannelSpec, n_u: int = 1, n_v: int = 1) -> AuxiliaryPolicy:
    """Everything deterministic at symbol 0."""
    cond = np.zeros((spec.n_s, spec.n_x1, n_u, n_v, spec.n_x2))
    cond[..., 0, 0, 0] = 1.0
    px1 = np.zeros(spec.n_x1)
    px1[0] = 1.0
    return AuxiliaryPolicy(px1, cond)


POLICIES = {
    "uniform-split": uniform_split_policy,
    "state-cancel": state_cancel_policy,
    "constant": constant_policy,
}

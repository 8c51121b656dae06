import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cogsec.errors import ConsistencyError, DomainError, ResourceError
from cogsec.probability import (
    JointDistribution,
    binary_entropy,
    check_cells,
    conditional_mi,
    conditional_mi_direct,
    csiszar_sum_check,
    csiszar_sums,
    entropy,
    mutual_information,
    random_pmf,
)

seeds = st.integers(0, 2**32 - 1)


def four_var(seed, cards=(2, 3, 2, 2)):
    rng = np.random.default_rng(seed)
    return JointDistribution(("A", "B", "C", "D"), random_pmf(rng, cards))


def bsc_joint(flip):
    # X uniform, Y = X through BSC(flip)
    m = np.array([[1 - flip, flip], [flip, 1 - flip]]) / 2
    return JointDistribution(("X", "Y"), m)


# --- closed forms ---------------------------------------------------------------


def test_binary_entropy_values():
    assert binary_entropy(0.25) == pytest.approx(0.811278124459, abs=1e-9)
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(0.5) == 1.0


def test_bsc_mutual_information():
    j = bsc_joint(0.1)
    assert mutual_information(j, "X", "Y") == pytest.approx(1 - binary_entropy(0.1), abs=1e-12)


def test_uniform_entropy():
    j = JointDistribution(("X",), np.full(8, 1 / 8))
    assert entropy(j, "X") == pytest.approx(3.0, abs=1e-12)


def test_independent_mi_is_zero():
    m = np.outer([0.3, 0.7], [0.2, 0.5, 0.3])
    j = JointDistribution(("X", "Y"), m)
    assert mutual_information(j, "X", "Y") == 0.0


def test_conditional_mi_independent_condition():
    # C independent of (A, B): I(A;B|C) = I(A;B)
    rng = np.random.default_rng(5)
    ab = random_pmf(rng, (2, 3))
    m = ab[:, :, None] * np.array([0.4, 0.6])[None, None, :]
    j = JointDistribution(("A", "B", "C"), m)
    assert conditional_mi(j, "A", "B", "C") == pytest.approx(mutual_information(j, "A", "B"), abs=1e-12)


def test_xor_conditional_dependence():
    # A, B fair and independent, C = A xor B: I(A;B) = 0, I(A;B|C) = 1
    m = np.zeros((2, 2, 2))
    for a in range(2):
        for b in range(2):
            m[a, b, a ^ b] = 0.25
    j = JointDistribution(("A", "B", "C"), m)
    assert mutual_information(j, "A", "B") == 0.0
    assert conditional_mi(j, "A", "B", "C") == pytest.approx(1.0, abs=1e-12)


# --- joint object ---------------------------------------------------------------


def test_rejects_bad_mass():
    with pytest.raises(DomainError):
        JointDistribution(("X",), [0.5, 0.6])
    with pytest.raises(DomainError):
        JointDistribution(("X",), [1.2, -0.2])
    with pytest.raises(DomainError):
        JointDistribution(("X", "X"), np.full((2, 2), 0.25))


def test_unknown_variable():
    j = bsc_joint(0.2)
    with pytest.raises(DomainError):
        j.marginalize(["Z"])
    with pytest.raises(DomainError):
        entropy(j, ["Z"])


def test_marginalize_keep_order_and_empty():
    j = four_var(3)
    m = j.marginalize(["C", "A"])
    assert m.names == ("C", "A")
    np.testing.assert_allclose(m.mass, j.mass.sum(axis=(1, 3)).T, atol=1e-15)
    assert j.marginalize({"C", "A"}).names == ("A", "C")
    with pytest.raises(DomainError):
        j.marginalize([])


def test_mass_is_read_only():
    j = bsc_joint(0.1)
    with pytest.raises(ValueError):
        j.mass[0, 0] = 1.0


def test_condition_slices():
    j = four_var(4)
    c = j.condition({"B": 1})
    ref = j.mass[:, 1] / j.mass[:, 1].sum()
    np.testing.assert_allclose(c.mass, ref, atol=1e-15)
    assert c.names == ("A", "C", "D")


def test_overlapping_arguments_rejected():
    j = four_var(1)
    with pytest.raises(DomainError):
        mutual_information(j, ["A", "B"], ["B"])
    with pytest.raises(DomainError):
        conditional_mi(j, "A", "B", ["A"])


def test_cell_cap(monkeypatch):
    monkeypatch.setenv("COGSEC_MAX_CELLS", "100")
    with pytest.raises(ResourceError):
        check_cells((10, 11))
    check_cells((10, 10))


def test_large_negative_mi_raises():
    from cogsec.probability import _clamp

    assert _clamp(-5e-13, "x") == 0.0
    with pytest.raises(ConsistencyError):
        _clamp(-1e-9, "x")


# --- properties -------------------------------------------------------------------


@given(seeds)
def test_mi_symmetric_and_nonnegative(seed):
    j = four_var(seed)
    ab = mutual_information(j, ["A"], ["B", "C"])
    ba = mutual_information(j, ["B", "C"], ["A"])
    assert ab >= 0
    assert abs(ab - ba) <= 1e-12


@given(seeds)
def test_chain_rule(seed):
    # I(A; B,C) = I(A;B) + I(A;C|B), each side from separate entropy evaluations
    j = four_var(seed)
    h = lambda *v: entropy(j, v)
    lhs = h("A") + h("B", "C") - h("A", "B", "C")
    rhs = (h("A") + h("B") - h("A", "B")) + (h("A", "B") + h("C", "B") - h("A", "B", "C") - h("B"))
    assert abs(lhs - rhs) <= 1e-12
    assert abs(mutual_information(j, "A", ["B", "C"]) - lhs) <= 1e-12


@given(seeds)
def test_two_routes_agree(seed):
    j = four_var(seed)
    a = conditional_mi(j, ["A"], ["B"], ["C", "D"])
    b = conditional_mi_direct(j, ["A"], ["B"], ["C", "D"])
    assert abs(a - b) <= 1e-12


@given(seeds)
def test_entropy_bounds(seed):
    j = four_var(seed)
    hb = entropy(j, "B")
    assert -1e-12 <= hb <= math.log2(3) + 1e-12
    assert entropy(j, ["A", "B"]) >= hb - 1e-12


@given(seeds)
def test_conditioning_reduces_entropy(seed):
    j = four_var(seed)
    assert entropy(j, ["A", "B"]) - entropy(j, "B") <= entropy(j, "A") + 1e-12


# --- Csiszar sum identity ----------------------------------------------------


def seq_joint(seed, n):
    rng = np.random.default_rng(seed)
    names = [f"y1_{i}" for i in range(1, n + 1)] + [f"y2_{i}" for i in range(1, n + 1)]
    return JointDistribution(names, random_pmf(rng, (2,) * (2 * n)))


@given(seeds, st.sampled_from([2, 3]))
def test_csiszar_identity(seed, n):
    assert csiszar_sum_check(seq_joint(seed, n)) <= 1e-9


def test_csiszar_iid_pairs_zero():
    # independent sequences: both sides vanish
    m = np.full((2,) * 4, 1 / 16)
    j = JointDistribution(["y1_1", "y1_2", "y2_1", "y2_2"], m)
    left, right = csiszar_sums(j)
    assert left == right == 0.0


def test_csiszar_bad_labels():
    j = JointDistribution(["a", "b"], np.full((2, 2), 0.25))
    with pytest.raises(DomainError):
        csiszar_sums(j)

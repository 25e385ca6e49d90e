import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bdlab.errors import ArityError, DimensionError, InvalidBoundError
from bdlab.measure import (
    AtomSet,
    AtomSpace,
    L1Fun,
    abs_join,
    pos_excess,
    restrict_norm,
    weighted_norm,
)


def counting(n):
    return AtomSpace.counting(n)


class TestAtomSpace:
    def test_counting_weights_must_be_one(self):
        with pytest.raises(InvalidBoundError):
            AtomSpace(np.array([1.0, 2.0]), "counting")

    def test_probability_weights_must_sum_to_one(self):
        with pytest.raises(InvalidBoundError):
            AtomSpace(np.array([0.5, 0.6]), "probability")
        AtomSpace(np.array([0.5, 0.5]), "probability")

    def test_positive_weights(self):
        with pytest.raises(InvalidBoundError):
            AtomSpace(np.array([1.0, 0.0]), "counting")

    def test_json_round_trip(self):
        sp = AtomSpace(np.array([0.25, 0.75]), "probability")
        again = AtomSpace.from_json(sp.to_json())
        assert again.kind == sp.kind
        assert np.array_equal(again.weights, sp.weights)

    def test_fun_json_round_trip(self):
        f = L1Fun(np.array([1.0, -2.5, 1e-17]))
        assert np.array_equal(L1Fun.from_json(f.to_json()).values, f.values)


class TestWeightedNorm:
    def test_counting_l1(self):
        assert weighted_norm(counting(2), L1Fun(np.array([3.0, 4.0])), 1) == 7.0

    def test_probability_l2_unit(self):
        sp = AtomSpace(np.array([0.5, 0.5]), "probability")
        assert weighted_norm(sp, L1Fun(np.array([1.0, -1.0])), 2) == 1.0

    def test_rademacher_pair_mean(self):
        # E|r1 + r2| over the four sign atoms.
        sp = AtomSpace(np.full(4, 0.25), "probability")
        assert weighted_norm(sp, L1Fun(np.array([2.0, 0.0, 0.0, -2.0])), 1) == 1.0

    def test_linf(self):
        assert weighted_norm(counting(3), L1Fun(np.array([1.0, -5.0, 2.0])), math.inf) == 5.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            weighted_norm(counting(2), L1Fun(np.array([1.0])), 1)


class TestPosExcess:
    def test_dominating_bound(self):
        sp = counting(2)
        assert pos_excess(sp, L1Fun(np.array([1.0, 1.0])), L1Fun(np.array([1.0, 1.0]))) == 0.0

    def test_partial_excess(self):
        sp = counting(2)
        assert pos_excess(sp, L1Fun(np.array([2.0, 0.0])), L1Fun(np.array([0.5, 0.0]))) == 1.5

    def test_zero_function(self):
        sp = counting(3)
        g = L1Fun(np.array([0.3, 0.0, 7.0]))
        assert pos_excess(sp, L1Fun(np.zeros(3)), g) == 0.0

    def test_negative_bound_rejected(self):
        sp = counting(2)
        with pytest.raises(InvalidBoundError):
            pos_excess(sp, L1Fun(np.zeros(2)), L1Fun(np.array([-0.1, 0.0])))


class TestAbsJoin:
    def test_single(self):
        assert np.array_equal(abs_join([L1Fun(np.array([1.0, -2.0]))]).values, [1.0, 2.0])

    def test_pair(self):
        out = abs_join([L1Fun(np.array([1.0, 0.0])), L1Fun(np.array([0.0, 1.0]))])
        assert np.array_equal(out.values, [1.0, 1.0])

    def test_pointwise(self):
        out = abs_join([L1Fun(np.array([1.0, -3.0])), L1Fun(np.array([-2.0, 2.0]))])
        assert np.array_equal(out.values, [2.0, 3.0])

    def test_empty_rejected(self):
        with pytest.raises(ArityError):
            abs_join([])


class TestRestrictNorm:
    def test_empty_set(self):
        assert restrict_norm(counting(2), L1Fun(np.array([1.0, 1.0])), AtomSet(())) == 0.0

    def test_singleton(self):
        assert restrict_norm(counting(2), L1Fun(np.array([1.0, 1.0])), AtomSet((0,))) == 1.0

    def test_probability_weights(self):
        sp = AtomSpace(np.array([0.5, 0.5]), "probability")
        assert restrict_norm(sp, L1Fun(np.array([2.0, -2.0])), AtomSet((0, 1))) == 2.0

    def test_out_of_range(self):
        with pytest.raises(DimensionError):
            restrict_norm(counting(2), L1Fun(np.array([1.0, 1.0])), AtomSet((5,)))

    def test_atomset_sorted(self):
        with pytest.raises(DimensionError):
            AtomSet((3, 1))


vecs = arrays(np.float64, 6, elements=st.floats(-100, 100))


@settings(max_examples=100, deadline=None)
@given(vecs, vecs)
def test_triangle_inequality(a, b):
    sp = counting(6)
    lhs = weighted_norm(sp, L1Fun(a + b), 1)
    rhs = weighted_norm(sp, L1Fun(a), 1) + weighted_norm(sp, L1Fun(b), 1)
    assert lhs <= rhs + 1e-9


@settings(max_examples=100, deadline=None)
@given(
    vecs,
    arrays(np.float64, 6, elements=st.floats(0, 50)),
    arrays(np.float64, 6, elements=st.floats(0, 50)),
)
def test_pos_excess_antitone_in_bound(f, g, bump):
    sp = counting(6)
    lo = pos_excess(sp, L1Fun(f), L1Fun(g))
    hi = pos_excess(sp, L1Fun(f), L1Fun(g + bump))
    assert hi <= lo + 1e-9


@settings(max_examples=100, deadline=None)
@given(vecs)
def test_disjoint_decomposition(f):
    sp = counting(6)
    E, F = AtomSet((0, 2)), AtomSet((1, 5))
    union = AtomSet.union([E, F])
    total = restrict_norm(sp, L1Fun(f), union)
    split = restrict_norm(sp, L1Fun(f), E) + restrict_norm(sp, L1Fun(f), F)
    assert abs(total - split) <= 1e-9


@settings(max_examples=100, deadline=None)
@given(vecs)
def test_excess_over_own_join_vanishes(f):
    sp = counting(6)
    assert pos_excess(sp, L1Fun(f), abs_join([L1Fun(f)])) == 0.0

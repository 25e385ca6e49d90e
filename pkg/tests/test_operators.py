import numpy as np
import pytest

from bdlab.errors import ContractError, DimensionError, ScaleError
from bdlab.measure import AtomSpace, L1Fun, weighted_norm
from bdlab.operators import (
    DomainShape,
    ExtremePoint,
    FiniteOperator,
    apply_operator,
    extreme_points,
    identity_operator,
    operator_norm,
    triangle_norm_bound,
)


def sign_operator_m1():
    """Columns -1/2, +1/2 on a single atom; two size-1 blocks."""
    return FiniteOperator(DomainShape((1, 1)), AtomSpace.counting(1), np.array([[-0.5, 0.5]]))


class TestApply:
    def test_identity_basis_vector(self):
        T = identity_operator(2)
        out = apply_operator(T, np.array([1.0, 0.0]))
        assert np.array_equal(out.values, [1.0, 0.0])

    def test_extreme_point_sign(self):
        T = FiniteOperator(DomainShape((2,)), AtomSpace.counting(2), np.eye(2))
        out = apply_operator(T, ExtremePoint((1,), (-1,)))
        assert np.array_equal(out.values, [0.0, -1.0])

    def test_column_sum(self):
        T = FiniteOperator(
            DomainShape((1, 1)), AtomSpace.counting(2), np.array([[1.0, 1.0], [1.0, -1.0]])
        )
        out = apply_operator(T, np.array([1.0, 1.0]))
        assert np.array_equal(out.values, [2.0, 0.0])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            apply_operator(identity_operator(2), np.array([1.0]))


class TestExtremePoints:
    def test_counts(self):
        assert len(list(extreme_points(DomainShape((1,))))) == 2
        assert len(list(extreme_points(DomainShape((2,))))) == 4
        assert len(list(extreme_points(DomainShape((1, 1, 1))))) == 8

    def test_distinct_and_lexicographic(self):
        pts = list(extreme_points(DomainShape((2, 3))))
        assert len(pts) == len(set((p.coords, p.signs) for p in pts)) == 12
        keys = [
            tuple(2 * c + (0 if s == 1 else 1) for c, s in zip(p.coords, p.signs))
            for p in pts
        ]
        assert keys == sorted(keys)

    def test_cap(self):
        with pytest.raises(ScaleError):
            list(extreme_points(DomainShape((2,) * 30), cap=2**10))


class TestOperatorNorm:
    def test_identity(self):
        for n in (1, 3, 7):
            assert operator_norm(identity_operator(n)) == pytest.approx(1.0, abs=1e-12)

    def test_sign_operator(self):
        assert operator_norm(sign_operator_m1()) == pytest.approx(1.0, abs=1e-12)

    def test_single_column(self):
        f = np.array([0.3, -1.2, 0.5])
        T = FiniteOperator(DomainShape((1,)), AtomSpace.counting(3), f[:, None])
        assert operator_norm(T) == pytest.approx(2.0, abs=1e-12)

    def test_search_is_lower_bound(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            T = FiniteOperator(
                DomainShape((2, 3)), AtomSpace.counting(4), rng.standard_normal((4, 5))
            )
            exact = operator_norm(T, "exact")
            found = operator_norm(T, "search", seed=trial)
            assert found <= exact + 1e-9

    def test_search_matches_exact_on_small_shapes(self):
        # 100 random operators on shapes with at most 2^10 extreme points.
        rng = np.random.default_rng(7)
        shapes = [(2, 2), (4,), (1, 1, 1, 1), (3, 2, 2), (8, 8)]
        for trial in range(100):
            shape = DomainShape(shapes[trial % len(shapes)])
            T = FiniteOperator(
                shape, AtomSpace.counting(3), rng.standard_normal((3, shape.total_dim))
            )
            exact = operator_norm(T, "exact")
            found = operator_norm(T, "search", seed=trial)
            assert found == pytest.approx(exact, abs=1e-9)

    def test_triangle_bound_dominates(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            T = FiniteOperator(
                DomainShape((2, 1, 3)), AtomSpace.counting(5), rng.standard_normal((5, 6))
            )
            assert operator_norm(T) <= triangle_norm_bound(T) + 1e-9

    def test_symmetric_mode_needs_flag(self):
        with pytest.raises(ContractError):
            operator_norm(identity_operator(2), "symmetric")

    def test_cap_raises(self):
        T = FiniteOperator(
            DomainShape((2,) * 30),
            AtomSpace.counting(1),
            np.zeros((1, 60)),
        )
        with pytest.raises(ScaleError):
            operator_norm(T, "exact")


class TestJson:
    def test_bit_exact_round_trip(self):
        rng = np.random.default_rng(11)
        T = FiniteOperator(
            DomainShape((2, 3)),
            AtomSpace.counting(4),
            rng.standard_normal((4, 5)) * np.pi,
            symmetric_entries=False,
        )
        again = FiniteOperator.from_json(T.to_json())
        assert np.array_equal(again.columns, T.columns)
        assert again.domain == T.domain
        assert np.array_equal(again.range.weights, T.range.weights)

    def test_probability_range_round_trip(self):
        sp = AtomSpace(np.array([1.0 / 3, 2.0 / 3]), "probability")
        T = FiniteOperator(DomainShape((1,)), sp, np.array([[0.1], [0.2]]), True)
        again = FiniteOperator.from_json(T.to_json())
        assert again.symmetric_entries
        assert np.array_equal(again.range.weights, sp.weights)
        assert np.array_equal(again.columns, T.columns)

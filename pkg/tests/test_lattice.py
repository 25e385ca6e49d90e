import numpy as np
import pytest

from bdlab.errors import ContractError, ScaleError
from bdlab.lattice import (
    l1_equivalence,
    l1_equivalence_grid,
    lattice_factorize_approx,
    lattice_factorize_exact,
    min_approx_lattice_bound,
    verify_lattice_bound,
)
from bdlab.measure import AtomSpace, L1Fun, abs_join, pos_excess, weighted_norm
from bdlab.operators import (
    DomainShape,
    FiniteOperator,
    apply_operator,
    extreme_points,
    identity_operator,
)
from bdlab.rademacher import build_rademacher_operator


def funs(*rows):
    return [L1Fun(np.asarray(r, dtype=float)) for r in rows]


class TestL1Equivalence:
    def test_isometric_basis(self):
        cert = l1_equivalence(AtomSpace.counting(2), funs([1, 0], [0, 1]))
        assert cert.lower == pytest.approx(1.0, abs=1e-9)
        assert cert.upper == pytest.approx(1.0, abs=1e-9)

    def test_haar_pair(self):
        # ||a f1 + b f2|| = 2 max(|a|,|b|): minimum 1 at |a| = |b| = 1/2.
        cert = l1_equivalence(AtomSpace.counting(2), funs([1, 1], [1, -1]))
        assert cert.lower == pytest.approx(1.0, abs=1e-6)
        assert cert.upper == pytest.approx(2.0, abs=1e-12)
        assert np.abs(cert.minimizer).sum() == pytest.approx(1.0, abs=1e-9)
        assert abs(cert.minimizer[0]) == pytest.approx(0.5, abs=1e-6)

    def test_degenerate(self):
        cert = l1_equivalence(AtomSpace.counting(2), funs([1, 0], [1, 0]))
        assert cert.lower == pytest.approx(0.0, abs=1e-9)

    def test_matches_grid_oracle(self):
        rng = np.random.default_rng(2)
        sp = AtomSpace.counting(5)
        for k in (2, 3):
            for trial in range(4):
                fs = funs(*(rng.standard_normal(5) for _ in range(k)))
                cert = l1_equivalence(sp, fs)
                grid = l1_equivalence_grid(sp, fs, step=1e-3)
                assert cert.lower <= grid + 1e-9
                assert cert.lower == pytest.approx(grid, abs=2e-3)

    def test_disjoint_unit_norms(self):
        sp = AtomSpace.counting(4)
        cert = l1_equivalence(sp, funs([1, 0, 0, 0], [0, 0, -1, 0]))
        assert cert.lower == pytest.approx(1.0, abs=1e-9)
        assert cert.upper == pytest.approx(1.0, abs=1e-9)

    def test_cap(self):
        sp = AtomSpace.counting(1)
        with pytest.raises(ScaleError):
            l1_equivalence(sp, funs(*([[1.0]] * 17)))


class TestMinApproxLatticeBound:
    def test_identity_eps_one(self):
        cert = min_approx_lattice_bound(identity_operator(2), 1.0)
        assert cert.C == pytest.approx(0.0, abs=1e-7)

    def test_identity_eps_half(self):
        cert = min_approx_lattice_bound(identity_operator(2), 0.5)
        assert cert.C == pytest.approx(1.0, abs=1e-6)
        assert np.allclose(cert.g.values, [0.5, 0.5], atol=1e-6)
        assert not cert.failed

    def test_huge_eps_gives_zero(self):
        rng = np.random.default_rng(0)
        T = FiniteOperator(DomainShape((3,)), AtomSpace.counting(2), rng.standard_normal((2, 3)))
        from bdlab.operators import operator_norm

        cert = min_approx_lattice_bound(T, operator_norm(T) + 0.1)
        assert cert.C == pytest.approx(0.0, abs=1e-7)

    def test_round_trip_excess(self):
        rng = np.random.default_rng(4)
        for trial in range(5):
            T = FiniteOperator(
                DomainShape((2, 2)), AtomSpace.counting(3), rng.standard_normal((3, 4))
            )
            eps = 0.3
            cert = min_approx_lattice_bound(T, eps)
            check = verify_lattice_bound(T, cert.g, eps)
            assert check.worst_excess <= eps + 1e-6

    def test_cost_nonincreasing_in_eps(self):
        rng = np.random.default_rng(9)
        T = FiniteOperator(DomainShape((3,)), AtomSpace.counting(3), rng.standard_normal((3, 3)))
        costs = [min_approx_lattice_bound(T, eps).C for eps in (0.1, 0.3, 0.6, 1.0, 1.5)]
        for a, b in zip(costs, costs[1:]):
            assert b <= a + 1e-6


class TestVerifyLatticeBound:
    def test_dominating_join(self):
        rng = np.random.default_rng(1)
        T = FiniteOperator(DomainShape((2, 2)), AtomSpace.counting(3), rng.standard_normal((3, 4)))
        # Sum of per-block joins dominates every extreme image.
        per_block = []
        off = 0
        for b in T.domain.blocks:
            per_block.append(abs_join([L1Fun(T.columns[:, off + j]) for j in range(b)]))
            off += b
        g = L1Fun(sum(f.values for f in per_block))
        check = verify_lattice_bound(T, g, 0.0)
        assert check.worst_excess <= 1e-12

    def test_zero_bound_identity(self):
        check = verify_lattice_bound(identity_operator(2), L1Fun(np.zeros(2)), 0.0)
        assert check.worst_excess == pytest.approx(1.0, abs=1e-12)
        assert check.exact

    def test_sign_pattern_operator_m4(self):
        # Constant bound C/m with C = 2 leaves excess at most eps = 1/C.
        T = build_rademacher_operator(4).materialize()
        g = L1Fun(np.full(4, 2.0 / 4))
        check = verify_lattice_bound(T, g, 0.5)
        assert check.exact
        assert check.worst_excess <= 0.5 + 1e-12

    def test_sampling_fallback_flagged(self):
        T = FiniteOperator(
            DomainShape((2,) * 30), AtomSpace.counting(2), np.zeros((2, 60))
        )
        check = verify_lattice_bound(T, L1Fun(np.zeros(2)), 0.0, samples=500)
        assert not check.exact
        assert check.worst_excess == 0.0


class TestFactorizeExact:
    def test_zero_operator(self):
        T = FiniteOperator(DomainShape((2,)), AtomSpace.counting(2), np.zeros((2, 2)))
        fact = lattice_factorize_exact(T, L1Fun(np.zeros(2)), eta=1e-6)
        assert fact.right_norm == pytest.approx(2e-6, abs=1e-12)
        assert fact.max_column_residual <= 1e-9

    def test_identity_with_unit_bound(self):
        T = identity_operator(2)
        fact = lattice_factorize_exact(T, L1Fun(np.ones(2)), eta=1e-6)
        assert fact.right_norm == pytest.approx(2.0, abs=1e-5)
        assert fact.left_sup_norm <= 1.0 + 1e-9
        recon = fact.left.columns * fact.multiplier.values[:, None]
        assert np.allclose(recon, T.columns, atol=1e-9)

    def test_single_column_equal_to_bound(self):
        g = np.array([0.5, 1.5])
        T = FiniteOperator(DomainShape((1,)), AtomSpace.counting(2), g[:, None])
        fact = lattice_factorize_exact(T, L1Fun(g))
        assert np.all(fact.left.columns <= 1.0)
        assert fact.left.columns.min() >= 0.99

    def test_rejects_non_bound(self):
        with pytest.raises(ContractError):
            lattice_factorize_exact(identity_operator(2), L1Fun(np.zeros(2)))


class TestFactorizeApprox:
    def test_already_within_bound(self):
        T = identity_operator(2)
        out = lattice_factorize_approx(T, L1Fun(np.ones(2)), 0.0)
        assert np.array_equal(out.operator.columns, T.columns)
        assert out.deviation == 0.0

    def test_clamp(self):
        T = FiniteOperator(DomainShape((1,)), AtomSpace.counting(2), np.array([[2.0], [0.0]]))
        out = lattice_factorize_approx(T, L1Fun(np.ones(2)), 1.0)
        assert np.array_equal(out.operator.columns, [[1.0], [0.0]])
        assert out.deviation == pytest.approx(1.0, abs=1e-12)
        assert out.cert.worst_excess == 0.0

    def test_zero_bound(self):
        rng = np.random.default_rng(3)
        cols = rng.standard_normal((3, 4))
        T = FiniteOperator(DomainShape((4,)), AtomSpace.counting(3), cols)
        eps = float(np.abs(cols).sum(axis=0).max())
        out = lattice_factorize_approx(T, L1Fun(np.zeros(3)), eps)
        assert np.all(out.operator.columns == 0.0)

    def test_multi_block_rejected(self):
        T = FiniteOperator(DomainShape((1, 1)), AtomSpace.counting(2), np.eye(2))
        with pytest.raises(ContractError):
            lattice_factorize_approx(T, L1Fun(np.ones(2)), 1.0)

    def test_norm_identity_on_one_block(self):
        # On a single l1 block the operator distance equals the worst column
        # distance; cross-check by extreme-point enumeration.
        rng = np.random.default_rng(8)
        cols = rng.standard_normal((3, 4))
        T = FiniteOperator(DomainShape((4,)), AtomSpace.counting(3), cols)
        g = L1Fun(np.abs(cols).max(axis=1) * 0.6)
        eps = float(
            np.maximum(np.abs(cols) - g.values[:, None], 0.0).sum(axis=0).max()
        )
        out = lattice_factorize_approx(T, g, eps + 1e-12)
        diff = FiniteOperator(T.domain, T.range, T.columns - out.operator.columns)
        worst = max(
            weighted_norm(T.range, apply_operator(diff, x), 1)
            for x in extreme_points(T.domain)
        )
        assert worst == pytest.approx(out.deviation, abs=1e-12)

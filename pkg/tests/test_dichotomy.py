import numpy as np
import pytest

from bdlab.dichotomy import (
    DisjointFamily,
    conflict_bound,
    cross_mass_matrix,
    greedy_escape,
    rosenthal_select,
)
from bdlab.errors import ContractError, ParameterError
from bdlab.instances import heavy_row_family, spread_family
from bdlab.lattice import min_approx_lattice_bound, verify_lattice_bound
from bdlab.measure import AtomSet, AtomSpace, L1Fun, pos_excess, restrict_norm
from bdlab.operators import DomainShape, FiniteOperator, identity_operator


class TestGreedyEscape:
    def test_identity_32_family(self):
        res = greedy_escape(identity_operator(32), 0.5, 2)
        assert res.outcome == "disjoint_family"
        assert res.trace.planned_steps == 32
        fam = res.family
        assert fam.delta == pytest.approx(0.25)
        for f, E in fam.members:
            assert restrict_norm(fam.space, f, E) >= 0.25 - 1e-9
        # every pick gained a fresh coordinate
        assert all(g == pytest.approx(1.0) for g in res.trace.gains)
        sets = [E for _, E in fam.members]
        assert sets[0].isdisjoint(sets[1])

    def test_identity_4_lattice_bound(self):
        res = greedy_escape(identity_operator(4), 0.5, 2)
        assert res.outcome == "lattice_bound"
        assert res.cert.C == pytest.approx(4.0, abs=1e-9)
        assert np.allclose(res.cert.g.values, 1.0)
        assert res.trace.gains == (1.0, 1.0, 1.0, 1.0)
        assert not res.cert.failed

    def test_zero_operator(self):
        T = FiniteOperator(DomainShape((3,)), AtomSpace.counting(2), np.zeros((2, 3)))
        res = greedy_escape(T, 0.25, 3)
        assert res.outcome == "lattice_bound"
        assert res.cert.C == 0.0

    def test_trace_gains_match_recomputation(self):
        # Each recorded gain is the excess of its image over the prior join.
        res = greedy_escape(identity_operator(6), 0.9, 2)
        T = identity_operator(6)
        g = np.zeros(6)
        from bdlab.operators import apply_operator

        for x, gain in zip(res.trace.witnesses, res.trace.gains):
            img = np.abs(apply_operator(T, x).values)
            assert float(np.maximum(img - g, 0.0).sum()) == pytest.approx(gain, abs=1e-12)
            g = np.maximum(g, img)

    def test_returned_cert_verifies(self):
        rng = np.random.default_rng(10)
        cols = rng.standard_normal((4, 5))
        from bdlab.operators import operator_norm

        T = FiniteOperator(DomainShape((5,)), AtomSpace.counting(4), cols)
        T = FiniteOperator(T.domain, T.range, cols / operator_norm(T))
        res = greedy_escape(T, 0.4, 2)
        if res.outcome == "lattice_bound":
            check = verify_lattice_bound(T, res.cert.g, 0.4)
            assert check.worst_excess <= 0.4 + 1e-9

    def test_bad_params(self):
        with pytest.raises(ParameterError):
            greedy_escape(identity_operator(2), 0.0, 1)


class TestRosenthalSelect:
    def test_disjoint_indicators_trivial(self):
        # k disjoint unit indicators replicated to n: the cross-mass matrix
        # vanishes, so any selection certifies alpha = 1.
        n, k = 20, 2
        space = AtomSpace.counting(n)
        fs = [L1Fun(np.eye(n)[i]) for i in range(n)]
        Es = [AtomSet((i,)) for i in range(n)]
        sel = rosenthal_select(space, fs, Es, 1.0, k, seed=0)
        assert sel.rounds == 1
        assert sel.cert.lower == pytest.approx(1.0, abs=1e-9)

    def test_uniform_spread_sanity(self):
        n, k, delta = 60, 3, 0.5
        space = AtomSpace.counting(n)
        fs, Es = [], []
        for i in range(n):
            v = np.full(n, 0.5 / 59)
            v[i] = 0.5
            fs.append(L1Fun(v))
            Es.append(AtomSet((i,)))
        sel = rosenthal_select(space, fs, Es, delta, k, seed=3)
        assert np.all(sel.row_sums <= delta / 2 + 1e-12)
        assert sel.cert.lower >= delta / 2 - 1e-6

    def test_heavy_row_excluded(self):
        n, k, delta, heavy = 40, 2, 0.5, 7
        space, fs, Es = heavy_row_family(n, delta, heavy, seed=5)
        alpha = cross_mass_matrix(space, fs, Es)
        assert alpha[heavy].sum() == pytest.approx(0.5, abs=1e-12)
        for seed in range(10):
            sel = rosenthal_select(space, fs, Es, delta, k, seed=seed)
            assert heavy not in sel.indices

    def test_precondition_n_too_small(self):
        space, fs, Es = spread_family(10, 0.5, seed=0)
        with pytest.raises(ContractError):
            rosenthal_select(space, fs, Es, 0.5, 3, seed=0)

    def test_mass_precondition_checked(self):
        space, fs, Es = spread_family(60, 0.5, seed=0)
        bad = [L1Fun(f.values * 0.1) for f in fs]
        with pytest.raises(ContractError):
            rosenthal_select(space, bad, Es, 0.5, 3, seed=0)


class TestConflictBound:
    def test_dominated_indicators(self):
        space = AtomSpace.counting(4)
        fam = DisjointFamily(
            space,
            (
                (L1Fun(np.array([1.0, 0, 0, 0])), AtomSet((0,))),
                (L1Fun(np.array([0, 1.0, 0, 0])), AtomSet((1,))),
            ),
            delta=1.0,
        )
        g = L1Fun(np.ones(4))
        out = conflict_bound(space, fam, g, 0.0)
        assert out.lower_bound == pytest.approx(2.0, abs=1e-12)
        assert out.excess_ok

    def test_closed_form(self):
        space = AtomSpace.counting(2)
        fam = DisjointFamily(
            space,
            (
                (L1Fun(np.array([0.5, 0.0])), AtomSet((0,))),
                (L1Fun(np.array([0.0, 0.5])), AtomSet((1,))),
            ),
            delta=0.5,
        )
        out = conflict_bound(space, fam, L1Fun(np.full(2, 0.4)), 0.1)
        assert out.closed_form == pytest.approx(0.8, abs=1e-12)

    def test_zero_bound(self):
        space = AtomSpace.counting(2)
        fam = DisjointFamily(
            space,
            ((L1Fun(np.array([1.0, 0.0])), AtomSet((0,))),),
            delta=1.0,
        )
        out = conflict_bound(space, fam, L1Fun(np.zeros(2)), 2.0)
        assert out.lower_bound == 0.0

    def test_lower_bounds_mass_of_g(self):
        # The computed value never exceeds ||g||_1, whatever the excess.
        rng = np.random.default_rng(2)
        space = AtomSpace.counting(6)
        fam = DisjointFamily(
            space,
            (
                (L1Fun(rng.uniform(0.5, 2, 6)), AtomSet((0, 1))),
                (L1Fun(rng.uniform(0.5, 2, 6)), AtomSet((3, 4))),
            ),
            delta=0.5,
        )
        g = L1Fun(rng.uniform(0, 2, 6))
        out = conflict_bound(space, fam, g, 0.05)
        assert out.lower_bound <= g.values.sum() + 1e-12


class TestGenuineDichotomy:
    @pytest.mark.parametrize("n_dim", [32, 36])
    def test_family_forces_large_bound(self, n_dim):
        eps, n = 0.5, 2
        T = identity_operator(n_dim)
        res = greedy_escape(T, eps, n)
        assert res.outcome == "disjoint_family"
        cert = min_approx_lattice_bound(T, eps / 4)
        out = conflict_bound(T.range, res.family, cert.g, eps / 4)
        assert out.excess_ok
        assert out.lower_bound >= n * eps / 4 - 1e-6
        assert cert.C >= out.lower_bound - 1e-6

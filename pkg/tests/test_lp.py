import itertools

import numpy as np
import pytest

from bdlab.errors import MalformedProblemError
from bdlab.lp import EQ, GE, LE, LPProblem, solve_lp


def brute_force_min(problem, grid=401, lo=-5.0, hi=5.0):
    """Dense-grid minimization oracle for tiny problems (n <= 2)."""
    n = problem.n_vars
    axes = [np.linspace(lo, hi, grid)] * n
    best = np.inf
    for point in itertools.product(*axes):
        x = np.asarray(point)
        ok = True
        for a, rel, b in problem.rows:
            v = float(a @ x)
            if rel == LE and v > b + 1e-9:
                ok = False
            if rel == GE and v < b - 1e-9:
                ok = False
            if rel == EQ and abs(v - b) > 2e-2:
                ok = False
        for xj, (lb, ub) in zip(x, problem.bounds):
            if lb is not None and xj < lb - 1e-9:
                ok = False
            if ub is not None and xj > ub + 1e-9:
                ok = False
        if ok:
            best = min(best, float(problem.c @ x))
    return best


class TestExamples:
    def test_min_x_above_three(self):
        p = LPProblem(np.array([1.0]), ((np.array([1.0]), GE, 3.0),), ((None, None),))
        s = solve_lp(p)
        assert s.status == "optimal"
        assert s.x[0] == pytest.approx(3.0, abs=1e-9)
        assert s.objective == pytest.approx(3.0, abs=1e-9)

    def test_infeasible(self):
        p = LPProblem(np.array([0.0]), ((np.array([1.0]), LE, -1.0),))
        assert solve_lp(p).status == "infeasible"

    def test_triangle_vertex(self):
        p = LPProblem(
            np.array([-1.0, -1.0]),
            ((np.array([1.0, 1.0]), LE, 1.0),),
        )
        s = solve_lp(p)
        assert s.objective == pytest.approx(-1.0, abs=1e-9)
        assert s.objective == pytest.approx(brute_force_min(p, grid=201, lo=0, hi=1.5), abs=1e-2)

    def test_unbounded(self):
        p = LPProblem(np.array([-1.0]), ((np.array([0.0]), LE, 1.0),))
        assert solve_lp(p).status == "unbounded"

    def test_nan_rejected(self):
        with pytest.raises(MalformedProblemError):
            LPProblem(np.array([np.nan]), ())

    def test_bad_bounds_rejected(self):
        with pytest.raises(MalformedProblemError):
            LPProblem(np.array([1.0]), (), ((2.0, 1.0),))


class TestBounds:
    def test_double_bounded(self):
        p = LPProblem(np.array([1.0]), (), ((-2.0, 7.0),))
        s = solve_lp(p)
        assert s.x[0] == pytest.approx(-2.0, abs=1e-9)

    def test_upper_only(self):
        p = LPProblem(np.array([-1.0]), (), ((None, 4.5),))
        s = solve_lp(p)
        assert s.x[0] == pytest.approx(4.5, abs=1e-9)

    def test_equality_with_free_vars(self):
        p = LPProblem(
            np.array([1.0, 2.0]),
            ((np.array([1.0, 1.0]), EQ, 1.0),),
            ((None, None), (None, None)),
        )
        s = solve_lp(p)
        assert s.status == "unbounded"


class TestAgainstGridOracle:
    @pytest.mark.parametrize("seed", range(12))
    def test_random_2d(self, seed):
        rng = np.random.default_rng(seed)
        rows = tuple(
            (rng.uniform(-1, 1, size=2), LE, float(rng.uniform(0.5, 2.0)))
            for _ in range(4)
        )
        p = LPProblem(rng.uniform(-1, 1, size=2), rows, ((-3.0, 3.0), (-3.0, 3.0)))
        s = solve_lp(p)
        assert s.status == "optimal"  # the box keeps it bounded, 0 is feasible
        oracle = brute_force_min(p, grid=301, lo=-3.0, hi=3.0)
        assert s.objective <= oracle + 1e-6
        assert s.objective >= oracle - 0.05  # grid resolution slack


class TestCertificates:
    @pytest.mark.parametrize("seed", range(10))
    def test_weak_duality(self, seed):
        rng = np.random.default_rng(100 + seed)
        n = 5
        rows = tuple(
            (rng.uniform(-1, 1, size=n), LE, float(rng.uniform(1.0, 3.0)))
            for _ in range(7)
        ) + ((np.ones(n), EQ, 1.0),)
        p = LPProblem(rng.uniform(-1, 1, size=n), rows)
        s = solve_lp(p)
        if s.status != "optimal":
            pytest.skip("unbounded draw")
        assert s.dual_objective == pytest.approx(s.objective, abs=1e-6)
        assert s.max_dual_infeasibility <= 1e-6

    def test_objective_matches_recomputation(self):
        rng = np.random.default_rng(5)
        rows = tuple(
            (rng.uniform(-1, 1, size=4), GE, float(rng.uniform(-2.0, -1.0)))
            for _ in range(5)
        )
        p = LPProblem(rng.uniform(0.1, 1, size=4), rows, ((0.0, 5.0),) * 4)
        s = solve_lp(p)
        assert s.status == "optimal"
        assert float(p.c @ s.x) == pytest.approx(s.objective, abs=1e-7)
        assert s.max_violation <= 1e-7


def test_determinism_bit_identical():
    rng = np.random.default_rng(42)
    rows = tuple(
        (rng.uniform(-1, 1, size=6), LE, float(rng.uniform(0.5, 2.0))) for _ in range(9)
    )
    p = LPProblem(rng.uniform(-1, 1, size=6), rows, ((-2.0, 2.0),) * 6)
    a = solve_lp(p)
    b = solve_lp(p)
    assert a.objective == b.objective
    assert np.array_equal(a.x, b.x)
    assert a.iterations == b.iterations

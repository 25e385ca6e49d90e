"""Small dense linear-program solver.

Two-phase primal simplex on a dense tableau.  Pivoting is Dantzig's rule with
a deterministic first-index tie break; after a long degenerate stall the
solver switches permanently to Bland's rule, which cannot cycle.  Identical
problems therefore yield bit-identical solutions.

This is deliberately self-contained: every minimization downstream (orthant
programs over l1 spheres, lattice-bound programs, minimal projections) is
re-verified against its original nonlinear definition, so the solver only has
to be correct, not fast, and problems stay below ~10^4 variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InternalInvariantError, MalformedProblemError

FEAS_TOL = 1e-7
_PIV_TOL = 1e-9
_RC_TOL = 1e-9
_STALL_LIMIT = 200
_MAX_ITERS = 200_000

LE, EQ, GE = "<=", "=", ">="


@dataclass(frozen=True)
class LPProblem:
    """min c@x subject to tagged rows and per-variable bounds.

    ``rows`` is a list of (coefficients, relation, rhs) with relation one of
    "<=", "=", ">=".  ``bounds`` holds one (lower, upper) pair per variable,
    None meaning unbounded on that side; the default is (0, None) for every
    variable.
    """

    c: np.ndarray
    rows: tuple
    bounds: tuple = ()

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        object.__setattr__(self, "c", c)
        rows = tuple(
            (np.asarray(a, dtype=float), rel, float(b)) for a, rel, b in self.rows
        )
        object.__setattr__(self, "rows", rows)
        n = c.size
        bounds = tuple(self.bounds) if self.bounds else tuple((0.0, None) for _ in range(n))
        object.__setattr__(self, "bounds", bounds)
        if len(bounds) != n:
            raise MalformedProblemError("one bounds pair is required per variable")
        if not np.all(np.isfinite(c)):
            raise MalformedProblemError("objective contains NaN or inf")
        for a, rel, b in rows:
            if a.size != n:
                raise MalformedProblemError("constraint row length != variable count")
            if rel not in (LE, EQ, GE):
                raise MalformedProblemError(f"unknown relation {rel!r}")
            if not np.all(np.isfinite(a)) or not np.isfinite(b):
                raise MalformedProblemError("constraint contains NaN or inf")
        for lo, hi in bounds:
            for v in (lo, hi):
                if v is not None and not np.isfinite(v):
                    raise MalformedProblemError("bounds must be finite or None")
            if lo is not None and hi is not None and lo > hi:
                raise MalformedProblemError("lower bound exceeds upper bound")

    @property
    def n_vars(self) -> int:
        return int(self.c.size)


@dataclass(frozen=True)
class LPSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    objective: float | None = None
    # Weak-duality certificate data for the internal standard form.
    dual_objective: float | None = None
    max_dual_infeasibility: float | None = None
    max_violation: float = 0.0
    iterations: int = 0
    _meta: dict = field(default_factory=dict, repr=False)


class _Standardizer:
    """Rewrites an LPProblem as min c@z, A z = b, z >= 0 and maps back."""

    def __init__(self, p: LPProblem):
        n = p.n_vars
        # Per original variable: an affine recipe over standard variables.
        cols: list[np.ndarray] = []  # columns of the original->standard map
        self.offsets = np.zeros(n)
        self.col_of: list[tuple] = []
        extra_rows: list[tuple[np.ndarray, str, float]] = []
        k = 0
        for j, (lo, hi) in enumerate(p.bounds):
            if lo is None and hi is None:
                self.col_of.append(("split", k, k + 1))
                k += 2
            elif lo is not None:
                self.offsets[j] = lo
                self.col_of.append(("shift", k))
                if hi is not None:
                    e = np.zeros(n)
                    e[j] = 1.0
                    extra_rows.append((e, LE, hi))
                k += 1
            else:  # lo is None, hi finite: x = hi - z
                self.offsets[j] = hi
                self.col_of.append(("neg", k))
                k += 1
        self.n_std_struct = k
        self.n_orig = n

        def expand(a: np.ndarray) -> np.ndarray:
            out = np.zeros(k)
            for j in range(n):
                rec = self.col_of[j]
                if rec[0] == "shift":
                    out[rec[1]] += a[j]
                elif rec[0] == "neg":
                    out[rec[1]] -= a[j]
                else:
                    out[rec[1]] += a[j]
                    out[rec[2]] -= a[j]
            return out

        rows = list(p.rows) + extra_rows
        m = len(rows)
        n_slack = sum(1 for _, rel, _ in rows if rel != EQ)
        A = np.zeros((m, k + n_slack))
        b = np.zeros(m)
        slack_col = np.full(m, -1, dtype=int)
        s = 0
        for i, (a, rel, rhs) in enumerate(rows):
            ae = expand(a)
            shifted = rhs - float(a @ self.offsets)
            if rel == GE:
                ae, shifted = -ae, -shifted
            A[i, :k] = ae
            b[i] = shifted
            if rel != EQ:
                A[i, k + s] = 1.0
                slack_col[i] = k + s
                s += 1
        # Normalize to b >= 0; rows whose slack kept a +1 coefficient can use
        # it as the initial basic variable, the rest get an artificial.
        neg = b < 0
        A[neg] *= -1.0
        b[neg] *= -1.0
        slack_col[neg] = -1
        self.A, self.b = A, b
        self.slack_col = slack_col
        c = np.zeros(k + n_slack)
        c[:k] = expand(p.c)
        self.c = c
        self.obj_offset = float(p.c @ self.offsets)

    def restore(self, z: np.ndarray) -> np.ndarray:
        x = self.offsets.copy()
        for j in range(self.n_orig):
            rec = self.col_of[j]
            if rec[0] == "shift":
                x[j] += z[rec[1]]
            elif rec[0] == "neg":
                x[j] -= z[rec[1]]
            else:
                x[j] += z[rec[1]] - z[rec[2]]
        return x


def _pivot(T: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    coef = T[:, col].copy()
    coef[row] = 0.0
    nz = np.flatnonzero(coef)  # structured programs have sparse pivot columns
    if nz.size:
        T[nz] -= np.outer(coef[nz], T[row])
    basis[row] = col


def _ratio_row(T: np.ndarray, basis: np.ndarray, col: int) -> int | None:
    a = T[:-1, col]
    rhs = T[:-1, -1]
    pos = a > _PIV_TOL
    if not np.any(pos):
        return None
    ratios = np.full(a.shape, np.inf)
    ratios[pos] = rhs[pos] / a[pos]
    best = ratios.min()
    cand = np.flatnonzero(ratios <= best + 1e-12)
    # Among tied rows, keep only well-sized pivot elements (stability), then
    # break ties by the smallest basic variable index (determinism).
    big = cand[np.abs(a[cand]) >= 0.01 * np.abs(a[cand]).max()]
    return int(big[np.argmin(basis[big])])


def _run_simplex(T, basis, allowed, iters=0, stop_at=None):
    """Drive the tableau to optimality over the allowed columns.

    Returns (status, iterations).  The last tableau row is the reduced-cost
    row; its final entry holds the negated objective, so it increases as the
    minimization makes progress.  ``stop_at`` ends the run early once the
    objective reaches that value (used by phase 1, whose optimum cannot be
    below zero, to skip degenerate churn).
    """
    stall = 0
    rule = "dantzig"  # -> "steepest" on a stall -> "bland" on a long stall
    best = -np.inf
    while True:
        if stop_at is not None and T[-1, -1] >= -stop_at:
            return "optimal", iters
        red = T[-1, :-1].copy()
        red[~allowed] = np.inf
        neg = red < -_RC_TOL
        if not np.any(neg):
            return "optimal", iters
        if rule == "bland":
            col = int(np.flatnonzero(neg)[0])
        elif rule == "steepest":
            scores = np.full_like(red, -np.inf)
            cols = np.flatnonzero(neg)
            norms = 1.0 + (T[:-1, cols] ** 2).sum(axis=0)
            scores[cols] = (red[cols] ** 2) / norms
            col = int(np.argmax(scores))
        else:
            col = int(np.argmin(red))
        row = _ratio_row(T, basis, col)
        if row is None:
            return "unbounded", iters
        _pivot(T, basis, row, col)
        iters += 1
        if iters > _MAX_ITERS:
            raise InternalInvariantError("simplex iteration cap exceeded")
        neg_obj = T[-1, -1]
        if neg_obj > best + 1e-12:
            best = neg_obj
            stall = 0
            rule = "dantzig"  # the stall is broken; resume the fast rule
        else:
            stall += 1
            if stall > _STALL_LIMIT:
                rule = "steepest"
            if stall > 20 * _STALL_LIMIT:
                rule = "bland"


def solve_lp(problem: LPProblem) -> LPSolution:
    """Solve to an optimal basic solution, or report infeasible/unbounded."""
    std = _Standardizer(problem)
    A, b, c = std.A, std.b, std.c
    m, n = A.shape

    # Phase 1: slack basis where available, artificials elsewhere; minimize
    # the artificial mass.
    art_rows = np.flatnonzero(std.slack_col < 0)
    n_art = art_rows.size
    T = np.zeros((m + 1, n + n_art + 1))
    T[:m, :n] = A
    for j, r in enumerate(art_rows):
        T[r, n + j] = 1.0
    T[:m, -1] = b
    basis = np.where(std.slack_col >= 0, std.slack_col, 0)
    basis[art_rows] = n + np.arange(n_art)
    T[-1, n : n + n_art] = 1.0
    for r in art_rows:
        T[-1] -= T[r]
    allowed = np.ones(n + n_art, dtype=bool)
    status, iters = _run_simplex(T, basis, allowed, stop_at=1e-10)
    if status != "optimal":
        raise InternalInvariantError("phase-1 simplex cannot be unbounded")
    if -T[-1, -1] > FEAS_TOL:
        return LPSolution(status="infeasible", iterations=iters)

    # Drive artificial variables out of the basis; drop redundant rows.
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] >= n:
            piv_cols = np.flatnonzero(np.abs(T[r, :n]) > _PIV_TOL)
            if piv_cols.size:
                _pivot(T, basis, r, int(piv_cols[0]))
                iters += 1
            else:
                keep[r] = False
    if not np.all(keep):
        T = np.vstack([T[:m][keep], T[-1]])
        basis = basis[keep]
        m = int(keep.sum())

    # Phase 2 objective row: price out the basic columns.
    T[-1, :] = 0.0
    T[-1, :n] = c
    for r in range(m):
        T[-1] -= c[basis[r]] * T[r]
    allowed = np.zeros(T.shape[1] - 1, dtype=bool)
    allowed[:n] = True
    status, iters = _run_simplex(T, basis, allowed, iters)
    if status == "unbounded":
        return LPSolution(status="unbounded", iterations=iters)

    z = np.zeros(n)
    z[basis] = T[:m, -1]
    x = std.restore(z)
    objective = float(problem.c @ x)

    # Dual certificate from the final basis of the standard-form system.
    B = A[:, basis] if m else np.zeros((0, 0))
    try:
        y = np.linalg.solve(B.T, c[basis]) if m else np.zeros(0)
        dual_obj = float(y @ b) + std.obj_offset
        dual_infeas = float(np.max(np.maximum(-(c - A.T @ y), 0.0))) if n else 0.0
    except np.linalg.LinAlgError:
        y, dual_obj, dual_infeas = None, None, None

    viol = 0.0
    for a, rel, rhs in problem.rows:
        v = float(a @ x)
        if rel == LE:
            viol = max(viol, v - rhs)
        elif rel == GE:
            viol = max(viol, rhs - v)
        else:
            viol = max(viol, abs(v - rhs))
    for xj, (lo, hi) in zip(x, problem.bounds):
        if lo is not None:
            viol = max(viol, lo - xj)
        if hi is not None:
            viol = max(viol, xj - hi)
    if viol > FEAS_TOL:
        raise InternalInvariantError(f"optimal solution violates constraints by {viol:.3e}")

    return LPSolution(
        status="optimal",
        x=x,
        objective=objective,
        dual_objective=dual_obj,
        max_dual_infeasibility=dual_infeas,
        max_violation=viol,
        iterations=iters,
    )

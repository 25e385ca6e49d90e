"""l1-basis equivalence constants, minimal approximate lattice bounds, and the
two factorizations a lattice bound induces.

The convex programs here are all solved through :mod:`bdlab.lp` and then
re-verified against their nonlinear definitions (norms, positive excesses)
before a certificate is issued.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ArityError, ContractError, InvalidBoundError, ParameterError, ScaleError
from .lp import EQ, GE, LE, LPProblem, solve_lp
from .measure import TOL, AtomSpace, L1Fun, weighted_norm
from .operators import (
    ENUMERATION_CAP,
    ExtremePoint,
    FiniteOperator,
    _chunk_images,
    _decode_chunk,
)

_CHUNK = 1 << 14

CERT_TOL = 1e-6


@dataclass(frozen=True)
class L1EquivalenceCert:
    """Extreme values of ||sum a_i f_i||_1 over the l1 sphere sum|a_i| = 1."""

    lower: float
    upper: float
    minimizer: np.ndarray

    def distortion(self) -> float:
        return self.upper / self.lower if self.lower > 0 else np.inf


@dataclass(frozen=True)
class LatticeBoundCert:
    """A nonnegative g with ||(|Tx| - g)^+|| <= eps over the domain ball."""

    g: L1Fun
    C: float
    eps: float
    worst_excess: float
    witness: ExtremePoint | None
    failed: bool = False


@dataclass(frozen=True)
class BoundCheck:
    worst_excess: float
    witness: ExtremePoint | None
    exact: bool  # False when sampling stood in for full enumeration


def l1_equivalence(space: AtomSpace, fs: list[L1Fun]) -> L1EquivalenceCert:
    """Best constants alpha <= ||sum a_i f_i||_1 <= beta on the l1 sphere.

    beta is max_i ||f_i||_1 (the norm is convex so the sphere maximum sits at
    a vertex).  alpha is found exactly by one LP per sign orthant: within an
    orthant the sphere constraint is linear and the objective is a weighted
    sum of per-atom absolute values.  Ties between minimizing orthants go to
    the lexicographically smallest sign pattern.
    """
    k = len(fs)
    if k == 0:
        raise ArityError("need at least one function")
    if k > 16:
        raise ScaleError(f"k={k} would need 2^{k} orthant programs; cap is 16")
    F = np.stack([f.values for f in fs], axis=1)  # atoms x k
    if F.shape[0] != space.n_atoms:
        raise ArityError("functions must live on the given space")
    w = space.weights
    n_atoms = space.n_atoms
    beta = float(np.max(np.abs(F).T @ w))

    best: float | None = None
    best_a: np.ndarray | None = None
    for eps_pattern in itertools.product((-1.0, 1.0), repeat=k):
        e = np.asarray(eps_pattern)
        # Variables: t_1..t_k >= 0 (a_i = eps_i t_i), then one slack per atom.
        G = F * e  # atoms x k, columns already sign-adjusted
        rows = []
        for om in range(n_atoms):
            coef = np.concatenate([G[om], np.zeros(n_atoms)])
            coef[k + om] = -1.0
            rows.append((coef, LE, 0.0))
            coef2 = np.concatenate([-G[om], np.zeros(n_atoms)])
            coef2[k + om] = -1.0
            rows.append((coef2, LE, 0.0))
        rows.append((np.concatenate([np.ones(k), np.zeros(n_atoms)]), EQ, 1.0))
        c = np.concatenate([np.zeros(k), w])
        sol = solve_lp(LPProblem(c, tuple(rows)))
        if sol.status != "optimal":
            raise ContractError(f"orthant program unexpectedly {sol.status}")
        if best is None or sol.objective < best - 1e-12:
            best = sol.objective
            best_a = e * sol.x[:k]
    # Re-verify the minimizer against the definition.
    achieved = float(w @ np.abs(F @ best_a))
    if abs(achieved - best) > CERT_TOL:
        raise ContractError("orthant minimum does not reproduce its objective")
    return L1EquivalenceCert(lower=float(best), upper=beta, minimizer=best_a)


def l1_equivalence_grid(space: AtomSpace, fs: list[L1Fun], step: float = 1e-3) -> float:
    """Brute-force lower constant over a dense grid on the l1 sphere (k <= 3)."""
    k = len(fs)
    F = np.stack([f.values for f in fs], axis=1)
    w = space.weights
    if k == 1:
        return float(w @ np.abs(F[:, 0]))
    ts = np.arange(-1.0, 1.0 + step / 2, step)
    if k == 2:
        a = np.stack([ts, 1.0 - np.abs(ts)], axis=1)
        a = np.concatenate([a, a * np.array([1.0, -1.0])], axis=0)
    elif k == 3:
        t1, t2 = np.meshgrid(ts, ts, indexing="ij")
        rest = 1.0 - np.abs(t1) - np.abs(t2)
        keep = rest >= -1e-12
        t1, t2, rest = t1[keep], t2[keep], np.maximum(rest[keep], 0.0)
        a = np.concatenate(
            [
                np.stack([t1, t2, rest], axis=1),
                np.stack([t1, t2, -rest], axis=1),
            ],
            axis=0,
        )
    else:
        raise ScaleError("grid oracle only supports k <= 3")
    vals = np.abs(a @ F.T) @ w
    return float(vals.min())


def verify_lattice_bound(
    T: FiniteOperator,
    g: L1Fun,
    eps: float = 0.0,
    cap: int = ENUMERATION_CAP,
    samples: int = 100_000,
    seed: int = 0,
) -> BoundCheck:
    """Worst positive excess of |Tx| over g across extreme points, with witness.

    Falls back to seeded sampling past the enumeration cap, in which case the
    result is only a lower bound on the true worst excess (exact=False).
    """
    gv = g.values
    if len(g) != T.n_atoms:
        raise ArityError("bound must live on the range space")
    if np.any(gv < 0):
        raise InvalidBoundError("lattice bound candidate must be nonnegative")
    if eps < 0:
        raise ParameterError("eps must be nonnegative")
    w = T.range.weights
    shape = T.domain
    total = shape.extreme_count()
    exact = total <= cap
    best = -1.0
    best_idx = 0
    if exact:
        for start in range(0, total, _CHUNK):
            idx = np.arange(start, min(start + _CHUNK, total))
            coords, signs = _decode_chunk(shape, idx)
            ex = np.maximum(np.abs(_chunk_images(T, coords, signs)) - gv, 0.0) @ w
            kk = int(np.argmax(ex))
            if ex[kk] > best:
                best, best_idx = float(ex[kk]), start + kk
        coords, signs = _decode_chunk(shape, np.array([best_idx]))
        witness = ExtremePoint(tuple(coords[0]), tuple(int(s) for s in signs[0]))
    else:
        rng = np.random.default_rng(seed)
        witness = None
        for start in range(0, samples, _CHUNK):
            count = min(_CHUNK, samples - start)
            idx = rng.integers(0, total, size=count)
            coords, signs = _decode_chunk(shape, idx)
            ex = np.maximum(np.abs(_chunk_images(T, coords, signs)) - gv, 0.0) @ w
            kk = int(np.argmax(ex))
            if ex[kk] > best:
                best = float(ex[kk])
                witness = ExtremePoint(tuple(coords[kk]), tuple(int(s) for s in signs[kk]))
    return BoundCheck(worst_excess=best, witness=witness, exact=exact)


def min_approx_lattice_bound(
    T: FiniteOperator, eps: float, cap: int = ENUMERATION_CAP
) -> LatticeBoundCert:
    """g >= 0 of minimal L1 norm whose positive excess stays below eps.

    One LP over all extreme points x (halved: |T(-x)| = |Tx| so only points
    with a positive sign in the first block are constrained): variables are
    g per atom plus one excess slack per (x, atom), with the per-x excess
    budget sum w*u <= eps.
    """
    if eps < 0:
        raise ParameterError("eps must be nonnegative")
    shape = T.domain
    total = shape.extreme_count()
    if total > cap:
        raise ScaleError(f"{total} extreme points exceed the cap {cap}")
    w = T.range.weights
    n_atoms = T.n_atoms

    images = []
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total))
        coords, signs = _decode_chunk(shape, idx)
        half = signs[:, 0] == 1
        images.append(np.abs(_chunk_images(T, coords[half], signs[half])))
    absimg = np.concatenate(images, axis=0)  # n_x x atoms
    n_x = absimg.shape[0]

    n_vars = n_atoms + n_x * n_atoms
    rows = []
    for xi in range(n_x):
        base = n_atoms + xi * n_atoms
        for om in range(n_atoms):
            coef = np.zeros(n_vars)
            coef[om] = 1.0
            coef[base + om] = 1.0
            rows.append((coef, GE, float(absimg[xi, om])))
        coef = np.zeros(n_vars)
        coef[base : base + n_atoms] = w
        rows.append((coef, LE, eps))
    c = np.zeros(n_vars)
    c[:n_atoms] = w
    sol = solve_lp(LPProblem(c, tuple(rows)))
    if sol.status != "optimal":
        raise ContractError(f"lattice-bound program unexpectedly {sol.status}")
    g = L1Fun(np.maximum(sol.x[:n_atoms], 0.0))
    check = verify_lattice_bound(T, g, eps, cap=cap)
    return LatticeBoundCert(
        g=g,
        C=weighted_norm(T.range, g, 1),
        eps=eps,
        worst_excess=check.worst_excess,
        witness=check.witness,
        failed=check.worst_excess > eps + CERT_TOL,
    )


@dataclass(frozen=True)
class BoundedFactorization:
    """T = (multiply by g') o (divide by g'): the exact-lattice-bound route.

    ``left`` maps domain vectors to bounded functions on the range atoms,
    ``multiplier`` is g'; composing multiplication after ``left`` reproduces
    T column by column within ``max_column_residual``.
    """

    left: FiniteOperator
    multiplier: L1Fun
    left_sup_norm: float
    right_norm: float
    max_column_residual: float


def lattice_factorize_exact(
    T: FiniteOperator, g: L1Fun, eta: float | None = None
) -> BoundedFactorization:
    """Factor T through bounded functions when g is an exact lattice bound."""
    check = verify_lattice_bound(T, g, 0.0)
    if check.worst_excess > TOL:
        raise ContractError(
            f"g is not an exact lattice bound (excess {check.worst_excess:.3e})"
        )
    gmax = float(np.max(g.values)) if len(g) else 0.0
    if eta is None:
        eta = 1e-9 * gmax if gmax > 0 else 1e-9
    if eta <= 0:
        raise ParameterError("eta must be positive")
    gp = g.values + eta
    left_cols = T.columns / gp[:, None]
    left = FiniteOperator(T.domain, T.range, left_cols)
    # Sup norm of the bounded leg over extreme points (columns bound it too,
    # but the extreme-point value is the reported operator norm into Linf).
    shape = T.domain
    total = shape.extreme_count()
    sup = 0.0
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total))
        coords, signs = _decode_chunk(shape, idx)
        sup = max(sup, float(np.max(np.abs(_chunk_images(left, coords, signs)))))
    resid = float(np.max(np.abs(left_cols * gp[:, None] - T.columns))) if T.columns.size else 0.0
    if resid > TOL:
        raise ContractError(f"composition residual {resid:.3e} above tolerance")
    return BoundedFactorization(
        left=left,
        multiplier=L1Fun(gp),
        left_sup_norm=sup,
        right_norm=weighted_norm(T.range, L1Fun(gp), 1),
        max_column_residual=resid,
    )


@dataclass(frozen=True)
class ClampedApproximation:
    operator: FiniteOperator
    cert: LatticeBoundCert
    deviation: float  # ||T - S|| = max column distance, exact on one l1 block


def lattice_factorize_approx(T: FiniteOperator, g: L1Fun, eps: float) -> ClampedApproximation:
    """Clamp the columns of a single-l1-block operator into [-g, g].

    On a one-block domain the operator norm of T - S is the largest column
    deviation, which equals the column's positive excess over g; so S is an
    eps-perturbation with exact lattice bound g whenever every column excess
    is at most eps.
    """
    if T.domain.n_blocks != 1:
        raise ContractError("clamping needs a single l1 block as the domain")
    gv = g.values
    if np.any(gv < 0):
        raise InvalidBoundError("lattice bound candidate must be nonnegative")
    excesses = np.maximum(np.abs(T.columns) - gv[:, None], 0.0).T @ T.range.weights
    deviation = float(excesses.max()) if excesses.size else 0.0
    if deviation > eps + CERT_TOL:
        raise ContractError(
            f"a column exceeds g by {deviation:.3e} in L1, above the allowance {eps}"
        )
    S = FiniteOperator(
        T.domain,
        T.range,
        np.clip(T.columns, -gv[:, None], gv[:, None]),
        symmetric_entries=T.symmetric_entries,
    )
    check = verify_lattice_bound(S, g, 0.0)
    cert = LatticeBoundCert(
        g=g,
        C=weighted_norm(T.range, g, 1),
        eps=0.0,
        worst_excess=check.worst_excess,
        witness=check.witness,
        failed=check.worst_excess > TOL,
    )
    return ClampedApproximation(operator=S, cert=cert, deviation=deviation)

"""Operators with independent symmetric random entries, realized either on an
exact finite product space or by Monte Carlo sampling, plus the case split,
truncation construction, and empirical checkers for the classical
inequalities the estimates lean on.

Only exact-backend results feed pass/fail assertions; Monte Carlo runs carry
statistical error bars and are for exploration.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .dichotomy import DisjointFamily
from .errors import ArityError, ContractError, ParameterError, ScaleError
from .measure import AtomSpace, AtomSet, L1Fun, restrict_norm, weighted_norm
from .operators import DomainShape, FiniteOperator

KHINTCHINE_K = math.sqrt(2.0)

PRODUCT_ATOM_CAP = 2**20


@dataclass(frozen=True)
class SymmetricRandomMatrixSpec:
    """m x m i.i.d. entries with a finite sign-symmetric distribution."""

    m: int
    support: tuple  # of (value, probability)
    backend: str = "exact"  # "exact" | "mc"
    samples: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ParameterError("m must be >= 1")
        support = tuple((float(v), float(p)) for v, p in self.support)
        object.__setattr__(self, "support", support)
        probs = {v: p for v, p in support}
        if len(probs) != len(support):
            raise ParameterError("support points must be distinct")
        if abs(sum(p for _, p in support) - 1.0) > 1e-12:
            raise ParameterError("probabilities must sum to 1")
        if any(p < 0 for _, p in support):
            raise ParameterError("probabilities must be nonnegative")
        for v, p in support:
            if v != 0.0 and probs.get(-v) != p:
                raise ContractError(f"support is not sign-symmetric at value {v}")
        if self.backend not in ("exact", "mc"):
            raise ParameterError("backend must be 'exact' or 'mc'")
        if self.backend == "mc" and self.samples < 1:
            raise ParameterError("Monte Carlo backend needs a positive sample count")
        if self.backend == "exact":
            if len(support) ** (self.m * self.m) > PRODUCT_ATOM_CAP:
                raise ScaleError(
                    "exact product space would exceed the atom cap; use the mc backend"
                )

    def to_json(self) -> str:
        backend = {"kind": self.backend}
        if self.backend == "mc":
            backend.update({"samples": self.samples, "seed": self.seed})
        return json.dumps(
            {"m": self.m, "support": [list(vp) for vp in self.support], "backend": backend}
        )

    @staticmethod
    def from_json(text: str) -> SymmetricRandomMatrixSpec:
        obj = json.loads(text)
        backend = obj.get("backend", {"kind": "exact"})
        return SymmetricRandomMatrixSpec(
            m=int(obj["m"]),
            support=tuple((v, p) for v, p in obj["support"]),
            backend=backend.get("kind", "exact"),
            samples=int(backend.get("samples", 0)),
            seed=int(backend.get("seed", 0)),
        )


def build_symmetric_matrix(spec: SymmetricRandomMatrixSpec) -> FiniteOperator:
    """Realize the spec as an operator with one column per entry, block-major.

    Exact backend: atoms are all joint outcomes with product weights, so the
    entries are independent by construction.  Monte Carlo: atoms are i.i.d.
    joint samples with weight 1/S.
    """
    m = spec.m
    n_entries = m * m
    vals = np.array([v for v, _ in spec.support])
    probs = np.array([p for _, p in spec.support])
    if spec.backend == "exact":
        s = len(spec.support)
        n_atoms = s**n_entries
        atoms = np.arange(n_atoms)
        columns = np.empty((n_atoms, n_entries))
        weights = np.ones(n_atoms)
        for e in range(n_entries):
            digits = (atoms // s**e) % s
            columns[:, e] = vals[digits]
            weights *= probs[digits]
        space = AtomSpace(weights, "probability")
    else:
        rng = np.random.default_rng(spec.seed)
        draws = rng.choice(len(vals), size=(spec.samples, n_entries), p=probs)
        columns = vals[draws]
        space = AtomSpace(np.full(spec.samples, 1.0 / spec.samples), "probability")
    return FiniteOperator(
        DomainShape((m,) * m), space, columns, symmetric_entries=True
    )


@dataclass(frozen=True)
class ColumnFunction:
    """One column choice per row block: i -> j_i."""

    choices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(int(j) for j in self.choices))

    def isdisjoint(self, other: ColumnFunction) -> bool:
        return all(a != b for a, b in zip(self.choices, other.choices))

    def validate(self, shape: DomainShape) -> None:
        if len(self.choices) != shape.n_blocks:
            raise ContractError("need one column choice per block")
        for j, b in zip(self.choices, shape.blocks):
            if not 0 <= j < b:
                raise ContractError("column choice out of range")


def _gathered_column(T: FiniteOperator, j: ColumnFunction) -> np.ndarray:
    j.validate(T.domain)
    off = T.domain.offsets
    return T.columns[:, off + np.asarray(j.choices)]


def tail_quantity(T: FiniteOperator, j: ColumnFunction, C: float) -> float:
    """|| sum_i column_{i, j_i} * 1{|column_{i, j_i}| > C} ||_1."""
    cols = _gathered_column(T, j)
    tails = np.where(np.abs(cols) > C, cols, 0.0).sum(axis=1)
    return float(T.range.weights @ np.abs(tails))


def _all_tails(T: FiniteOperator, C: float) -> tuple[np.ndarray, np.ndarray]:
    """Tail quantities for every column function, plus their digit table."""
    shape = T.domain
    total = 1
    for b in shape.blocks:
        total *= b
    off = shape.offsets
    tails_cols = np.where(np.abs(T.columns) > C, T.columns, 0.0)
    w = T.range.weights
    out = np.empty(total)
    digits_all = np.empty((total, shape.n_blocks), dtype=np.int64)
    chunk = max(1, (1 << 22) // max(1, T.n_atoms))
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        rem = idx.copy()
        acc = np.zeros((idx.size, T.n_atoms))
        for i in range(shape.n_blocks - 1, -1, -1):
            d = rem % shape.blocks[i]
            rem //= shape.blocks[i]
            digits_all[idx, i] = d
            acc += tails_cols[:, off[i] + d].T
        out[idx] = np.abs(acc) @ w
    return out, digits_all


@dataclass(frozen=True)
class CaseSplitResult:
    verdict: str  # "caseA" | "caseB"
    family: tuple  # of ColumnFunction
    tails: tuple[float, ...]  # caseA: member tails; caseB: ()
    residual: float  # caseB: max tail over disjoint complements
    exhaustive: bool


def _disjoint_families(blocks, n):
    """All families of n pairwise-disjoint column functions, lexicographically.

    A family is one ordered n-tuple of distinct column indices per block; the
    s-th member reads off the s-th component in every block.
    """
    per_block = [list(itertools.permutations(range(b), n)) for b in blocks]
    for combo in itertools.product(*per_block):
        yield tuple(
            ColumnFunction(tuple(combo[i][s] for i in range(len(blocks))))
            for s in range(n)
        )


def case_split_test(
    T: FiniteOperator,
    eps: float,
    C: float,
    n: int,
    cap: int = 10**6,
    seed: int = 0,
    search_iters: int = 2000,
) -> CaseSplitResult:
    """Search for n disjoint column functions with heavy tails, else certify
    that some family screens off all heavy tails.

    caseA: a pairwise disjoint family whose every member has tail >= eps.
    caseB: no such family; return the family minimizing the maximum tail over
    column functions disjoint from it, with that residual.
    """
    blocks = T.domain.blocks
    if any(b < n for b in blocks):
        raise ParameterError("every block needs at least n columns for a disjoint family")
    tails, digits = _all_tails(T, C)
    n_funcs = tails.size

    def func_index(j: ColumnFunction) -> int:
        idx = 0
        for i, b in enumerate(blocks):
            idx = idx * b + j.choices[i]
        return idx

    def residual_of(family) -> float:
        taken = [set(j.choices[i] for j in family) for i in range(len(blocks))]
        best = 0.0
        for f in range(n_funcs):
            if all(digits[f, i] not in taken[i] for i in range(len(blocks))):
                best = max(best, float(tails[f]))
        return best

    family_count = 1
    for b in blocks:
        family_count *= math.perm(b, n)
    exhaustive = family_count * max(1, n) <= cap

    if exhaustive:
        best_family = None
        best_residual = math.inf
        for family in _disjoint_families(blocks, n):
            member_tails = [float(tails[func_index(j)]) for j in family]
            if all(t >= eps for t in member_tails):
                return CaseSplitResult(
                    verdict="caseA",
                    family=family,
                    tails=tuple(member_tails),
                    residual=0.0,
                    exhaustive=True,
                )
            res = residual_of(family)
            if res < best_residual:
                best_residual = res
                best_family = family
        return CaseSplitResult(
            verdict="caseB",
            family=best_family,
            tails=(),
            residual=best_residual,
            exhaustive=True,
        )

    rng = np.random.default_rng(seed)
    best_family = None
    best_residual = math.inf
    for _ in range(search_iters):
        per_block = [rng.permutation(b)[:n] for b in blocks]
        family = tuple(
            ColumnFunction(tuple(int(per_block[i][s]) for i in range(len(blocks))))
            for s in range(n)
        )
        member_tails = [float(tails[func_index(j)]) for j in family]
        if all(t >= eps for t in member_tails):
            return CaseSplitResult(
                verdict="caseA",
                family=family,
                tails=tuple(member_tails),
                residual=0.0,
                exhaustive=False,
            )
        res = residual_of(family)
        if res < best_residual:
            best_residual = res
            best_family = family
    return CaseSplitResult(
        verdict="caseB",
        family=best_family,
        tails=(),
        residual=best_residual,
        exhaustive=False,
    )


@dataclass(frozen=True)
class DisjointifyResult:
    family: DisjointFamily | None
    delta_actual: float
    implied_eps: float  # min member tail on input
    hit_probabilities: tuple[float, ...]  # P(E'_s)
    levy_markov_ok: bool  # every P(E'_s) <= 2/C
    bound_ok: bool  # delta_actual >= implied_eps / (2K)
    empty: bool


def independent_disjointify(
    T: FiniteOperator, C: float, n: int, strict: bool = True
) -> DisjointifyResult:
    """Turn n heavy leading columns into a disjoint family of column sums.

    Assumes the columns are pre-permuted so the s-th member uses column s in
    every block.  E'_s collects atoms where column s has an entry above C;
    independence across columns (exact backend) makes the leftover sets E_s
    keep at least a (1 - 2/C)^(n-1) fraction of the restricted mass, which
    yields delta >= eps/(2*sqrt(2)) whenever every member tail was >= eps.
    """
    if C <= 2:
        raise ParameterError("need C > 2, otherwise the hit-probability bound is vacuous")
    if (1 - 2 / C) ** n < 0.5:
        raise ParameterError("need (1 - 2/C)^n >= 1/2; increase C or decrease n")
    blocks = T.domain.blocks
    if any(b < n for b in blocks):
        raise ParameterError("every block needs at least n columns")
    off = T.domain.offsets
    w = T.range.weights
    K = KHINTCHINE_K

    members = []
    hit_masks = []
    tails = []
    for s in range(n):
        cols = T.columns[:, off + s]
        f_s = L1Fun(cols.sum(axis=1))
        hit = np.abs(cols).max(axis=1) > C
        tail = float(w @ np.abs(np.where(np.abs(cols) > C, cols, 0.0).sum(axis=1)))
        members.append(f_s)
        hit_masks.append(hit)
        tails.append(tail)
    probs = tuple(float(w[h].sum()) for h in hit_masks)
    levy_ok = all(p <= 2 / C + 1e-9 for p in probs)
    implied_eps = min(tails) if tails else 0.0

    sets = []
    for s in range(n):
        keep = hit_masks[s].copy()
        for r in range(n):
            if r != s:
                keep &= ~hit_masks[r]
        sets.append(AtomSet(tuple(np.flatnonzero(keep).tolist())))
    if all(len(E) == 0 for E in sets):
        return DisjointifyResult(
            family=None,
            delta_actual=0.0,
            implied_eps=implied_eps,
            hit_probabilities=probs,
            levy_markov_ok=levy_ok,
            bound_ok=False,
            empty=True,
        )
    delta_actual = min(
        restrict_norm(T.range, f, E) for f, E in zip(members, sets)
    )
    bound_ok = delta_actual >= implied_eps / (2 * K) - 1e-9
    if strict and implied_eps > 0 and not bound_ok:
        raise ContractError(
            "restricted mass fell below eps/(2K); the input was not an exact "
            "independent realization with norm at most 1"
        )
    family = None
    if delta_actual > 0:
        family = DisjointFamily(
            space=T.range,
            members=tuple(zip(members, sets)),
            delta=delta_actual,
        )
    return DisjointifyResult(
        family=family,
        delta_actual=delta_actual,
        implied_eps=implied_eps,
        hit_probabilities=probs,
        levy_markov_ok=levy_ok,
        bound_ok=bound_ok,
        empty=False,
    )


def truncation_split(T: FiniteOperator, C: float, n: int):
    """Split into the first n columns kept whole plus the rest truncated at C.

    Returns (S1, S2); T - (S1 + S2) is exactly the above-C part of the late
    columns, which is verified column by column.
    """
    blocks = T.domain.blocks
    if not 0 <= n <= min(blocks):
        raise ParameterError("need 0 <= n <= every block size")
    keep = np.zeros(T.domain.total_dim, dtype=bool)
    off = 0
    for b in blocks:
        keep[off : off + n] = True
        off += b
    cols1 = np.where(keep[None, :], T.columns, 0.0)
    truncated = np.where(np.abs(T.columns) <= C, T.columns, 0.0)
    cols2 = np.where(keep[None, :], 0.0, truncated)
    leftover = T.columns - cols1 - cols2
    expected = np.where(keep[None, :], 0.0, np.where(np.abs(T.columns) > C, T.columns, 0.0))
    if not np.array_equal(leftover, expected):
        raise ContractError("truncation identity failed; non-finite entries?")
    S1 = FiniteOperator(T.domain, T.range, cols1, symmetric_entries=T.symmetric_entries)
    S2 = FiniteOperator(T.domain, T.range, cols2, symmetric_entries=T.symmetric_entries)
    return S1, S2


@dataclass(frozen=True)
class HJCheck:
    lhs: float  # ||sum X_i||_p
    rhs: float  # ||max |X_i|||_p + ||sum X_i 1{|X_i| <= delta0}||_q
    delta0: float
    ratio: float


def hj_check(space: AtomSpace, fs: list[L1Fun], p: int, q: int) -> HJCheck:
    """Both sides of the two-sided moment comparison for independent symmetric
    summands, with the truncation level delta0 computed exactly over atoms.

    No pass/fail: the comparison constant is not pinned anywhere, so callers
    log the ratios.  Independence of the fs is asserted by construction.
    """
    if p not in (1, 2) or q not in (1, 2):
        raise ParameterError("p and q must be 1 or 2")
    if not fs:
        raise ArityError("need at least one summand")
    X = np.stack([f.values for f in fs], axis=0)
    w = space.weights
    threshold = 1.0 / (8 * 3**p)
    absX = np.abs(X)
    candidates = np.unique(np.concatenate([[0.0], absX.ravel()]))
    delta0 = None
    for t in candidates:
        total = float(sum(w[absX[i] > t].sum() for i in range(len(fs))))
        if total <= threshold + 1e-15:
            delta0 = float(t)
            break
    if delta0 is None:
        raise ContractError("no truncation level found; weights are inconsistent")
    lhs = weighted_norm(space, L1Fun(X.sum(axis=0)), p)
    maxterm = weighted_norm(space, L1Fun(absX.max(axis=0)), p)
    trunc = np.where(absX <= delta0, X, 0.0).sum(axis=0)
    rhs = maxterm + weighted_norm(space, L1Fun(trunc), q)
    ratio = lhs / rhs if rhs > 0 else 0.0
    return HJCheck(lhs=lhs, rhs=rhs, delta0=delta0, ratio=ratio)


@dataclass(frozen=True)
class LevyCheck:
    lhs: float  # P(max |X_i| > C)
    rhs: float  # 2 P(|sum X_i| > C)
    holds: bool


def levy_check(space: AtomSpace, fs: list[L1Fun], C: float) -> LevyCheck:
    """Exact maximal-versus-sum tail comparison for independent symmetric fs."""
    if not fs:
        raise ArityError("need at least one summand")
    X = np.stack([f.values for f in fs], axis=0)
    w = space.weights
    lhs = float(w[np.abs(X).max(axis=0) > C].sum())
    rhs = 2.0 * float(w[np.abs(X.sum(axis=0)) > C].sum())
    return LevyCheck(lhs=lhs, rhs=rhs, holds=lhs <= rhs + 1e-12)


@dataclass(frozen=True)
class KhintchineCheck:
    expectation: float  # E|sum a_i r_i|, exact over sign patterns
    lower: float  # ||a||_2 / sqrt(2)
    upper: float  # ||a||_2
    holds: bool


def khintchine_square_check(a, cap_m: int = 20) -> KhintchineCheck:
    """Exact first absolute moment of a signed sum against the L2 envelope."""
    a = np.asarray(a, dtype=float)
    m = a.size
    if m > cap_m:
        raise ScaleError(f"exact enumeration capped at m <= {cap_m}")
    if m == 0:
        raise ArityError("need at least one coefficient")
    signs = 1 - 2 * ((np.arange(2**m)[:, None] >> np.arange(m)[None, :]) & 1)
    expectation = float(np.abs(signs @ a).mean())
    l2 = float(np.linalg.norm(a))
    lower = l2 / KHINTCHINE_K
    holds = (lower <= expectation + 1e-12) and (expectation <= l2 + 1e-12)
    return KhintchineCheck(expectation=expectation, lower=lower, upper=l2, holds=holds)


@dataclass(frozen=True)
class SquareFunctionCheck:
    sum_norm: float  # ||sum f_i||_1
    square_norm: float  # ||(sum f_i^2)^(1/2)||_1
    holds: bool


def square_function_check(space: AtomSpace, fs: list[L1Fun]) -> SquareFunctionCheck:
    """(1/K) ||(sum f_i^2)^(1/2)||_1 <= ||sum f_i||_1 <= ||(sum f_i^2)^(1/2)||_1
    for a symmetric sequence, evaluated exactly over the atoms."""
    if not fs:
        raise ArityError("need at least one function")
    X = np.stack([f.values for f in fs], axis=0)
    sum_norm = weighted_norm(space, L1Fun(X.sum(axis=0)), 1)
    square_norm = weighted_norm(space, L1Fun(np.sqrt((X * X).sum(axis=0))), 1)
    holds = (square_norm / KHINTCHINE_K <= sum_norm + 1e-12) and (
        sum_norm <= square_norm + 1e-12
    )
    return SquareFunctionCheck(sum_norm=sum_norm, square_norm=square_norm, holds=holds)

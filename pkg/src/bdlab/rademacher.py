"""The sign-pattern operator family on the subsets of {1..m}, and numeric
verification of every quantitative step of its non-perturbability argument.

The operator sends the basis vector of a subset to the vector of memberships
signs scaled by 1/(sqrt(m) 2^m); columns are never materialized beyond small
m.  All subset enumerations run vectorized over bitmasks with exact integer
accumulation, so the reported norms are exact up to one final float division.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import (
    ContractError,
    InternalInvariantError,
    ParameterError,
    RegimeError,
    ScaleError,
)
from .lp import LE, LPProblem, solve_lp
from .measure import AtomSpace
from .operators import DomainShape, FiniteOperator

KHINTCHINE_K = math.sqrt(2.0)
NORM_THRESHOLD = 1.0 / (4.0 * KHINTCHINE_K)

_IMPLICIT_CAP = 24
_MATERIALIZE_CAP = 16
_TABLE_CAP = 22
_CHUNK = 1 << 20

_table_cache: dict[int, np.ndarray] = {}


@dataclass(frozen=True)
class RademacherOperator:
    """Implicit matrix entry(i, alpha) = +-1/(sqrt(m) 2^m), + iff i in alpha."""

    m: int

    def __post_init__(self):
        if not 1 <= self.m <= _IMPLICIT_CAP:
            raise ScaleError(f"m must lie in [1, {_IMPLICIT_CAP}]")

    @property
    def n_subsets(self) -> int:
        return 2**self.m

    @property
    def scale(self) -> float:
        return 1.0 / (math.sqrt(self.m) * self.n_subsets)

    def entry(self, i: int, alpha: int) -> float:
        """Row i (1-based), column the subset bitmask alpha."""
        if not 1 <= i <= self.m:
            raise ParameterError("row index out of range")
        sign = 1.0 if (alpha >> (i - 1)) & 1 else -1.0
        return sign * self.scale

    def column(self, alpha: int) -> np.ndarray:
        bits = (alpha >> np.arange(self.m)) & 1
        return (2.0 * bits - 1.0) * self.scale

    def materialize(self) -> FiniteOperator:
        """The same operator as explicit columns over counting-m (m <= 16)."""
        if self.m > _MATERIALIZE_CAP:
            raise ScaleError(f"materialization capped at m <= {_MATERIALIZE_CAP}")
        N = self.n_subsets
        bits = (np.arange(N)[None, :] >> np.arange(self.m)[:, None]) & 1
        cols = (2.0 * bits - 1.0) * self.scale
        return FiniteOperator(DomainShape((1,) * N), AtomSpace.counting(self.m), cols)

    def exact_norm(self) -> float:
        """Exact operator norm via the adjoint: (1/sqrt(m)) E|sum of m signs|.

        The adjoint of a basis vector has L1 norm E|sum eps_i r_i| / sqrt(m),
        and by sign symmetry the choice of eps does not matter, so the norm
        is the mean absolute value of a centered binomial over sqrt(m).
        """
        m = self.m
        total = sum(math.comb(m, k) * abs(2 * k - m) for k in range(m + 1))
        return total / (2**m * math.sqrt(m))


def build_rademacher_operator(m: int) -> RademacherOperator:
    return RademacherOperator(m)


@dataclass(frozen=True)
class DiagonalLatticeCheck:
    max_restricted: float
    eps: float
    passed: bool
    worst_case: str


def check_diagonal_lattice(
    m: int, eps: float, samples: int = 200, seed: int = 0
) -> DiagonalLatticeCheck:
    """Scan unit vectors for mass escaping the C/m coordinate cap, C = 1/eps.

    For x in the Euclidean ball the coordinates of x/sqrt(m) above C/m live
    on at most m/C^2 indices, so their l1 mass is at most 1/C = eps; this is
    rechecked on random unit vectors and structured candidates.
    """
    if not 0 < eps <= 1:
        raise ParameterError("eps must lie in (0, 1]")
    C = 1.0 / eps
    cut = C / math.sqrt(m)
    rng = np.random.default_rng(seed)

    candidates: list[tuple[str, np.ndarray]] = []
    candidates.append(("flat", np.full(m, 1.0 / math.sqrt(m))))
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        candidates.append((f"spike_{i}", e))
    for r in (0.3, 0.5, 0.7, 0.9, 0.99):
        v = r ** np.arange(m)
        candidates.append((f"geometric_{r}", v / np.linalg.norm(v)))
    for t in range(samples):
        v = rng.standard_normal(m)
        candidates.append((f"random_{t}", v / np.linalg.norm(v)))

    worst, worst_name = 0.0, "flat"
    for name, x in candidates:
        over = np.abs(x) > cut
        value = float(np.abs(x[over]).sum() / math.sqrt(m))
        if value > worst:
            worst, worst_name = value, name
    if worst > eps + 1e-9:
        raise InternalInvariantError(
            f"restricted mass {worst:.6f} above eps={eps} at candidate {worst_name}"
        )
    return DiagonalLatticeCheck(max_restricted=worst, eps=eps, passed=True, worst_case=worst_name)


def _alternating_signs(m: int) -> np.ndarray:
    """eps_i = (-1)^i for i = 1..m, as an array indexed by i-1."""
    return np.where(np.arange(1, m + 1) % 2 == 0, 1, -1).astype(np.int64)


def level_sign_table(m: int) -> np.ndarray:
    """A[i-1, k] = sum over k-subsets containing i of sgn(sum of their signs).

    Signs alternate with the element index.  Accumulation is over exact
    integers (as float64 well below 2^53), one pass over all 2^m bitmasks.
    """
    if m % 2 != 0:
        raise ContractError("the sign-table identities need even m")
    if m > _TABLE_CAP:
        raise ScaleError(f"subset enumeration capped at m <= {_TABLE_CAP}")
    if m in _table_cache:
        return _table_cache[m]
    eps = _alternating_signs(m)
    A = np.zeros((m, m + 1))
    for start in range(0, 2**m, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, 2**m), dtype=np.int64)
        pc = np.bitwise_count(idx).astype(np.int64)
        s = np.zeros(idx.size, dtype=np.int64)
        bits = []
        for i in range(m):
            b = (idx >> i) & 1
            bits.append(b)
            s += eps[i] * b
        x = np.sign(s).astype(np.float64)
        for i in range(m):
            sel = bits[i].astype(bool)
            A[i] += np.bincount(pc[sel], weights=x[sel], minlength=m + 1)[: m + 1]
    # Per-level sums vanish: swapping adjacent elements flips every sign.
    level_sums = A.sum(axis=0)
    if np.any(level_sums != 0.0):
        raise InternalInvariantError("level sums of the sign table must vanish")
    _table_cache[m] = A
    return A


def subset_sign_coefficient(m: int, k: int, mode: str = "formula", j: int = 1) -> int:
    """The closed-form subset-sum coefficient, or its brute-force counterpart.

    mode="formula" evaluates the binomial closed form; mode="bruteforce"
    enumerates the k-subsets through element j under alternating signs and
    returns (-1)^j times their sign sum.  The two agree for every k.
    """
    if m % 2 != 0:
        raise ContractError("defined for even m only")
    if not 1 <= k <= m:
        raise ParameterError("k must lie in [1, m]")
    if mode == "formula":
        h = m // 2 - 1
        if k % 2 == 1:
            return math.comb(h, (k - 1) // 2) ** 2
        return math.comb(h, k // 2 - 1) * math.comb(h, k // 2)
    if mode == "bruteforce":
        if m > 20:
            raise ScaleError("brute force capped at m <= 20")
        if not 1 <= j <= m:
            raise ParameterError("j must lie in [1, m]")
        A = level_sign_table(m)
        return int(round((-1) ** j * A[j - 1, k]))
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class BinomChecks:
    d_inequality_holds: bool
    ratio_table: dict
    u_estimate: float
    u_checkpoints: dict


def binom_checks(m_max: int = 40, k_max: int = 10**4) -> BinomChecks:
    """Exact-integer check of the coefficient bound, plus the envelope constant.

    The bound d(m,k) <= 2 C(m-1,k-1) C(k,floor(k/2)) / 2^k is verified as an
    integer inequality for every even m <= m_max.  The envelope constant is
    max_k C(k,floor(k/2)) sqrt(k)/2^k over k <= k_max (log-domain), which
    increases towards sqrt(2/pi) ~ 0.79788 along even k.
    """
    if m_max > 40 or m_max < 2:
        raise ParameterError("m_max must lie in [2, 40]")
    if k_max > 10**6:
        raise ScaleError("k_max capped at 10^6")
    holds = True
    for m in range(2, m_max + 1, 2):
        for k in range(1, m + 1):
            d = subset_sign_coefficient(m, k, "formula")
            lhs = d * 2**k
            rhs = 2 * math.comb(m - 1, k - 1) * math.comb(k, k // 2)
            if lhs > rhs:
                holds = False
    ratio_table = {
        k: math.comb(k, k // 2) * math.sqrt(k) / 2**k for k in range(1, 13)
    }
    ks = np.arange(1, k_max + 1, dtype=np.float64)
    halves = np.floor(ks / 2)
    logc = (
        gammaln(ks + 1)
        - gammaln(halves + 1)
        - gammaln(ks - halves + 1)
        + 0.5 * np.log(ks)
        - ks * math.log(2.0)
    )
    c = np.exp(logc)
    running = np.maximum.accumulate(c)
    checkpoints = {}
    for kc in (10, 100, 1000, 10_000, 100_000, 10**6):
        if kc <= k_max:
            checkpoints[kc] = float(running[kc - 1])
    return BinomChecks(
        d_inequality_holds=holds,
        ratio_table=ratio_table,
        u_estimate=float(running[-1]),
        u_checkpoints=checkpoints,
    )


def safe_envelope_constant(k_max: int = 10**4) -> float:
    """Computed envelope maximum plus a 0.01 safety margin.

    The true supremum over all k is sqrt(2/pi) ~ 0.79788, approached from
    below, so the padded value dominates every k, not just k <= k_max.
    """
    return binom_checks(m_max=2, k_max=k_max).u_estimate + 0.01


@dataclass(frozen=True)
class TruncatedSignNorm:
    m: int
    k0: int
    norm: float
    threshold: float
    passes: bool
    empty_range: bool


def truncated_sign_norm(m: int, k0: int) -> TruncatedSignNorm:
    """Exact image norm of the truncated alternating-sign test vector.

    The vector puts sgn(sum of alternating signs over the subset) on every
    subset whose size lies in [k0, m-k0] and zero elsewhere; its image under
    the sign-pattern operator is computed from the level sign table, exactly.
    """
    if m % 2 != 0 or m < 2:
        raise ContractError("defined for even m >= 2")
    if k0 < 1:
        raise ParameterError("k0 must be >= 1")
    if k0 > m - k0:
        return TruncatedSignNorm(m, k0, 0.0, NORM_THRESHOLD, False, True)
    A = level_sign_table(m)
    coords = 2.0 * A[:, k0 : m - k0 + 1].sum(axis=1)
    norm = float(np.abs(coords).sum() / (math.sqrt(m) * 2**m))
    return TruncatedSignNorm(
        m=m,
        k0=k0,
        norm=norm,
        threshold=NORM_THRESHOLD,
        passes=norm >= NORM_THRESHOLD - 1e-12,
        empty_range=False,
    )


def truncated_sign_norm_via_identity(m: int, k0: int) -> float:
    """Oracle for the same norm through the closed-form coefficients."""
    if k0 > m - k0:
        return 0.0
    total = sum(
        subset_sign_coefficient(m, k, "formula") for k in range(k0, m - k0 + 1)
    )
    return 2.0 * math.sqrt(m) * total / 2**m


@dataclass(frozen=True)
class SymmetricPerturbationBounds:
    coeff_bound_lhs: float  # 2 sum_k |a_k| C(m-1, k-1)
    admissible: bool  # lhs <= C/m
    sx_norm: float  # exact norm of the perturbation image of the test vector
    analytic_cap: float  # 2 U C / sqrt(k0)


def symmetric_perturbation_bounds(
    a, C: float, k0: int, u: float | None = None
) -> SymmetricPerturbationBounds:
    """Evaluate a doubly symmetrized perturbation on the truncated test vector.

    ``a`` holds one coefficient per subset size (a[k-1] for size k).  The
    matrix-coefficient budget 2 sum |a_k| C(m-1,k-1) <= C/m is what an exact
    lattice bound of mass C forces after symmetrization; the image norm of
    the test vector has the exact closed form 2m |sum_k a_k d(m,k)| over the
    truncation range.
    """
    a = np.asarray(a, dtype=float)
    m = a.size
    if m % 2 != 0 or m < 2:
        raise ContractError("need one coefficient per size 1..m with m even")
    if u is None:
        u = safe_envelope_constant()
    lhs = 2.0 * sum(abs(a[k - 1]) * math.comb(m - 1, k - 1) for k in range(1, m + 1))
    if k0 > m - k0:
        sx = 0.0
    else:
        total = sum(
            a[k - 1] * subset_sign_coefficient(m, k, "formula")
            for k in range(k0, m - k0 + 1)
        )
        sx = 2.0 * m * abs(total)
    return SymmetricPerturbationBounds(
        coeff_bound_lhs=float(lhs),
        admissible=lhs <= C / m + 1e-12,
        sx_norm=float(sx),
        analytic_cap=2.0 * u * C / math.sqrt(k0),
    )


def max_admissible_sx(m: int, C: float, k0: int, method: str = "lp") -> float:
    """Largest test-vector image norm over admissible symmetrized perturbations.

    Maximizes 2m |sum_k a_k d(m,k)| / (sqrt(m) 2^m) over the coefficient
    budget 2 sum |a_k| C(m-1,k-1) <= C/m.  method="lp" solves the one-row
    program over split signs; method="scan" uses the extreme-ray closed form
    C d(m,k)/C(m-1,k-1) maximized over the range.
    """
    if m % 2 != 0 or m < 2:
        raise ContractError("even m only")
    if C < 0:
        raise ParameterError("C must be nonnegative")
    if k0 > m - k0:
        return 0.0
    ks = list(range(k0, m - k0 + 1))
    d = np.array([float(subset_sign_coefficient(m, k, "formula")) for k in ks])
    binom = np.array([float(math.comb(m - 1, k - 1)) for k in ks])
    if method == "scan":
        return float(C * np.max(d / binom))
    if method == "lp":
        # Split signs; the image norm is 2m * (a+ - a-) @ d at the optimum.
        c = np.concatenate([-d, d]) * 2.0 * m  # maximize => minimize the negative
        row = np.concatenate([2.0 * binom, 2.0 * binom])
        sol = solve_lp(LPProblem(c, ((row, LE, C / m),)))
        if sol.status != "optimal":
            raise InternalInvariantError("budget program must be bounded and feasible")
        return float(-sol.objective)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class PerturbationGap:
    tx_norm: float
    max_sx: float
    gap: float
    verdict: bool
    analytic_cap: float
    empty_range: bool


def perturbation_gap(m: int, C: float, eps: float, k0: int) -> PerturbationGap:
    """Demonstrate that no admissible symmetrized perturbation is eps-close.

    Requires the analytic regime 2UC/sqrt(k0) < 1/(4K) - eps; then compares
    the exact test-vector image norm against the budget-maximized
    perturbation image norm and reports whether the gap exceeds eps.
    """
    u = safe_envelope_constant()
    cap = 2.0 * u * C / math.sqrt(k0)
    if cap >= NORM_THRESHOLD - eps:
        raise RegimeError(
            f"analytic cap {cap:.4f} >= 1/(4K) - eps = {NORM_THRESHOLD - eps:.4f}; "
            "increase k0 or decrease C"
        )
    tx = truncated_sign_norm(m, k0)
    sx = max_admissible_sx(m, C, k0)
    gap = tx.norm - sx
    return PerturbationGap(
        tx_norm=tx.norm,
        max_sx=sx,
        gap=gap,
        verdict=gap > eps,
        analytic_cap=cap,
        empty_range=tx.empty_range,
    )


def empirical_threshold_m(k0: int, m_limit: int = 22) -> int | None:
    """Smallest even m at which the test-vector norm clears 1/(4K)."""
    m = max(2, 2 * k0)
    if m % 2 != 0:
        m += 1
    while m <= m_limit:
        if truncated_sign_norm(m, k0).passes:
            return m
        m += 2
    return None


@dataclass(frozen=True)
class DiagGap:
    ax_norm: float
    max_sx: float
    gap: float
    reference_bound: float  # 1 - 3C/sqrt(m)
    holds: bool


def diag_gap(m: int, C: float) -> DiagGap:
    """Closed-form gap for the diagonal family against symmetrized perturbations.

    On the alternating flat unit vector the diagonal operator keeps norm 1,
    while any symmetrized perturbation with diagonal budget C and off-diagonal
    budget C(m-1) reaches at most 2C/sqrt(m); the gap dominates 1 - 3C/sqrt(m).
    """
    if m % 2 != 0 or m < 2:
        raise ContractError("even m only")
    if C < 0:
        raise ParameterError("C must be nonnegative")
    max_sx = 2.0 * C / math.sqrt(m)
    gap = 1.0 - max_sx
    ref = 1.0 - 3.0 * C / math.sqrt(m)
    return DiagGap(
        ax_norm=1.0,
        max_sx=max_sx,
        gap=gap,
        reference_bound=ref,
        holds=gap >= ref - 1e-12,
    )

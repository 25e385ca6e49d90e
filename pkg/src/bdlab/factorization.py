"""Block improvement, minimal projections in atomic L1, assembly of l1^k
factorizations, and 2-summing norm estimates.

The projection program is exhaustive for its task: every projection onto the
span of k independent functions has the form f -> sum_j <phi_j, f> h_j with
biorthogonal functionals phi_j, and on an atomic space its norm is a maximum
over atoms of a weighted L1 norm, so the LP optimum below is the true minimal
projection norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArityError, ContractError, InternalInvariantError, ParameterError, RankError, ScaleError
from .lattice import CERT_TOL, L1EquivalenceCert, l1_equivalence
from .lp import EQ, LE, LPProblem, solve_lp
from .measure import AtomSpace, L1Fun, weighted_norm
from .operators import FiniteOperator, apply_operator, max_block_l2, operator_norm

# A published upper bound for the (real) Grothendieck constant; any valid
# upper bound keeps the inequality checks sound.
GROTHENDIECK_UPPER = 1.782


@dataclass(frozen=True)
class JamesResult:
    blocks: tuple  # k domain coefficient vectors, each a normalized l1 combo
    cert: L1EquivalenceCert
    level: int
    tuple_index: int


def james_improve(
    T: FiniteOperator,
    ys: list[np.ndarray],
    k: int,
    r: int,
    delta: float,
) -> JamesResult:
    """Improve K = k^r unit vectors into k blocks with distortion <= (2/delta)^(1/r).

    Level by level, consecutive k-tuples of the current vectors are tested; a
    tuple whose image system has distortion at most the target is returned,
    and otherwise each tuple is replaced by its L1-minimizing normalized
    block.  A full failed level shrinks the maximum image norm by the target
    factor while every block image keeps norm >= delta/2, so some level must
    succeed.
    """
    K = len(ys)
    if K != k**r:
        raise ParameterError(f"need exactly k^r vectors, got {K} != {k}^{r}")
    if delta <= 0:
        raise ParameterError("delta must be positive")
    vectors = [np.asarray(y, dtype=float) for y in ys]
    images = [apply_operator(T, v) for v in vectors]
    if K <= 16:  # the joint precondition is only checkable within the orthant cap
        cert0 = l1_equivalence(T.range, images)
        if cert0.lower < delta / 2 - CERT_TOL:
            raise ContractError(
                f"image system has lower constant {cert0.lower:.6f} < delta/2 = {delta / 2}"
            )
    target = (2.0 / delta) ** (1.0 / r)
    for level in range(r):
        groups = len(vectors) // k
        certs = []
        for t in range(groups):
            certs.append(l1_equivalence(T.range, images[t * k : (t + 1) * k]))
        for t, cert in enumerate(certs):
            if cert.lower > 0 and cert.upper / cert.lower <= target + 1e-12:
                return JamesResult(
                    blocks=tuple(vectors[t * k : (t + 1) * k]),
                    cert=cert,
                    level=level,
                    tuple_index=t,
                )
        new_vectors = []
        for t, cert in enumerate(certs):
            a = cert.minimizer
            new_vectors.append(sum(a[i] * vectors[t * k + i] for i in range(k)))
        vectors = new_vectors
        images = [apply_operator(T, v) for v in vectors]
    raise InternalInvariantError(
        "no tuple reached the target distortion within r levels; "
        "with delta <= 2 this contradicts the shrinking argument"
    )


@dataclass(frozen=True)
class ProjectionCert:
    functionals: tuple  # one bounded function (L1Fun) per basis vector
    norm: float
    biorthogonality_residual: float


def min_projection(space: AtomSpace, hs: list[L1Fun], cap_k: int = 8, cap_atoms: int = 200) -> ProjectionCert:
    """Minimal norm of a projection of L1(space) onto span(hs), with functionals.

    Solves min t over functionals phi_j subject to biorthogonality and, for
    every atom, the image of that atom's normalized indicator having L1 norm
    at most t.  The program carries ~atoms^2 slack variables and is heavily
    degenerate, so while inputs up to the caps are admissible, runtimes grow
    steeply past ~20 atoms; the batch experiments stay well below that.
    """
    k = len(hs)
    n = space.n_atoms
    if k == 0:
        raise ArityError("need at least one function to project onto")
    if k > cap_k or n > cap_atoms:
        raise ScaleError(f"projection program capped at k <= {cap_k}, atoms <= {cap_atoms}")
    H = np.stack([h.values for h in hs], axis=0)  # k x atoms
    w = space.weights
    G = (H * w) @ H.T
    if np.linalg.matrix_rank(G, tol=1e-10) < k:
        raise RankError("functions are linearly dependent")

    # Variables: phi (k*n, free), s (n*n, >= 0), t (>= 0).
    n_phi = k * n
    n_vars = n_phi + n * n + 1
    rows = []
    for j in range(k):
        for i in range(k):
            coef = np.zeros(n_vars)
            coef[j * n : (j + 1) * n] = w * H[i]
            rows.append((coef, EQ, 1.0 if i == j else 0.0))
    for om in range(n):
        for om2 in range(n):
            coef = np.zeros(n_vars)
            for j in range(k):
                coef[j * n + om] = H[j, om2]
            coef[n_phi + om * n + om2] = -1.0
            rows.append((coef, LE, 0.0))
            coef2 = -coef
            coef2[n_phi + om * n + om2] = -1.0
            rows.append((coef2, LE, 0.0))
    for om in range(n):
        coef = np.zeros(n_vars)
        coef[n_phi + om * n : n_phi + (om + 1) * n] = w
        coef[-1] = -1.0
        rows.append((coef, LE, 0.0))
    c = np.zeros(n_vars)
    c[-1] = 1.0
    bounds = tuple([(None, None)] * n_phi + [(0.0, None)] * (n * n) + [(0.0, None)])
    sol = solve_lp(LPProblem(c, tuple(rows), bounds))
    if sol.status != "optimal":
        raise ContractError(f"projection program unexpectedly {sol.status}")
    phi = sol.x[:n_phi].reshape(k, n)

    # Re-verify against the definition of the projection norm.
    images = phi.T @ H  # row om: sum_j phi_j(om) h_j
    norm = float(np.max(np.abs(images) @ w))
    if abs(norm - sol.objective) > CERT_TOL:
        raise InternalInvariantError("projection norm does not match the LP objective")
    resid = float(np.max(np.abs((H * w) @ phi.T - np.eye(k))))
    if resid > 1e-7:
        raise InternalInvariantError(f"biorthogonality residual {resid:.3e} too large")
    return ProjectionCert(
        functionals=tuple(L1Fun(phi[j]) for j in range(k)),
        norm=norm,
        biorthogonality_residual=resid,
    )


def dor_projection_bound(lam: float) -> float:
    """(2/lam^2 - 1)^(-1): the projection norm guarantee for distortion < sqrt(2)."""
    if lam >= math.sqrt(2):
        raise ParameterError("the projection guarantee needs distortion < sqrt(2)")
    return 1.0 / (2.0 / lam**2 - 1.0)


@dataclass(frozen=True)
class FactorizationCert:
    k: int
    A: np.ndarray  # domain_dim x k, e_j -> z_j
    B: np.ndarray  # k x atoms, f -> (<phi_j, f>)_j as B @ f.values
    norm_A: float
    norm_B: float
    residual: float  # max_j ||(B T A - id) e_j||_1
    alpha: float
    beta: float
    projection_norm: float

    @property
    def product(self) -> float:
        return self.norm_A * self.norm_B


def build_l1_factorization(
    T: FiniteOperator, zs: list[np.ndarray], lam: float
) -> FactorizationCert:
    """id on l1^k = B o T o A through blocks zs whose images are lam-equivalent.

    A sends basis vectors to the blocks; B composes the minimal projection
    onto the image span with the coordinate map back to l1^k.  Requires
    lam < sqrt(2) and the measured image distortion to respect it.
    """
    if lam >= math.sqrt(2):
        raise ParameterError("distortion must be < sqrt(2) for the projection step")
    k = len(zs)
    images = [apply_operator(T, z) for z in zs]
    cert = l1_equivalence(T.range, images)
    if cert.lower <= 0 or cert.upper / cert.lower > lam + 1e-9:
        raise ContractError(
            f"measured distortion {cert.distortion():.6f} exceeds the claimed {lam}"
        )
    proj = min_projection(T.range, images)
    A = np.stack([np.asarray(z, dtype=float) for z in zs], axis=1)
    norm_A = max(T.domain.norm(A[:, j]) for j in range(k))
    phi = np.stack([p.values for p in proj.functionals], axis=0)  # k x atoms
    B = phi * T.range.weights  # B @ f.values = (<phi_j, f>)_j
    norm_B = float(np.max(np.abs(phi).sum(axis=0)))
    comp = B @ np.stack([img.values for img in images], axis=1)  # k x k
    residual = float(np.max(np.abs(comp - np.eye(k)).sum(axis=0)))
    if residual > CERT_TOL:
        raise InternalInvariantError(f"factorization residual {residual:.3e} too large")
    return FactorizationCert(
        k=k,
        A=A,
        B=B,
        norm_A=norm_A,
        norm_B=norm_B,
        residual=residual,
        alpha=cert.lower,
        beta=cert.upper,
        projection_norm=proj.norm,
    )


def pi2_upper_sym(T: FiniteOperator, allow_counting: bool = False) -> float:
    """(sum_i max_j ||column_{i,j}||_{L2}^2)^(1/2): valid for symmetric entries."""
    if not T.symmetric_entries:
        raise ContractError("estimate is only valid for symmetric entry sequences")
    if T.range.kind != "probability" and not allow_counting:
        raise ContractError("L2 moments need a probability range (or allow_counting=True)")
    return float(math.sqrt(max_block_l2(T).sum()))


@dataclass(frozen=True)
class Pi2Estimate:
    value: float
    lower_bound_based: bool = False


def pi2_groth(T: FiniteOperator, mode: str = "exact", seed: int = 0, kg: float = GROTHENDIECK_UPPER) -> Pi2Estimate:
    """K_G times the operator norm; flagged when the norm itself is a search bound."""
    nrm = operator_norm(T, mode=mode, seed=seed)
    return Pi2Estimate(value=kg * nrm, lower_bound_based=(mode == "search"))


def _weak_l2_denominator(T: FiniteOperator, Z: np.ndarray, cap: int = 2**24) -> float:
    """max over extreme dual functionals of sum_s <z_s, z*>^2.

    Extreme functionals pick one block and a sign per coordinate inside it;
    per block the maximum over 2^b sign patterns is computed exhaustively.
    """
    best = 0.0
    off = 0
    for b in T.domain.blocks:
        if 2**b > cap:
            raise ScaleError(f"block of size {b} needs 2^{b} sign patterns")
        zb = Z[:, off : off + b]  # k x b
        patterns = 1 - 2 * (
            (np.arange(2**b)[:, None] >> np.arange(b)[None, :]) & 1
        )  # 2^b x b
        vals = (zb @ patterns.T) ** 2  # k x 2^b
        best = max(best, float(vals.sum(axis=0).max()))
        off += b
    return best


def pi2_lower(
    T: FiniteOperator,
    families: list[list[np.ndarray]] | None = None,
    seed: int = 0,
    iters: int = 200,
    family_size: int = 4,
) -> float:
    """Certified lower bound on the 2-summing norm from candidate families.

    Each family of domain vectors gives (sum_s ||T z_s||_1^2)^(1/2) divided by
    the weak-l2 normalization over extreme dual functionals; the true norm is
    the sup over all families, so every quotient is a valid lower bound.
    Without explicit families a seeded random search perturbs a few random
    families and keeps the best quotient.
    """
    w = T.range.weights

    def quotient(Z: np.ndarray) -> float:
        num = float((((np.abs(T.columns @ Z.T).T) @ w) ** 2).sum())
        den = _weak_l2_denominator(T, Z)
        if den <= 0:
            return 0.0
        return math.sqrt(num / den)

    if families is not None:
        if not families or any(len(f) == 0 for f in families):
            raise ArityError("families must be nonempty")
        return max(
            quotient(np.stack([np.asarray(z, dtype=float) for z in f], axis=0))
            for f in families
        )
    rng = np.random.default_rng(seed)
    d = T.domain.total_dim
    best = 0.0
    for _ in range(5):
        Z = rng.standard_normal((family_size, d))
        val = quotient(Z)
        for _ in range(iters):
            Z2 = Z + 0.3 * rng.standard_normal(Z.shape)
            v2 = quotient(Z2)
            if v2 > val:
                Z, val = Z2, v2
        best = max(best, val)
    return best

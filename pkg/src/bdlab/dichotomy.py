"""The algorithmic half of the dichotomy: either a verified approximate
lattice bound falls out of a greedy join construction, or the construction
escapes for long enough to produce functions with disjoint mass.

A second entry point selects, out of many functions carrying mass on disjoint
sets, a subfamily that is a well-separated l1 basis, by sampling submatrices
of the cross-mass matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ContractError,
    InternalInvariantError,
    ParameterError,
    RetryExhaustedError,
    ScaleError,
)
from .lattice import CERT_TOL, L1EquivalenceCert, LatticeBoundCert, l1_equivalence
from .measure import AtomSpace, AtomSet, L1Fun, pos_excess, restrict_norm, weighted_norm
from .operators import (
    ENUMERATION_CAP,
    ExtremePoint,
    FiniteOperator,
    _chunk_images,
    _decode_chunk,
)

_CHUNK = 1 << 14


@dataclass(frozen=True)
class DisjointFamily:
    """Functions f_s with pairwise disjoint sets E_s carrying >= delta mass."""

    space: AtomSpace
    members: tuple  # of (L1Fun, AtomSet)
    delta: float

    def __post_init__(self):
        if self.delta <= 0:
            raise ParameterError("delta must be positive")
        sets = [E for _, E in self.members]
        for a in range(len(sets)):
            for b in range(a + 1, len(sets)):
                if not sets[a].isdisjoint(sets[b]):
                    raise ContractError("support sets must be pairwise disjoint")
        for f, E in self.members:
            if restrict_norm(self.space, f, E) < self.delta - 1e-9:
                raise ContractError("a member carries less than delta mass on its set")

    def __len__(self) -> int:
        return len(self.members)

    def to_json_dict(self) -> dict:
        return {
            "delta": self.delta,
            "members": [
                {"values": f.values.tolist(), "set": list(E.indices)}
                for f, E in self.members
            ],
        }


@dataclass(frozen=True)
class EscapeTrace:
    witnesses: tuple  # chosen extreme points, in pick order
    gains: tuple  # gain achieved by each pick
    new_sets: tuple  # of AtomSet: where each pick beat the running join
    outcome: str  # "lattice_bound" | "disjoint_family"
    planned_steps: int
    bumped: bool
    chain: tuple = ()  # selected indices (1-based, descending) when a family is built


@dataclass(frozen=True)
class EscapeResult:
    outcome: str
    cert: LatticeBoundCert | None
    family: DisjointFamily | None
    trace: EscapeTrace


def _argmax_gain(T: FiniteOperator, g: np.ndarray):
    """Extreme point maximizing ||(|Tx| - g)^+||_1, by full enumeration."""
    shape = T.domain
    w = T.range.weights
    total = shape.extreme_count()
    best, best_idx, best_img = -1.0, 0, None
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total))
        coords, signs = _decode_chunk(shape, idx)
        imgs = np.abs(_chunk_images(T, coords, signs))
        gains = np.maximum(imgs - g, 0.0) @ w
        k = int(np.argmax(gains))
        if gains[k] > best:
            best, best_idx, best_img = float(gains[k]), start + k, imgs[k].copy()
    coords, signs = _decode_chunk(shape, np.array([best_idx]))
    x = ExtremePoint(tuple(coords[0]), tuple(int(s) for s in signs[0]))
    return best, x, best_img


def greedy_escape(
    T: FiniteOperator, eps: float, n: int, cap: int = ENUMERATION_CAP
) -> EscapeResult:
    """Either an eps-approximate lattice bound or n functions with disjoint mass.

    Runs N = floor(4n^2/eps) rounds (bumped minimally if the counting
    inequality N - 1 >= n*ceil(2n/eps) fails).  Each round greedily picks the
    extreme point whose image carries the most L1 mass above the running join
    of previous images; a round with gain <= eps certifies the join as an
    approximate lattice bound.  If all N rounds exceed eps, a descending chain
    of picks is selected whose pairwise cross-excesses are below eps/(2n), and
    their images carry >= eps/2 mass on disjoint leftover sets.

    The caller is responsible for normalizing ||T|| <= 1; the chain-selection
    guarantee counts on it.
    """
    if eps <= 0 or n < 1:
        raise ParameterError("need eps > 0 and n >= 1")
    if T.domain.extreme_count() > cap:
        raise ScaleError("extreme-point enumeration exceeds the cap")
    N = math.floor(4 * n * n / eps)
    bumped = False
    need = n * math.ceil(2 * n / eps)
    if N - 1 < need:
        N = need + 1
        bumped = True
    w = T.range.weights

    g = np.zeros(T.n_atoms)
    witnesses: list[ExtremePoint] = []
    gains: list[float] = []
    images: list[np.ndarray] = []  # |Tx_i|
    prejoins: list[np.ndarray] = []  # running join before step i
    new_sets: list[AtomSet] = []
    for i in range(N):
        gain, x, img = _argmax_gain(T, g)
        if gain <= eps:
            gl = L1Fun(g)
            cert = LatticeBoundCert(
                g=gl,
                C=weighted_norm(T.range, gl, 1),
                eps=eps,
                worst_excess=gain,
                witness=x,
                failed=False,
            )
            trace = EscapeTrace(
                witnesses=tuple(witnesses),
                gains=tuple(gains),
                new_sets=tuple(new_sets),
                outcome="lattice_bound",
                planned_steps=N,
                bumped=bumped,
            )
            return EscapeResult("lattice_bound", cert, None, trace)
        witnesses.append(x)
        gains.append(gain)
        images.append(img)
        prejoins.append(g.copy())
        new_sets.append(AtomSet(tuple(np.flatnonzero(img > g).tolist())))
        g = np.maximum(g, img)

    # All N gains exceeded eps: pick a descending chain whose cross-excess on
    # the already-chosen new-mass sets stays below eps/(2n).
    thr = eps / (2 * n)
    chain = [N - 1]
    masks = {N - 1: new_sets[N - 1].mask(T.n_atoms)}
    for i in range(N - 2, -1, -1):
        if len(chain) == n:
            break
        gain_fn = np.maximum(images[i] - prejoins[i], 0.0)
        ok = True
        for r in chain:
            if float(w[masks[r]] @ gain_fn[masks[r]]) >= thr:
                ok = False
                break
        if ok:
            chain.append(i)
            masks[i] = new_sets[i].mask(T.n_atoms)
    if len(chain) < n:
        raise InternalInvariantError(
            f"chain selection found only {len(chain)} of {n} indices; "
            f"N={N}, eps={eps} (this indicates a bug, not bad input)"
        )

    members = []
    used = np.zeros(T.n_atoms, dtype=bool)
    for i in chain:
        mask = masks[i] & ~used
        used |= masks[i]
        members.append(
            (L1Fun(_signed_image(T, witnesses[i])), AtomSet(tuple(np.flatnonzero(mask).tolist())))
        )
    family = DisjointFamily(space=T.range, members=tuple(members), delta=eps / 2)
    trace = EscapeTrace(
        witnesses=tuple(witnesses),
        gains=tuple(gains),
        new_sets=tuple(new_sets),
        outcome="disjoint_family",
        planned_steps=N,
        bumped=bumped,
        chain=tuple(i + 1 for i in chain),
    )
    return EscapeResult("disjoint_family", None, family, trace)


def _signed_image(T: FiniteOperator, x: ExtremePoint) -> np.ndarray:
    return T.columns @ x.to_vector(T.domain)


@dataclass(frozen=True)
class SelectionResult:
    indices: tuple[int, ...]
    rounds: int
    cert: L1EquivalenceCert
    row_sums: np.ndarray  # within-F row sums of the cross-mass matrix


def cross_mass_matrix(space: AtomSpace, fs: list[L1Fun], Es: list[AtomSet]) -> np.ndarray:
    """alpha[i, j] = mass of f_i on E_j, with a zeroed diagonal."""
    n = len(fs)
    F = np.stack([np.abs(f.values) * space.weights for f in fs], axis=0)
    M = np.stack([E.mask(space.n_atoms).astype(float) for E in Es], axis=0)
    alpha = F @ M.T
    np.fill_diagonal(alpha, 0.0)
    return alpha


def rosenthal_select(
    space: AtomSpace,
    fs: list[L1Fun],
    Es: list[AtomSet],
    delta: float,
    k: int,
    seed: int = 0,
    max_rounds: int = 10_000,
) -> SelectionResult:
    """Pick k of the n functions forming a delta/2-separated l1^k basis.

    Samples uniform 2k-subsets E until the E x E block of the cross-mass
    matrix has mean row sum below twice its expectation, keeps the k rows of
    E with the smallest within-E row sums, and accepts once every kept row
    sums below delta/2 (which is what the downstream basis estimate needs).
    The returned equivalence certificate rechecks the lower constant by LP.
    """
    n = len(fs)
    if len(Es) != n:
        raise ContractError("need one support set per function")
    if not (0 < delta <= 1):
        raise ParameterError("delta must lie in (0, 1]")
    if n < math.floor(10 / delta) * k:
        raise ContractError(
            f"need n >= floor(10/delta)*k = {math.floor(10 / delta) * k}, got {n}"
        )
    if 2 * k > n:
        raise ContractError("need at least 2k functions to sample from")
    for i, (f, E) in enumerate(zip(fs, Es)):
        if weighted_norm(space, f, 1) > 1 + 1e-9:
            raise ContractError(f"function {i} lies outside the L1 unit ball")
        if restrict_norm(space, f, E) < delta - 1e-9:
            raise ContractError(f"function {i} carries less than delta on its set")
    for a in range(n):
        for b in range(a + 1, n):
            if not Es[a].isdisjoint(Es[b]):
                raise ContractError("support sets must be pairwise disjoint")

    alpha = cross_mass_matrix(space, fs, Es)
    mean_threshold = 2 * (2 * k) ** 2 / ((n - 1) * 2 * k)
    rng = np.random.default_rng(seed)
    for rounds in range(1, max_rounds + 1):
        E = np.sort(rng.choice(n, size=2 * k, replace=False))
        sub = alpha[np.ix_(E, E)]
        if sub.sum() / (2 * k) > mean_threshold:
            continue
        row_sums = sub.sum(axis=1)
        order = np.argsort(row_sums, kind="stable")
        F = np.sort(E[order[:k]])
        inner = alpha[np.ix_(F, F)].sum(axis=1)
        if np.all(inner <= delta / 2 + 1e-12):
            cert = l1_equivalence(space, [fs[i] for i in F])
            if cert.lower < delta / 2 - CERT_TOL:
                raise InternalInvariantError(
                    "selected family fails the delta/2 lower constant"
                )
            return SelectionResult(
                indices=tuple(int(i) for i in F),
                rounds=rounds,
                cert=cert,
                row_sums=inner,
            )
    raise RetryExhaustedError(
        f"no admissible 2k-subset in {max_rounds} rounds (seed={seed})"
    )


@dataclass(frozen=True)
class ConflictBound:
    lower_bound: float  # certified: ||g||_1 is at least this
    closed_form: float  # k * (delta - eps')
    excess_ok: bool  # pos_excess(f_s, g) <= eps' held for every member


def conflict_bound(
    space: AtomSpace, fam: DisjointFamily, g: L1Fun, eps_prime: float
) -> ConflictBound:
    """Lower bound on ||g||_1 forced by a disjoint family g approximately bounds.

    Sums min(|f_s|, g) over each member's own set; disjointness makes the sum
    a certified lower bound for ||g||_1 regardless of the excess check.  The
    closed form k*(delta - eps') is the generic guarantee when every member
    has positive excess at most eps'.
    """
    if len(g) != space.n_atoms:
        raise ContractError("bound must live on the family's space")
    w = space.weights
    total = 0.0
    ok = True
    for f, E in fam.members:
        mask = E.mask(space.n_atoms)
        total += float(w[mask] @ np.minimum(np.abs(f.values[mask]), g.values[mask]))
        if pos_excess(space, f, g) > eps_prime + 1e-12:
            ok = False
    return ConflictBound(
        lower_bound=total,
        closed_form=len(fam) * (fam.delta - eps_prime),
        excess_ok=ok,
    )

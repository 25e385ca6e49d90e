"""Operators from linf-sums of l1-blocks into atomic L1.

The domain of every operator here is a finite linf-direct-sum of l1 blocks;
the extreme points of its unit ball are "one signed coordinate per block" and
operator norms are maxima of the image L1 norm over that finite set.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ContractError, DimensionError, ScaleError
from .measure import AtomSpace, L1Fun, weighted_norm
from .parallel import chunk_ranges, run_chunks

# Beyond this many extreme points only search mode is honest.
ENUMERATION_CAP = 2**24

_CHUNK = 1 << 14


@dataclass(frozen=True)
class DomainShape:
    """Block sizes [b1,...,ba] describing linf^a(l1^b1,...,l1^ba)."""

    blocks: tuple[int, ...]

    def __post_init__(self):
        blocks = tuple(int(b) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if len(blocks) < 1 or any(b < 1 for b in blocks):
            raise DimensionError("need at least one block, all sizes >= 1")

    @property
    def total_dim(self) -> int:
        return int(sum(self.blocks))

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.blocks)[:-1]]).astype(int)

    def extreme_count(self) -> int:
        out = 1
        for b in self.blocks:
            out *= 2 * b
        return out

    def norm(self, x: np.ndarray) -> float:
        """max over blocks of the within-block l1 norm."""
        x = np.asarray(x, dtype=float)
        if x.size != self.total_dim:
            raise DimensionError("coefficient vector does not match the domain")
        off = 0
        best = 0.0
        for b in self.blocks:
            best = max(best, float(np.abs(x[off : off + b]).sum()))
            off += b
        return best


@dataclass(frozen=True)
class ExtremePoint:
    """One coordinate and sign per block: a vertex of the domain unit ball."""

    coords: tuple[int, ...]
    signs: tuple[int, ...]

    def __post_init__(self):
        if len(self.coords) != len(self.signs):
            raise DimensionError("coords and signs must have one entry per block")
        if any(s not in (-1, 1) for s in self.signs):
            raise DimensionError("signs must be +-1")

    def to_vector(self, shape: DomainShape) -> np.ndarray:
        if len(self.coords) != shape.n_blocks:
            raise DimensionError("extreme point does not match the domain shape")
        x = np.zeros(shape.total_dim)
        for off, b, j, s in zip(shape.offsets, shape.blocks, self.coords, self.signs):
            if not 0 <= j < b:
                raise DimensionError("block coordinate out of range")
            x[off + j] = s
        return x

    def negate(self) -> ExtremePoint:
        return ExtremePoint(self.coords, tuple(-s for s in self.signs))


@dataclass(frozen=True)
class FiniteOperator:
    """An operator given by one L1 column per domain basis vector (block-major)."""

    domain: DomainShape
    range: AtomSpace
    columns: np.ndarray  # shape (n_atoms, total_dim)
    symmetric_entries: bool = False

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=float)
        if cols.ndim != 2:
            raise DimensionError("columns must be a 2-d array (atoms x dimension)")
        cols = cols.copy()
        cols.setflags(write=False)
        object.__setattr__(self, "columns", cols)
        if cols.shape[1] != self.domain.total_dim:
            raise DimensionError("column count must equal the domain dimension")
        if cols.shape[0] != self.range.n_atoms:
            raise DimensionError("every column must match the range space")

    @property
    def n_atoms(self) -> int:
        return self.range.n_atoms

    def column(self, block: int, j: int) -> L1Fun:
        return L1Fun(self.columns[:, int(self.domain.offsets[block]) + j])

    def to_json(self) -> str:
        obj = {
            "domain": {"blocks": list(self.domain.blocks)},
            "range": {"kind": self.range.kind, "weights": self.range.weights.tolist()},
            "columns": [c.tolist() for c in self.columns.T],
        }
        if self.symmetric_entries:
            obj["symmetric_entries"] = True
        return json.dumps(obj)

    @staticmethod
    def from_json(text: str) -> FiniteOperator:
        obj = json.loads(text)
        return FiniteOperator(
            DomainShape(tuple(obj["domain"]["blocks"])),
            AtomSpace(np.asarray(obj["range"]["weights"], dtype=float), obj["range"]["kind"]),
            np.asarray(obj["columns"], dtype=float).T,
            bool(obj.get("symmetric_entries", False)),
        )


def apply_operator(T: FiniteOperator, x) -> L1Fun:
    """Image of a coefficient vector or an ExtremePoint, as an L1 function."""
    if isinstance(x, ExtremePoint):
        x = x.to_vector(T.domain)
    x = np.asarray(x, dtype=float)
    if x.size != T.domain.total_dim:
        raise DimensionError("coefficient vector does not match the domain")
    return L1Fun(T.columns @ x)


def extreme_points(shape: DomainShape, cap: int = ENUMERATION_CAP) -> Iterator[ExtremePoint]:
    """All prod(2*b_i) extreme points in lexicographic (block-major) order.

    Within a block, choices are ordered by coordinate and then sign (+ then -),
    so the very first point is +e_1 in every block and x -> -x maps the
    enumeration onto itself.
    """
    total = shape.extreme_count()
    if total > cap:
        raise ScaleError(
            f"{total} extreme points exceed the cap {cap}; use operator_norm search mode"
        )
    radices = [2 * b for b in shape.blocks]

    def rec(i: int, coords: list, signs: list):
        if i == len(radices):
            yield ExtremePoint(tuple(coords), tuple(signs))
            return
        for d in range(radices[i]):
            coords.append(d >> 1)
            signs.append(1 - 2 * (d & 1))
            yield from rec(i + 1, coords, signs)
            coords.pop()
            signs.pop()

    yield from rec(0, [], [])


def _decode_chunk(shape: DomainShape, idx: np.ndarray):
    """Mixed-radix decode of enumeration indices -> (coords, signs) arrays."""
    a = shape.n_blocks
    coords = np.empty((idx.size, a), dtype=np.int64)
    signs = np.empty((idx.size, a), dtype=np.int64)
    rem = idx.astype(np.int64)
    for i in range(a - 1, -1, -1):
        r = 2 * shape.blocks[i]
        d = rem % r
        rem //= r
        coords[:, i] = d >> 1
        signs[:, i] = 1 - 2 * (d & 1)
    return coords, signs


def _chunk_images(T: FiniteOperator, coords: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """Images of many extreme points at once, shape (chunk, n_atoms)."""
    off = T.domain.offsets
    out = np.zeros((coords.shape[0], T.n_atoms))
    for i in range(T.domain.n_blocks):
        out += signs[:, i, None] * T.columns[:, off[i] + coords[:, i]].T
    return out


def _scan_extreme_norms(T: FiniteOperator, cap: int):
    """(max image L1 norm, argmax ExtremePoint) over all extreme points."""
    shape = T.domain
    total = shape.extreme_count()
    if total > cap:
        raise ScaleError(
            f"{total} extreme points exceed the cap {cap}; use operator_norm search mode"
        )
    w = T.range.weights

    def scan(start, stop):
        idx = np.arange(start, stop)
        coords, signs = _decode_chunk(shape, idx)
        norms = np.abs(_chunk_images(T, coords, signs)) @ w
        k = int(np.argmax(norms))
        return float(norms[k]), start + k

    best, best_idx = -1.0, 0
    for value, where in run_chunks(scan, chunk_ranges(total, _CHUNK)):
        if value > best:
            best, best_idx = value, where
    coords, signs = _decode_chunk(shape, np.array([best_idx]))
    witness = ExtremePoint(tuple(coords[0]), tuple(int(s) for s in signs[0]))
    return best, witness


def _column_choice_norm(T: FiniteOperator, choice: np.ndarray) -> float:
    off = T.domain.offsets
    img = T.columns[:, off + choice].sum(axis=1)
    return float(T.range.weights @ np.abs(img))


def _scan_column_choices(T: FiniteOperator, cap: int) -> float:
    """max over one-column-per-block choices of ||sum_i column_i||_1."""
    shape = T.domain
    total = 1
    for b in shape.blocks:
        total *= b
    if total > cap:
        raise ScaleError(f"{total} column choices exceed the cap {cap}")
    w = T.range.weights
    off = shape.offsets
    best = 0.0
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        rem = idx.copy()
        img = np.zeros((idx.size, T.n_atoms))
        for i in range(shape.n_blocks - 1, -1, -1):
            d = rem % shape.blocks[i]
            rem //= shape.blocks[i]
            img += T.columns[:, off[i] + d].T
        best = max(best, float(np.max(np.abs(img) @ w)))
    return best


def _hill_climb(T: FiniteOperator, seed: int, iters: int, restarts: int = 50) -> float:
    """Best-single-block-change ascent from seeded random extreme points."""
    rng = np.random.default_rng(seed)
    shape = T.domain
    off = shape.offsets
    w = T.range.weights
    best = 0.0
    for _ in range(restarts):
        coords = np.array([rng.integers(b) for b in shape.blocks])
        signs = rng.choice([-1, 1], size=shape.n_blocks)
        img = np.zeros(T.n_atoms)
        for i in range(shape.n_blocks):
            img += signs[i] * T.columns[:, off[i] + coords[i]]
        val = float(w @ np.abs(img))
        for _ in range(iters):
            move = None
            move_val = val
            for i in range(shape.n_blocks):
                base = img - signs[i] * T.columns[:, off[i] + coords[i]]
                cand = base[:, None] + np.concatenate(
                    [T.columns[:, off[i] : off[i] + shape.blocks[i]],
                     -T.columns[:, off[i] : off[i] + shape.blocks[i]]],
                    axis=1,
                )
                vals = w @ np.abs(cand)
                k = int(np.argmax(vals))
                if vals[k] > move_val + 1e-15:
                    move_val = float(vals[k])
                    j, s = (k, 1) if k < shape.blocks[i] else (k - shape.blocks[i], -1)
                    move = (i, j, s)
            if move is None:
                break
            i, j, s = move
            img += s * T.columns[:, off[i] + j] - signs[i] * T.columns[:, off[i] + coords[i]]
            coords[i], signs[i] = j, s
            val = move_val
        best = max(best, val)
    return best


def operator_norm(
    T: FiniteOperator,
    mode: str = "exact",
    seed: int = 0,
    iters: int = 100,
    cap: int = ENUMERATION_CAP,
) -> float:
    """Operator norm into L1; a certified lower bound when mode="search".

    "exact" maximizes the image norm over all extreme points of the domain
    ball.  "symmetric" drops the sign enumeration and maximizes over column
    choices only, which is valid precisely when the entries form a symmetric
    sequence (the operator must be flagged symmetric_entries).  "search" runs
    seeded coordinate-flip hill climbing and reports the best value found.
    """
    if mode == "exact":
        value, _ = _scan_extreme_norms(T, cap)
        return value
    if mode == "symmetric":
        if not T.symmetric_entries:
            raise ContractError(
                "symmetric mode requires an operator asserted to have symmetric entries"
            )
        return _scan_column_choices(T, cap)
    if mode == "search":
        return _hill_climb(T, seed, iters)
    raise ValueError(f"unknown mode {mode!r}")


def triangle_norm_bound(T: FiniteOperator) -> float:
    """sum_i max_j ||column_{i,j}||_1 -- a cheap upper bound on the norm."""
    w = T.range.weights
    col_norms = np.abs(T.columns).T @ w
    off = 0
    total = 0.0
    for b in T.domain.blocks:
        total += float(col_norms[off : off + b].max())
        off += b
    return total


def identity_operator(n: int) -> FiniteOperator:
    """id on l1^n: a single block mapped to counting-n by the identity matrix."""
    return FiniteOperator(DomainShape((n,)), AtomSpace.counting(n), np.eye(n))


def max_block_l2(T: FiniteOperator) -> np.ndarray:
    """Per block, the largest squared L2 column norm."""
    sq = T.range.weights @ (T.columns * T.columns)
    out = np.empty(T.domain.n_blocks)
    off = 0
    for i, b in enumerate(T.domain.blocks):
        out[i] = float(sq[off : off + b].max())
        off += b
    return out


def image_l1_norm(T: FiniteOperator, x) -> float:
    return weighted_norm(T.range, apply_operator(T, x), 1)

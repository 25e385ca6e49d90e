"""Atomic measure spaces, functions on them, and elementary lattice/norm operations.

Everything downstream (operators, lattice bounds, factorizations, random
matrices) computes its L1/L2/Linf quantities through this module.  Spaces are
finite lists of weighted atoms; a probability space has weights summing to 1,
a counting space has all weights equal to 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArityError, DimensionError, InvalidBoundError

# Absolute comparison tolerance for invariant checks, unless an operation
# states otherwise.
TOL = 1e-9

_PROB_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AtomSpace:
    """A finite atomic measure space: positive weights, one per atom."""

    weights: np.ndarray
    kind: str = "counting"  # "counting" | "probability"

    def __post_init__(self):
        w = _readonly(self.weights)
        object.__setattr__(self, "weights", w)
        if w.ndim != 1 or w.size == 0:
            raise DimensionError("weights must be a nonempty 1-d array")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise InvalidBoundError("every atom weight must be a positive real")
        if self.kind == "probability":
            if abs(float(w.sum()) - 1.0) > _PROB_TOL:
                raise InvalidBoundError("probability weights must sum to 1")
        elif self.kind == "counting":
            if np.any(w != 1.0):
                raise InvalidBoundError("counting weights must all equal 1")
        else:
            raise ValueError(f"unknown space kind {self.kind!r}")

    @property
    def n_atoms(self) -> int:
        return int(self.weights.size)

    @staticmethod
    def counting(n: int) -> AtomSpace:
        return AtomSpace(np.ones(n), "counting")

    @staticmethod
    def uniform_probability(n: int) -> AtomSpace:
        return AtomSpace(np.full(n, 1.0 / n), "probability")

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "weights": self.weights.tolist()})

    @staticmethod
    def from_json(text: str) -> AtomSpace:
        obj = json.loads(text)
        return AtomSpace(np.asarray(obj["weights"], dtype=float), obj["kind"])


@dataclass(frozen=True)
class L1Fun:
    """A function on an atomic space, stored as one value per atom."""

    values: np.ndarray

    def __post_init__(self):
        v = _readonly(self.values)
        object.__setattr__(self, "values", v)
        if v.ndim != 1:
            raise DimensionError("values must be a 1-d array")

    def __len__(self) -> int:
        return int(self.values.size)

    def to_json(self) -> str:
        return json.dumps({"values": self.values.tolist()})

    @staticmethod
    def from_json(text: str) -> L1Fun:
        return L1Fun(np.asarray(json.loads(text)["values"], dtype=float))


@dataclass(frozen=True)
class AtomSet:
    """A strictly increasing set of atom indices."""

    indices: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise DimensionError("indices must be strictly increasing")
        if idx and idx[0] < 0:
            raise DimensionError("indices must be nonnegative")

    def __len__(self) -> int:
        return len(self.indices)

    def mask(self, n: int) -> np.ndarray:
        if self.indices and self.indices[-1] >= n:
            raise DimensionError(f"atom index {self.indices[-1]} out of range for {n} atoms")
        m = np.zeros(n, dtype=bool)
        if self.indices:
            m[list(self.indices)] = True
        return m

    def isdisjoint(self, other: AtomSet) -> bool:
        return not set(self.indices) & set(other.indices)

    @staticmethod
    def union(sets: list[AtomSet]) -> AtomSet:
        out: set[int] = set()
        for s in sets:
            out |= set(s.indices)
        return AtomSet(tuple(sorted(out)))


def _match(space: AtomSpace, f: L1Fun) -> np.ndarray:
    if len(f) != space.n_atoms:
        raise DimensionError(f"function has {len(f)} values but space has {space.n_atoms} atoms")
    return f.values


def weighted_norm(space: AtomSpace, f: L1Fun, p: float = 1) -> float:
    """(sum_w w*|f|^p)^(1/p) for p in {1, 2}; max|f| for p = inf."""
    v = _match(space, f)
    if p == math.inf:
        return float(np.max(np.abs(v))) if v.size else 0.0
    if p == 1:
        return float(space.weights @ np.abs(v))
    if p == 2:
        return float(math.sqrt(space.weights @ (v * v)))
    raise ValueError("p must be 1, 2 or inf")


def pos_excess(space: AtomSpace, f: L1Fun, g: L1Fun) -> float:
    """L1 mass of |f| above the candidate bound g: ||(|f| - g)^+||_1."""
    fv = _match(space, f)
    gv = _match(space, g)
    if np.any(gv < 0):
        raise InvalidBoundError("lattice bound candidate must be nonnegative")
    return float(space.weights @ np.maximum(np.abs(fv) - gv, 0.0))


def abs_join(fs: list[L1Fun]) -> L1Fun:
    """Pointwise maximum of |f| over a nonempty family."""
    if not fs:
        raise ArityError("abs_join needs at least one function")
    n = len(fs[0])
    out = np.zeros(n)
    for f in fs:
        if len(f) != n:
            raise DimensionError("all functions must live on the same atom set")
        np.maximum(out, np.abs(f.values), out=out)
    return L1Fun(out)


def restrict_norm(space: AtomSpace, f: L1Fun, E: AtomSet) -> float:
    """L1 norm of f restricted to the atom set E."""
    v = _match(space, f)
    m = E.mask(space.n_atoms)
    return float(space.weights[m] @ np.abs(v[m]))

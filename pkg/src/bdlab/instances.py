"""Seeded instance generators shared by the test suite and the command line.

Everything here is deterministic in the seed, and every instance satisfies
the documented preconditions of the operation it feeds (unit norms, disjoint
sets, norm-1 operators), so the generators can back batch experiments.
"""

from __future__ import annotations

import numpy as np

from .measure import AtomSpace, AtomSet, L1Fun
from .operators import DomainShape, FiniteOperator, identity_operator, operator_norm


def spread_family(n: int, delta: float, seed: int):
    """n unit-ball functions, each with delta mass on its own singleton atom
    and the leftover budget sprinkled over the other atoms."""
    rng = np.random.default_rng(seed)
    space = AtomSpace.counting(n)
    fs, Es = [], []
    for i in range(n):
        v = np.zeros(n)
        v[i] = delta
        budget = rng.uniform(0.0, 1.0 - delta)
        others = np.delete(np.arange(n), i)
        share = rng.dirichlet(np.ones(n - 1)) * budget
        v[others] = share * rng.choice([-1.0, 1.0], size=n - 1)
        fs.append(L1Fun(v))
        Es.append(AtomSet((i,)))
    return space, fs, Es


def heavy_row_family(n: int, delta: float, heavy: int, seed: int):
    """Like spread_family but one function dumps its whole leftover budget
    evenly across the other sets, making its cross-mass row dominate."""
    rng = np.random.default_rng(seed)
    space = AtomSpace.counting(n)
    fs, Es = [], []
    for i in range(n):
        v = np.zeros(n)
        v[i] = delta
        if i == heavy:
            others = np.delete(np.arange(n), i)
            v[others] = (1.0 - delta) / (n - 1)
        else:
            j = int(rng.integers(n - 1))
            j = j + 1 if j >= i else j
            v[j] = 1e-4
        fs.append(L1Fun(v))
        Es.append(AtomSet((i,)))
    return space, fs, Es


def james_pipeline_instance(k: int, r: int, theta: float, seed: int):
    """An operator whose K = k^r columns are near-disjoint unit indicators.

    Columns live on counting-K; column j is (1-theta) e_j plus theta spread
    with random signs, so the image system has lower constant >= 1 - 2 theta
    and distortion close to 1.
    """
    rng = np.random.default_rng(seed)
    K = k**r
    cols = np.zeros((K, K))
    for j in range(K):
        cols[j, j] = 1.0 - theta
        share = rng.dirichlet(np.ones(K - 1)) * theta
        others = np.delete(np.arange(K), j)
        cols[others, j] = share * rng.choice([-1.0, 1.0], size=K - 1)
    T = FiniteOperator(DomainShape((K,)), AtomSpace.counting(K), cols)
    ys = [np.eye(K)[:, j] for j in range(K)]
    return T, ys


def dor_system(k: int, block: int, gamma: float, seed: int):
    """k near-indicator functions on disjoint blocks, mildly perturbed.

    The perturbation size is shrunk (deterministically) until the measured
    distortion stays safely below sqrt(2).
    """
    from .lattice import l1_equivalence

    rng = np.random.default_rng(seed)
    n = k * block
    space = AtomSpace.counting(n)
    base = np.zeros((k, n))
    for j in range(k):
        base[j, j * block : (j + 1) * block] = 1.0 / block
    noise = rng.standard_normal((k, n))
    noise /= np.abs(noise).sum(axis=1, keepdims=True)
    g = gamma
    while True:
        hs = [L1Fun(base[j] + g * noise[j]) for j in range(k)]
        cert = l1_equivalence(space, hs)
        if cert.lower > 0 and cert.distortion() < 1.38:
            return space, hs, cert
        g *= 0.5


def scaled_probability_identity(n: int) -> FiniteOperator:
    """Unit-norm identity-like operator into the uniform probability space."""
    space = AtomSpace.uniform_probability(n)
    return FiniteOperator(DomainShape((n,)), space, float(n) * np.eye(n))


def normalized_random_operator(blocks, n_atoms: int, seed: int) -> FiniteOperator:
    """Dense random columns rescaled so the exact operator norm is 1."""
    rng = np.random.default_rng(seed)
    shape = DomainShape(tuple(blocks))
    cols = rng.standard_normal((n_atoms, shape.total_dim))
    T = FiniteOperator(shape, AtomSpace.counting(n_atoms), cols)
    nrm = operator_norm(T, mode="exact")
    return FiniteOperator(shape, T.range, cols / nrm)


def escape_corpus(seed: int = 0):
    """Named norm-<=1 operators for dichotomy experiments: both horns appear."""
    return [
        ("identity_l1_32", identity_operator(32)),
        ("identity_l1_36", identity_operator(36)),
        ("probability_identity_32", scaled_probability_identity(32)),
        ("identity_l1_4", identity_operator(4)),
        ("identity_l1_8", identity_operator(8)),
        ("random_block_2x2", normalized_random_operator((2, 2), 6, seed + 1)),
        ("random_single_block", normalized_random_operator((5,), 8, seed + 2)),
    ]

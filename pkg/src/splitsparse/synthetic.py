"""Seeded problem instances and the recovery-success test.

Each instance draws from three independent tagged streams derived from
``spec.seed``: ``block/<i>`` for the orthogonal blocks, ``signal`` for the
sparse truth and ``noise`` for the measurement noise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BlockDictionary, random_dictionary
from .seeding import sub_seed

SUCCESS_TOL = 1e-4


@dataclass(frozen=True)
class InstanceSpec:
    seed: int
    m: int
    p: int
    K: int
    noise_level: float = 0.0

    def __post_init__(self):
        if not 0 <= self.K <= self.m * self.p:
            raise ValueError(f"K must lie in [0, {self.m * self.p}], got {self.K}")
        if self.noise_level < 0:
            raise ValueError("noise_level must be >= 0")


@dataclass(frozen=True, eq=False)
class Instance:
    A: BlockDictionary
    x_star: np.ndarray
    y: np.ndarray
    spec: InstanceSpec | None = None


def gen_sparse_vector(seed, n, K):
    """Length-``n`` vector with exactly ``K`` standard-Gaussian nonzeros on a uniform random support."""
    if not 0 <= K <= n:
        raise ValueError(f"K must lie in [0, {n}], got {K}")
    rng = np.random.default_rng(seed)
    x = np.zeros(n)
    support = rng.choice(n, size=K, replace=False)
    vals = rng.standard_normal(K)
    while np.any(vals == 0.0):
        zero = vals == 0.0
        vals[zero] = rng.standard_normal(int(zero.sum()))
    x[support] = vals
    return x


def gen_instance(spec):
    A = random_dictionary(spec.seed, spec.m, spec.p)
    x_star = gen_sparse_vector(sub_seed(spec.seed, "signal"), A.n, spec.K)
    y = A.apply(x_star)
    if spec.noise_level > 0:
        h = np.random.default_rng(sub_seed(spec.seed, "noise")).standard_normal(spec.m)
        y = y + spec.noise_level * h
    return Instance(A=A, x_star=x_star, y=y, spec=spec)


def relative_error(x_hat, x_star):
    return float(np.linalg.norm(np.asarray(x_hat) - x_star) / np.linalg.norm(x_star))


def recovery_success(x_hat, x_star, tol=SUCCESS_TOL):
    if np.linalg.norm(x_star) == 0:
        raise ValueError("recovery success is undefined for a zero truth vector")
    return relative_error(x_hat, x_star) <= tol

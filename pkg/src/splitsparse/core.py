"""Dense kernels for dictionaries made of concatenated orthogonal blocks.

A dictionary ``A = [Phi_1, ..., Phi_p]`` is held as a ``(p, m, m)`` stack of
square orthogonal blocks. Global column ``j`` lives in block ``j // m`` at
local column ``j % m``. All indices are 0-based.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .seeding import sub_seed

ORTHO_TOL = 1e-10
RANK_TOL = 1e-12
NORMAL_EQ_TOL = 1e-9


class DimensionError(ValueError):
    """Array shapes or sizes do not fit the operation."""


class SupportTooWideError(ValueError):
    """A restricted least-squares support has more columns than rows."""


def _check_finite(x, name):
    if not np.all(np.isfinite(x)):
        raise ArithmeticError(f"{name} contains NaN or Inf")


def make_orthogonal_block(seed, m):
    """Seeded random orthogonal ``m x m`` matrix.

    Q comes from the QR factorization of a standard Gaussian matrix, with
    each column sign-flipped so that the matching diagonal entry of R is
    positive. This pins down the otherwise arbitrary sign convention.
    """
    if m < 2:
        raise DimensionError(f"block dimension must be >= 2, got {m}")
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((m, m))
    Q, R = np.linalg.qr(G)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


@dataclass(frozen=True, eq=False)
class BlockDictionary:
    """Immutable concatenation of ``p`` orthogonal ``m x m`` blocks."""

    blocks: np.ndarray

    def __post_init__(self):
        blocks = np.array(self.blocks, dtype=np.float64, order="C")
        if blocks.ndim != 3 or blocks.shape[1] != blocks.shape[2]:
            raise DimensionError(f"blocks must have shape (p, m, m), got {blocks.shape}")
        p, m, _ = blocks.shape
        if p < 2 or m < 2:
            raise DimensionError(f"need p >= 2 and m >= 2, got p={p}, m={m}")
        _check_finite(blocks, "blocks")
        eye = np.eye(m)
        for i, B in enumerate(blocks):
            err = np.max(np.abs(B.T @ B - eye))
            if err > ORTHO_TOL:
                raise ValueError(f"block {i} is not orthogonal (max |B^T B - I| = {err:.3e})")
        blocks.setflags(write=False)
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_blocks(cls, blocks):
        return cls(np.stack([np.asarray(b, dtype=np.float64) for b in blocks]))

    @property
    def p(self):
        return self.blocks.shape[0]

    @property
    def m(self):
        return self.blocks.shape[1]

    @property
    def n(self):
        return self.p * self.m

    def block_of(self, j):
        """Map a global column index to ``(block, local column)``."""
        return divmod(int(j), self.m)

    def apply(self, x):
        """``A @ x`` without the bounds checks of :func:`dictionary_apply`."""
        xs = x.reshape(self.p, self.m)
        out = self.blocks[0] @ xs[0]
        for B, xi in zip(self.blocks[1:], xs[1:]):
            out = out + B @ xi
        return out

    def adjoint(self, v):
        """``A.T @ v`` as the concatenation of ``Phi_i.T @ v``."""
        return (v @ self.blocks).ravel()

    def columns(self, idx):
        """Gather the ``m x len(idx)`` submatrix of the given global columns."""
        idx = np.asarray(idx, dtype=np.intp)
        return self.blocks[idx // self.m, :, idx % self.m].T

    def dense(self):
        """Explicit ``m x pm`` matrix. Meant for oracles and small problems."""
        return np.hstack(list(self.blocks))


def random_dictionary(seed, m, p):
    """Dictionary of ``p`` independently seeded orthogonal blocks."""
    return BlockDictionary(
        np.stack([make_orthogonal_block(sub_seed(seed, f"block/{i}"), m) for i in range(p)])
    )


def dictionary_apply(A, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.n,):
        raise DimensionError(f"expected vector of length {A.n}, got shape {x.shape}")
    _check_finite(x, "x")
    return A.apply(x)


def dictionary_adjoint(A, v):
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (A.m,):
        raise DimensionError(f"expected vector of length {A.m}, got shape {v.shape}")
    _check_finite(v, "v")
    return A.adjoint(v)


def top_k_indices(x, K):
    """Indices of the ``K`` largest-magnitude entries, sorted ascending.

    Ties in magnitude go to the smaller index.
    """
    x = np.asarray(x)
    K = int(K)
    if K < 0 or K > x.size:
        raise ValueError(f"K must lie in [0, {x.size}], got {K}")
    if K == 0:
        return np.empty(0, dtype=np.intp)
    order = np.argsort(-np.abs(x), kind="stable")
    return np.sort(order[:K])


def hard_threshold(x, K):
    """Keep the ``K`` largest-magnitude entries of ``x`` and zero the rest."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    idx = top_k_indices(x, K)
    out[idx] = x[idx]
    return out


def mutual_coherence(A):
    """Largest absolute inner product between distinct normalized columns.

    Columns inside one orthogonal block are orthonormal, so only the
    cross-block Gram matrices ``Phi_i.T @ Phi_j`` (i < j) can contribute.
    """
    mu = 0.0
    for i in range(A.p):
        for j in range(i + 1, A.p):
            mu = max(mu, float(np.max(np.abs(A.blocks[i].T @ A.blocks[j]))))
    return min(mu, 1.0)


def restricted_least_squares(A, y, support, allow_wide=False):
    """Least-squares fit of ``y`` using only the columns in ``support``.

    Returns a length-``pm`` vector supported on ``support``. The solve goes
    through a QR factorization of the gathered columns. A numerically
    rank-deficient column set falls back to the minimum-norm solution.

    With ``allow_wide=True`` a support wider than ``m`` is accepted and
    solved in the minimum-norm sense instead of raising.
    """
    y = np.asarray(y, dtype=np.float64)
    support = np.asarray(support, dtype=np.intp)
    x = np.zeros(A.n)
    if support.size == 0:
        return x
    if support.size > A.m and not allow_wide:
        raise SupportTooWideError(
            f"support of size {support.size} exceeds the row count m={A.m}"
        )
    cols = A.columns(support)
    if support.size <= A.m:
        Q, R = np.linalg.qr(cols)
        diag = np.abs(np.diag(R))
        if diag.min() >= RANK_TOL * diag.max():
            x[support] = solve_triangular(R, Q.T @ y)
            return x
    x[support] = np.linalg.lstsq(cols, y, rcond=None)[0]
    return x

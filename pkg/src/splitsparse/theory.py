"""Coherence bounds, contraction ratios and randomized inequality oracles.

The closed forms come in two flavours where the printed statement of the
multi-block result and its derivation disagree. ``variant="proof"`` (the
default) uses ``(1 - 2 tau1)**2`` in ``tau2`` and ``(1 - 2 K mu)`` in the
first factor of ``eta``; ``variant="statement"`` uses the ``3`` versions.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    BlockDictionary,
    hard_threshold,
    make_orthogonal_block,
    mutual_coherence,
    restricted_least_squares,
)
from .seeding import sub_seed

OMEGA = (math.sqrt(5.0) + 1.0) / 2.0
C_TSAA = math.sqrt(2.0) / (3.0 * OMEGA**3)
BRUTE_FORCE_MAX_N = 24
BRUTE_FORCE_MAX_K = 3
BRUTE_FORCE_RTOL = 1e-8
# relative slack for floating-point round-off when comparing both sides
ORACLE_SLACK = 1e-10

_VARIANTS = ("proof", "statement")


class UndefinedRatioError(ValueError):
    """A contraction ratio has a nonpositive denominator at these parameters."""


class EnumerationTooLargeError(ValueError):
    """Support enumeration would exceed the brute-force guard."""


def _check_variant(variant):
    if variant not in _VARIANTS:
        raise ValueError(f"variant must be one of {_VARIANTS}, got {variant!r}")


def tau1(p):
    return 2.0 / (OMEGA * (1.0 + 2.0 * OMEGA**2 * (3 * p - 2) * math.sqrt(p)))


def tau2(p, variant="proof"):
    _check_variant(variant)
    t1 = tau1(p)
    k = 2.0 if variant == "proof" else 3.0
    return 2.0 * (2.0 - OMEGA * t1) * (1.0 - k * t1) ** 2 / (OMEGA**3 * (3 * p - 2) * p**2.5)


@dataclass(frozen=True)
class ConvergenceConstants:
    p: int = 2
    variant: str = "proof"
    omega: float = field(default=OMEGA, init=False)
    c: float = field(default=C_TSAA, init=False)

    @property
    def tau1(self):
        return tau1(self.p)

    @property
    def tau2(self):
        return tau2(self.p, self.variant)


def uniqueness_bound(mu):
    """Sparsity levels strictly below ``(1 + 1/mu) / 2`` have a unique sparsest solution."""
    if not 0 < mu <= 1:
        raise ValueError(f"mu must lie in (0, 1], got {mu}")
    return 0.5 * (1.0 + 1.0 / mu)


def tsaa_condition_rhs(mu, m):
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    c = C_TSAA
    return min(c, c * (1 - c) ** 2 / (m**2 * mu**2)) / (2.0 * mu)


def tsaa_contraction_ratio(K, mu, m):
    if 2 * K * mu >= 1:
        raise UndefinedRatioError(f"need 2*K*mu < 1, got {2 * K * mu}")
    w = OMEGA
    return (3 * K * w**3 * mu / 2) * math.sqrt(
        (1 + (m * mu / (1 - K * mu)) ** 2)
        * (1 + (m * mu / (1 - 2 * K * mu)) ** 2)
        * (1 + (3 * K * w * mu / 2) ** 2)
    )


def msaa_condition_rhs(mu, m, p, variant="proof"):
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    return min(tau1(p), tau2(p, variant) / (m**2 * mu**2)) / mu


def msaa_contraction_ratio(K, mu, m, p, variant="proof"):
    _check_variant(variant)
    k = 2.0 if variant == "proof" else 3.0
    w = OMEGA
    if 1 - k * K * mu <= 0 or 1 - K * mu <= 0 or 2 - w * K * mu <= 0:
        raise UndefinedRatioError(f"denominator nonpositive at K={K}, mu={mu}")
    lead = w**3 * K * mu * (3 * p - 2) * math.sqrt(p) / (2 - w * K * mu)
    return lead * math.sqrt(
        (1 + (p * m * mu / (2 * (1 - k * K * mu))) ** 2)
        * (1 + (p * m * mu / (2 * (1 - K * mu))) ** 2)
    )


@dataclass
class BoundReport:
    mu: float
    m: int
    p: int
    K: int
    uniqueness_bound: float
    tsaa_rhs: float | None = None
    msaa_rhs: float | None = None
    condition_holds: bool = False
    rho: float | None = None
    eta: float | None = None

    def to_dict(self):
        return dict(vars(self))


def bound_report(mu, m, p, K, variant="proof"):
    """Evaluate every bound for one ``(mu, m, p, K)``.

    ``condition_holds`` refers to the two-block condition when ``p == 2`` and
    to the multi-block one otherwise. Ratios are omitted where undefined.
    """
    rep = BoundReport(mu=mu, m=m, p=p, K=K, uniqueness_bound=uniqueness_bound(mu))
    rep.msaa_rhs = msaa_condition_rhs(mu, m, p, variant)
    try:
        rep.eta = msaa_contraction_ratio(K, mu, m, p, variant)
    except UndefinedRatioError:
        pass
    if p == 2:
        rep.tsaa_rhs = tsaa_condition_rhs(mu, m)
        try:
            rep.rho = tsaa_contraction_ratio(K, mu, m)
        except UndefinedRatioError:
            pass
        rep.condition_holds = K < rep.tsaa_rhs
    else:
        rep.condition_holds = K < rep.msaa_rhs
    return rep


def max_certified_sparsity(mu, m, p):
    """Largest integer K that strictly satisfies the convergence condition (may be 0)."""
    rhs = tsaa_condition_rhs(mu, m) if p == 2 else msaa_condition_rhs(mu, m, p)
    return max(math.ceil(rhs) - 1, 0)


def block_norm(z, p):
    """The (p, inf) norm: largest Euclidean norm over the p equal-length slices."""
    return float(np.max(np.linalg.norm(np.asarray(z).reshape(p, -1), axis=1)))


# --- randomized oracles -----------------------------------------------------


@dataclass
class OracleReport:
    name: str
    trials: int
    violations: int = 0
    skipped: int = 0
    max_ratio: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.violations == 0

    def record(self, lhs, rhs):
        if rhs > 0:
            self.max_ratio = max(self.max_ratio, lhs / rhs)
        if lhs > rhs * (1 + ORACLE_SLACK) + ORACLE_SLACK:
            self.violations += 1


def check_hk_bound(trials, n, K, seed=0):
    """Hard-thresholding error against any K-sparse vector.

    Checks ``||x - H_K(z)|| <= omega * ||(x - z)_{S u S*}||``. ``max_ratio`` is
    reported as a fraction of the bound, so it never exceeds 1.
    """
    if not 0 <= K <= n:
        raise ValueError("need 0 <= K <= n")
    rng = np.random.default_rng(sub_seed(seed, "hk"))
    rep = OracleReport("hk_bound", trials)
    for t in range(trials):
        x = np.zeros(n)
        S = rng.choice(n, size=K, replace=False)
        x[S] = rng.standard_normal(K)
        # half the trials sample z near x, where the bound is tighter
        scale = 10.0 ** rng.uniform(-3, 1) if t % 2 else 1.0
        z = x + scale * rng.standard_normal(n) if t % 2 else rng.standard_normal(n) * rng.uniform(0.1, 3)
        hz = hard_threshold(z, K)
        idx = np.union1d(np.flatnonzero(x), np.flatnonzero(hz))
        lhs = np.linalg.norm(x - hz)
        rhs = OMEGA * np.linalg.norm((x - z)[idx])
        rep.record(lhs, rhs)
    return rep


def check_row_bound(trials, l1, l2, alpha, seed=0):
    """``||M u|| <= (l1 + l2)/2 * alpha * ||u||`` for entries bounded by ``alpha``."""
    rng = np.random.default_rng(sub_seed(seed, "row"))
    rep = OracleReport("row_bound", trials)
    for t in range(trials):
        if t % 3 == 0:
            M = alpha * rng.choice([-1.0, 1.0], size=(l1, l2))
        else:
            M = rng.uniform(-alpha, alpha, size=(l1, l2))
        u = rng.standard_normal(l2)
        rep.record(np.linalg.norm(M @ u), 0.5 * (l1 + l2) * alpha * np.linalg.norm(u))
    return rep


def _sample_dictionary(rng, m, p):
    return BlockDictionary(
        np.stack([make_orthogonal_block(int(rng.integers(2**63)), m) for _ in range(p)])
    )


def hadamard_pair(m, rotation=None):
    """``[I, H]`` with ``H`` the normalized Sylvester Hadamard matrix, optionally rotated.

    Coherence is ``1/sqrt(m)``, the smallest any two orthogonal blocks allow.
    """
    if m < 2 or m & (m - 1):
        raise ValueError("m must be a power of two")
    H = np.array([[1.0]])
    while H.shape[0] < m:
        H = np.block([[H, H], [H, -H]])
    H /= math.sqrt(m)
    I = np.eye(m)
    if rotation is not None:
        I, H = rotation @ I, rotation @ H
    return BlockDictionary(np.stack([I, H]))


def check_offdiag_bound(trials, m, p, lam_size, seed=0):
    """Restricted off-diagonal Gram bound for ``|Lambda| < m``.

    Uses ``mu (|L| ||u_L|| + m ||u_Lc||)`` for ``p == 2`` and the
    ``p*m/2`` form otherwise (the two agree at ``p == 2``).
    """
    if not 0 <= lam_size < m:
        raise ValueError("need 0 <= lam_size < m")
    rng = np.random.default_rng(sub_seed(seed, f"offdiag/{p}"))
    rep = OracleReport("offdiag_bound", trials)
    A = None
    for t in range(trials):
        if t % 10 == 0:
            A = _sample_dictionary(rng, m, p)
            mu = mutual_coherence(A)
            G = A.dense().T @ A.dense() - np.eye(A.n)
        lam = np.sort(rng.choice(A.n, size=lam_size, replace=False))
        mask = np.zeros(A.n, dtype=bool)
        mask[lam] = True
        u = rng.standard_normal(A.n)
        if t % 4 == 1:
            u[~mask] = 0.0
        lhs = np.linalg.norm((G @ u)[mask])
        second = m if p == 2 else 0.5 * p * m
        rhs = mu * (lam_size * np.linalg.norm(u[mask]) + second * np.linalg.norm(u[~mask]))
        rep.record(lhs, rhs)
    return rep


def check_ls_error_bound(trials, m, p, K, seed=0):
    """Least-squares projection error bound for ``K <= |Lambda| < 1/mu``.

    Dictionaries alternate between fully random blocks and (for ``p == 2``,
    ``m`` a power of two) randomly rotated ``[I, H]`` pairs, which reach the
    lowest possible coherence. Trials with no admissible ``|Lambda|`` are
    skipped and counted.
    """
    rng = np.random.default_rng(sub_seed(seed, f"ls/{p}"))
    rep = OracleReport("ls_error_bound", trials)
    use_hadamard = p == 2 and m >= 2 and not (m & (m - 1))
    for t in range(trials):
        if use_hadamard and t % 2:
            A = hadamard_pair(m, make_orthogonal_block(int(rng.integers(2**63)), m))
        else:
            A = _sample_dictionary(rng, m, p)
        mu = mutual_coherence(A)
        hi = math.ceil(1.0 / mu) - 1  # largest |Lambda| with |Lambda| * mu < 1
        if K < 1 or K > hi:
            rep.skipped += 1
            continue
        size = int(rng.integers(K, hi + 1))
        x_star = np.zeros(A.n)
        x_star[rng.choice(A.n, size=K, replace=False)] = rng.standard_normal(K)
        y = A.apply(x_star)
        if t % 5 == 0:
            supp = np.flatnonzero(x_star)
            rest = np.setdiff1d(np.arange(A.n), supp)
            lam = np.union1d(supp, rng.choice(rest, size=size - K, replace=False))
        else:
            lam = np.sort(rng.choice(A.n, size=size, replace=False))
        z = restricted_least_squares(A, y, lam)
        mask = np.ones(A.n, dtype=bool)
        mask[lam] = False
        factor = m * mu / (1 - size * mu) if p == 2 else p * m * mu / (2 * (1 - size * mu))
        lhs = np.linalg.norm(z - x_star)
        rhs = math.sqrt(1 + factor**2) * np.linalg.norm((z - x_star)[mask])
        rep.record(lhs, rhs)
    rep.details["feasible"] = trials - rep.skipped
    return rep


def brute_force_sparsest(A, y, Kmax):
    """Sparsest exact representation of ``y`` with at most ``Kmax`` columns.

    Supports are enumerated by size, then lexicographically; the first one
    whose least-squares residual is within ``1e-8 * ||y||`` wins. Returns
    ``None`` when no support of size <= ``Kmax`` fits. ``y = 0`` gives zero.
    """
    if A.n > BRUTE_FORCE_MAX_N or Kmax > BRUTE_FORCE_MAX_K:
        raise EnumerationTooLargeError(
            f"enumeration limited to n <= {BRUTE_FORCE_MAX_N}, Kmax <= {BRUTE_FORCE_MAX_K}"
        )
    y = np.asarray(y, dtype=np.float64)
    ynorm = np.linalg.norm(y)
    if ynorm == 0:
        return np.zeros(A.n)
    for k in range(1, Kmax + 1):
        for support in itertools.combinations(range(A.n), k):
            x = restricted_least_squares(A, y, np.array(support))
            if np.linalg.norm(y - A.apply(x)) <= BRUTE_FORCE_RTOL * ynorm:
                return x
    return None

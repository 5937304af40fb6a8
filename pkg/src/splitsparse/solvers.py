"""Splitting alternating solvers (TSAA, MSAA) and baseline sparse solvers.

Every solver is written as a generator of iterates. :func:`_drive` pulls
iterates and applies the shared stopping rules, in this order:

1. residual ``||y - A x|| <= residual_tol`` (also checked before iterating),
2. relative iterate change ``||x_k - x_{k-1}|| / ||x_k|| <= iterate_tol``,
3. ``max_iters`` reached.

Setting a tolerance to ``None`` disables that rule.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import islice

import numpy as np

from .core import hard_threshold, restricted_least_squares, top_k_indices

KINDS = ("TSAA", "MSAA", "IHT", "HTP", "SP", "CoSaMP", "OMP", "FISTA")
BASELINES = ("IHT", "HTP", "SP", "CoSaMP", "OMP", "FISTA")
DEFAULT_MAX_ITERS = {
    "TSAA": 100, "MSAA": 100, "HTP": 100, "SP": 100, "CoSaMP": 100,
    "IHT": 3000, "FISTA": 3000,
}
FISTA_LAMBDA = 4e-5


class WrongSolverError(ValueError):
    """The solver does not accept a dictionary with this many blocks."""


@dataclass(frozen=True)
class SolverConfig:
    K: int
    tau: int | None = None
    max_iters: int = 100
    residual_tol: float | None = 0.0
    iterate_tol: float | None = 1e-8
    record_trace: bool = False
    fista_lambda: float = FISTA_LAMBDA

    def __post_init__(self):
        if self.K < 0:
            raise ValueError(f"K must be >= 0, got {self.K}")
        if self.tau is None:
            object.__setattr__(self, "tau", self.K)
        if not self.K <= self.tau <= 2 * self.K:
            raise ValueError(f"tau must satisfy K <= tau <= 2K, got K={self.K}, tau={self.tau}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        for name in ("residual_tol", "iterate_tol"):
            tol = getattr(self, name)
            if tol is not None and tol < 0:
                raise ValueError(f"{name} must be >= 0 or None")


@dataclass
class SolverState:
    """Iterate plus the partition vectors ``y_i = Phi_i x_i`` for blocks 1..p-1.

    Block 0's partition is implicit (``y`` minus the others).
    """

    x: np.ndarray
    partitions: np.ndarray
    iteration: int = 0
    residual_norm: float = float("nan")


@dataclass
class TraceEntry:
    iteration: int
    residual_norm: float
    nnz: int
    error: float | None = None
    block_error: float | None = None


@dataclass
class SolveResult:
    x_hat: np.ndarray
    iterations: int
    final_residual: float
    stop_reason: str
    solver: str = ""
    trace: list[TraceEntry] | None = field(default=None, repr=False)

    def to_dict(self):
        out = {
            "solver": self.solver,
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "stop_reason": self.stop_reason,
            "nnz": int(np.count_nonzero(self.x_hat)),
            "x_hat": self.x_hat.tolist(),
        }
        if self.trace is not None:
            out["trace"] = [vars(t) for t in self.trace]
        return out


def initial_state(A, y, x0=None, partitions=None):
    """Default start: ``x = 0`` and every stored partition equal to ``y / p``."""
    x = np.zeros(A.n) if x0 is None else np.array(x0, dtype=np.float64)
    if x.shape != (A.n,):
        raise ValueError(f"x0 must have length {A.n}")
    if partitions is None:
        parts = np.tile(np.asarray(y, dtype=np.float64) / A.p, (A.p - 1, 1))
    else:
        parts = np.array(partitions, dtype=np.float64).reshape(A.p - 1, A.m)
    res = float(np.linalg.norm(y - A.apply(x)))
    return SolverState(x=x, partitions=parts, iteration=0, residual_norm=res)


def _split_pass(A, y, partitions, K):
    """Alternating block sweep producing the intermediate point ``x_tilde``."""
    m = A.m
    x_tilde = np.zeros(A.n)
    u = y - partitions.sum(axis=0)
    for i in range(A.p):
        xi = hard_threshold(A.blocks[i].T @ u, K)
        x_tilde[i * m:(i + 1) * m] = xi
        if i < A.p - 1:
            # u_{i+1} = u_i - Phi_i x_tilde_i + y_{i+1}
            u = u - A.blocks[i] @ xi + partitions[i]
    return x_tilde


def _saa_step(state, A, y, cfg):
    K, tau = cfg.K, cfg.tau
    x_tilde = _split_pass(A, y, state.partitions, K)
    d = A.adjoint(y - A.apply(state.x))
    lam = np.union1d(top_k_indices(x_tilde, tau), top_k_indices(d, 2 * K - tau))
    x_hat = restricted_least_squares(A, y, lam, allow_wide=True)
    S = top_k_indices(x_hat, K)
    x_new = restricted_least_squares(A, y, S)
    xs = x_new.reshape(A.p, A.m)
    parts = np.stack([A.blocks[i] @ xs[i] for i in range(1, A.p)])
    res = float(np.linalg.norm(y - A.apply(x_new)))
    return SolverState(x=x_new, partitions=parts, iteration=state.iteration + 1, residual_norm=res)


def _check_sparsity(A, cfg):
    if cfg.K > A.m:
        raise ValueError(f"K={cfg.K} exceeds the block dimension m={A.m}")


def tsaa_step(state, A, y, cfg):
    """One sweep, merge and prune pass of the two-block algorithm."""
    if A.p != 2:
        raise WrongSolverError(f"TSAA needs exactly 2 blocks, got p={A.p}")
    _check_sparsity(A, cfg)
    return _saa_step(state, A, np.asarray(y, dtype=np.float64), cfg)


def msaa_step(state, A, y, cfg):
    """One sweep, merge and prune pass of the multi-block algorithm (``p > 2``)."""
    if A.p <= 2:
        raise WrongSolverError(f"MSAA needs more than 2 blocks, got p={A.p}")
    _check_sparsity(A, cfg)
    return _saa_step(state, A, np.asarray(y, dtype=np.float64), cfg)


def _saa_iterates(step, state, A, y, cfg):
    while True:
        state = step(state, A, y, cfg)
        yield state.x


def _drive(name, A, y, cfg, iterates, x0, truth=None, finalize=None):
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise ArithmeticError("y contains NaN or Inf")
    if truth is not None:
        truth = np.asarray(truth, dtype=np.float64)
    trace = [] if cfg.record_trace else None

    x = x0
    res = float(np.linalg.norm(y - A.apply(x)))
    k = 0
    reason = "max-iters"
    if cfg.residual_tol is not None and res <= cfg.residual_tol:
        reason = "residual"
    else:
        for x_new in islice(iterates, cfg.max_iters):
            k += 1
            res = float(np.linalg.norm(y - A.apply(x_new)))
            if not np.isfinite(res):
                raise ArithmeticError(f"{name} diverged at iteration {k}")
            if trace is not None:
                entry = TraceEntry(k, res, int(np.count_nonzero(x_new)))
                if truth is not None:
                    diff = x_new - truth
                    entry.error = float(np.linalg.norm(diff))
                    entry.block_error = float(np.max(np.linalg.norm(diff.reshape(A.p, A.m), axis=1)))
                trace.append(entry)
            x_prev, x = x, x_new
            if cfg.residual_tol is not None and res <= cfg.residual_tol:
                reason = "residual"
                break
            if cfg.iterate_tol is not None:
                xn = np.linalg.norm(x)
                change = np.linalg.norm(x - x_prev) / xn if xn > 0 else np.inf
                if change <= cfg.iterate_tol:
                    reason = "iterate-change"
                    break
    if finalize is not None:
        x = finalize(x)
    final_res = float(np.linalg.norm(y - A.apply(x)))
    return SolveResult(x_hat=np.array(x), iterations=k, final_residual=final_res,
                       stop_reason=reason, solver=name, trace=trace)


def tsaa_solve(A, y, cfg, x0=None, yb0=None, truth=None):
    """Two-block splitting alternating algorithm.

    Defaults to ``x0 = 0`` and ``y_b = y / 2``. ``truth``, if given, adds
    error-to-truth values to the trace.
    """
    if A.p != 2:
        raise WrongSolverError(f"TSAA needs exactly 2 blocks, got p={A.p}")
    y = np.asarray(y, dtype=np.float64)
    state = initial_state(A, y, x0, yb0)
    its = _saa_iterates(tsaa_step, state, A, y, cfg)
    return _drive("TSAA", A, y, cfg, its, state.x, truth)


def msaa_solve(A, y, cfg, x0=None, initials=None, truth=None):
    """Multi-block splitting alternating algorithm for ``p > 2``.

    ``initials`` holds the starting partitions for blocks 2..p, shape
    ``(p - 1, m)``; the default is ``y / p`` for each.
    """
    if A.p <= 2:
        raise WrongSolverError(f"MSAA needs more than 2 blocks, got p={A.p}")
    y = np.asarray(y, dtype=np.float64)
    state = initial_state(A, y, x0, initials)
    its = _saa_iterates(msaa_step, state, A, y, cfg)
    return _drive("MSAA", A, y, cfg, its, state.x, truth)


def _iht(A, y, K):
    x = np.zeros(A.n)
    while True:
        x = hard_threshold(x + A.adjoint(y - A.apply(x)), K)
        yield x


def _htp(A, y, K):
    x = np.zeros(A.n)
    while True:
        S = top_k_indices(x + A.adjoint(y - A.apply(x)), K)
        x = restricted_least_squares(A, y, S)
        yield x


def _sp(A, y, K):
    x = np.zeros(A.n)
    S = np.empty(0, dtype=np.intp)
    while True:
        T = np.union1d(S, top_k_indices(A.adjoint(y - A.apply(x)), K))
        b = restricted_least_squares(A, y, T, allow_wide=True)
        S = top_k_indices(b, K)
        x = restricted_least_squares(A, y, S)
        yield x


def _cosamp(A, y, K):
    x = np.zeros(A.n)
    S = np.empty(0, dtype=np.intp)
    width = min(2 * K, A.n)
    while True:
        T = np.union1d(S, top_k_indices(A.adjoint(y - A.apply(x)), width))
        b = restricted_least_squares(A, y, T, allow_wide=True)
        S = top_k_indices(b, K)
        x = np.zeros(A.n)
        x[S] = b[S]
        yield x


def _omp(A, y, K):
    S = []
    x = np.zeros(A.n)
    for _ in range(min(K, A.m)):
        corr = np.abs(A.adjoint(y - A.apply(x)))
        corr[S] = -1.0
        S.append(int(np.argmax(corr)))
        x = restricted_least_squares(A, y, np.sort(S))
        yield x


def _fista(A, y, lam):
    # A A^T = p I, so the Lipschitz constant of the gradient is exactly p.
    L = float(A.p)
    thresh = lam / (2 * L)
    x = np.zeros(A.n)
    z = x.copy()
    t = 1.0
    while True:
        g = z - A.adjoint(A.apply(z) - y) / L
        x_new = np.sign(g) * np.maximum(np.abs(g) - thresh, 0.0)
        t_new = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        z = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t = x_new, t_new
        yield x


def _baseline_iterates(kind, A, y, cfg):
    K = cfg.K
    if kind == "IHT":
        return _iht(A, y, K)
    if kind == "HTP":
        return _htp(A, y, K)
    if kind == "SP":
        return _sp(A, y, K)
    if kind == "CoSaMP":
        return _cosamp(A, y, K)
    if kind == "OMP":
        return _omp(A, y, K)
    if kind == "FISTA":
        return _fista(A, y, cfg.fista_lambda)
    raise ValueError(f"unknown solver kind {kind!r}; expected one of {KINDS}")


def iterates(kind, A, y, cfg):
    """Raw iterates of any solver from its default starting point.

    No stopping rule is applied and FISTA iterates are not thresholded.
    OMP's generator ends after ``min(K, m)`` selections.
    """
    y = np.asarray(y, dtype=np.float64)
    if kind in ("TSAA", "MSAA"):
        step = tsaa_step if kind == "TSAA" else msaa_step
        return _saa_iterates(step, initial_state(A, y), A, y, cfg)
    _check_sparsity(A, cfg)
    return _baseline_iterates(kind, A, y, cfg)


def baseline_solve(kind, A, y, cfg, truth=None):
    """Run one of the textbook baselines with the shared stopping rules.

    OMP always performs ``min(K, m)`` selections regardless of ``max_iters``.
    FISTA's output is hard-thresholded to ``K`` entries at the end.
    """
    y = np.asarray(y, dtype=np.float64)
    _check_sparsity(A, cfg)
    its = _baseline_iterates(kind, A, y, cfg)
    finalize = None
    if kind == "OMP":
        cfg = replace(cfg, max_iters=min(cfg.K, A.m))
    elif kind == "FISTA":
        finalize = lambda x: hard_threshold(x, cfg.K)  # noqa: E731
    return _drive(kind, A, y, cfg, its, np.zeros(A.n), truth, finalize)


def solve(kind, A, y, cfg, truth=None):
    """Dispatch to any solver in :data:`KINDS` with default initial points."""
    if kind == "TSAA":
        return tsaa_solve(A, y, cfg, truth=truth)
    if kind == "MSAA":
        return msaa_solve(A, y, cfg, truth=truth)
    return baseline_solve(kind, A, y, cfg, truth=truth)

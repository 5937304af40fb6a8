"""Acceptance criteria at the stated tolerances and desk scale (m = 200).

Each test carries a ``criterion`` marker; ``conftest.py`` prints one
PASS/FAIL line per criterion at the end of the run. Run only these with
``pytest -m acceptance``.
"""
import math
import time

import numpy as np
import pytest

from splitsparse import cli
from splitsparse.core import make_orthogonal_block, mutual_coherence, random_dictionary
from splitsparse.harness import SweepSpec, run_few_iteration_study, run_sweep
from splitsparse.imaging import make_phantom, reconstruct_image
from splitsparse.solvers import SolverConfig, msaa_solve, tsaa_solve
from splitsparse.synthetic import gen_sparse_vector
from splitsparse.theory import (
    C_TSAA,
    brute_force_sparsest,
    check_hk_bound,
    check_ls_error_bound,
    check_offdiag_bound,
    check_row_bound,
    hadamard_pair,
    msaa_condition_rhs,
    msaa_contraction_ratio,
    tau1,
    tau2,
    tsaa_condition_rhs,
    tsaa_contraction_ratio,
)

pytestmark = pytest.mark.acceptance


def condition_rhs(mu, m, p):
    return tsaa_condition_rhs(mu, m) if p == 2 else msaa_condition_rhs(mu, m, p)


def search_condition_instances(want, sizes, block_counts, K_values, draws, seed):
    """Rejection-sample dictionaries until ``want`` (A, K) pairs satisfy the condition.

    Half of the two-block candidates are rotated [I, H] pairs, which attain
    the smallest coherence two orthogonal blocks can have. Returns the
    accepted pairs and the largest right-hand side encountered.
    """
    rng = np.random.default_rng(seed)
    found, best_rhs = [], 0.0
    for d in range(draws):
        m = sizes[d % len(sizes)]
        p = block_counts[(d // len(sizes)) % len(block_counts)]
        if p == 2 and not m & (m - 1) and rng.random() < 0.5:
            A = hadamard_pair(m, make_orthogonal_block(int(rng.integers(2**63)), m))
        else:
            A = random_dictionary(int(rng.integers(2**63)), m, p)
        rhs = condition_rhs(mutual_coherence(A), m, p)
        best_rhs = max(best_rhs, rhs)
        for K in K_values:
            if K < rhs and len(found) < want:
                found.append((A, K, int(rng.integers(2**63))))
        if len(found) >= want:
            break
    return found, best_rhs


@pytest.mark.criterion(1, "few-iteration recovery, TSAA budget 7, m=200")
def test_few_iteration_recovery(record_property):
    t0 = time.perf_counter()
    spec = SweepSpec(m=200, p=2, K_grid=list(range(10, 81, 10)), trials_per_K=50,
                     solvers=["TSAA"], master_seed=1, workers=4)
    rep = run_few_iteration_study(spec, [7])
    elapsed = time.perf_counter() - t0
    rates = {K: rep.rate("TSAA", K, 7) for K in spec.K_grid}
    record_property("detail", f"rates={rates} time={elapsed:.1f}s")
    assert all(r >= 0.95 for K, r in rates.items() if K <= 0.35 * 200)
    assert elapsed < 120


@pytest.mark.criterion(2, "phase-transition ordering at K/m=0.40, TSAA vs IHT")
def test_phase_transition_ordering(record_property):
    t0 = time.perf_counter()
    spec = SweepSpec(m=200, p=2, K_grid=[80], trials_per_K=50, solvers=["TSAA", "IHT"],
                     noise_level=5e-5, master_seed=2, workers=4)
    rep = run_sweep(spec)
    elapsed = time.perf_counter() - t0
    tsaa, iht = rep.rate("TSAA", 80), rep.rate("IHT", 80)
    record_property("detail", f"TSAA={tsaa:.2f} IHT={iht:.2f} time={elapsed:.1f}s")
    assert tsaa - iht >= 0.3
    assert elapsed < 600


@pytest.mark.criterion(3, "oracle equivalence on 200 condition-satisfying m=8 instances")
def test_oracle_equivalence(record_property):
    t0 = time.perf_counter()
    found, best_rhs = search_condition_instances(200, [8], [2, 3], [1, 2], draws=20_000, seed=3)
    matches = 0
    for A, K, sseed in found:
        x_star = gen_sparse_vector(sseed, A.n, K)
        y = A.apply(x_star)
        solver = tsaa_solve if A.p == 2 else msaa_solve
        out = solver(A, y, SolverConfig(K=K)).x_hat
        ref = brute_force_sparsest(A, y, K)
        if ref is not None and np.linalg.norm(out - ref) <= 1e-8 * np.linalg.norm(ref):
            matches += 1
    elapsed = time.perf_counter() - t0
    record_property("detail", f"condition-satisfying instances found={len(found)} of 200 "
                              f"(largest K bound seen {best_rhs:.4f}), matches={matches}, "
                              f"time={elapsed:.1f}s")
    assert len(found) == 200, "no m=8 dictionary satisfies the convergence condition"
    assert matches == len(found)
    assert elapsed < 60


@pytest.mark.criterion(4, "randomized inequality oracles, 1000 trials each")
def test_oracle_suites(record_property):
    t0 = time.perf_counter()
    reports = [
        check_hk_bound(1000, 32, 5, seed=4),
        check_row_bound(1000, 7, 11, 0.3, seed=4),
        *(check_offdiag_bound(1000, 16, p, 5, seed=4) for p in (2, 3, 5)),
        *(check_ls_error_bound(1000, 16, p, 1, seed=4) for p in (2, 3)),
    ]
    elapsed = time.perf_counter() - t0
    summary = ", ".join(f"{r.name}:{r.violations}" for r in reports)
    record_property("detail", f"violations {summary}; time={elapsed:.1f}s")
    assert all(r.ok for r in reports)
    assert any(r.details.get("feasible", 0) > 0 for r in reports if r.name == "ls_error_bound")
    assert elapsed < 60


@pytest.mark.criterion(5, "bound consistency over 10^4 parameter tuples")
def test_bound_consistency(record_property):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    n = 10_000
    mus = 10.0 ** rng.uniform(-5, 0, n)
    ms = rng.integers(2, 2000, n)
    ps = rng.integers(2, 9, n)
    bad = {"rho": 0, "eta": 0, "chain": 0, "relax": 0}
    sat_t = sat_m = sat_r = 0
    scale = 3 / (4 * math.sqrt(2))
    for mu, m, p in zip(mus, ms, ps):
        mu, m, p = float(mu), int(m), int(p)
        hi = max(2, int(2 * msaa_condition_rhs(mu, m, 2)) + 2)
        K = int(rng.integers(0, hi))
        t_rhs, m_rhs = tsaa_condition_rhs(mu, m), msaa_condition_rhs(mu, m, p)
        if K < t_rhs:
            sat_t += 1
            bad["rho"] += not tsaa_contraction_ratio(K, mu, m) < 1
        if K < m_rhs:
            sat_m += 1
            bad["eta"] += not msaa_contraction_ratio(K, mu, m, p) < 1
            if K >= 1:
                sat_r += 1
                rho = tsaa_contraction_ratio(K, mu, m)
                eta2, etap = (msaa_contraction_ratio(K, mu, m, q) for q in (2, p))
                bad["relax"] += not (rho < scale * eta2 <= scale * etap)
        bad["chain"] += not (t_rhs <= C_TSAA / (2 * mu) < 0.5 * (1 + 1 / mu))
    consts_ok = tau1(2) < C_TSAA / 2 and tau2(2) < C_TSAA * (1 - C_TSAA) ** 2 / 2
    elapsed = time.perf_counter() - t0
    record_property("detail", f"satisfying TSAA={sat_t} MSAA={sat_m} (K>=1: {sat_r}); "
                              f"failures={bad}; time={elapsed:.1f}s")
    assert consts_ok
    assert all(v == 0 for v in bad.values())
    assert min(sat_t, sat_m, sat_r) > 0
    assert elapsed < 30


@pytest.mark.criterion(6, "contraction trace on 20 condition-satisfying instances")
def test_contraction_trace(record_property):
    t0 = time.perf_counter()
    sizes = [8, 16, 64]
    two, best2 = search_condition_instances(20, sizes, [2], [1], draws=3_000, seed=6)
    multi, best3 = search_condition_instances(20, sizes, [3], [1], draws=3_000, seed=7)
    violations = 0
    for (A, K, sseed), eta_mode in [(t, False) for t in two] + [(t, True) for t in multi]:
        x_star = gen_sparse_vector(sseed, A.n, K)
        y = A.apply(x_star)
        cfg = SolverConfig(K=K, record_trace=True, residual_tol=None, iterate_tol=None,
                           max_iters=8)
        mu = mutual_coherence(A)
        if eta_mode:
            res = msaa_solve(A, y, cfg, truth=x_star)
            ratio = msaa_contraction_ratio(K, mu, A.m, A.p)
            prev = [e.block_error for e in res.trace]
        else:
            res = tsaa_solve(A, y, cfg, truth=x_star)
            ratio = tsaa_contraction_ratio(K, mu, A.m)
            prev = [e.error for e in res.trace]
        errs = [e.error for e in res.trace]
        violations += sum(errs[k + 1] > ratio * prev[k] + 1e-12 for k in range(len(errs) - 1))
    elapsed = time.perf_counter() - t0
    record_property("detail", f"TSAA instances={len(two)}/20 (largest K bound {best2:.4f}), "
                              f"MSAA instances={len(multi)}/20 (largest {best3:.4f}), "
                              f"violations={violations}, time={elapsed:.1f}s")
    assert len(two) == 20 and len(multi) == 20, "no dictionary satisfies the condition with K >= 1"
    assert violations == 0
    assert elapsed < 60


@pytest.mark.criterion(7, "imaging: 64x64 phantom PSNR gains, TSAA vs IHT")
def test_imaging(record_property):
    t0 = time.perf_counter()
    img = make_phantom(64)
    _, tsaa = reconstruct_image(img, record_iters=(1, 9, 10), levels=6, seed=7)
    _, iht = reconstruct_image(img, record_iters=(10,), levels=6, seed=7, solver="IHT")
    p = dict(tsaa)
    elapsed = time.perf_counter() - t0
    record_property("detail", f"TSAA IT1={p[1]:.2f} IT9={p[9]:.2f} IT10={p[10]:.2f} dB, "
                              f"IHT IT10={iht[0][1]:.2f} dB, time={elapsed:.1f}s")
    assert p[9] - p[1] >= 5
    assert p[10] - iht[0][1] >= 3
    assert elapsed < 60


@pytest.mark.criterion(8, "determinism: sweep and image CSV reruns are byte-identical")
def test_determinism(tmp_path, record_property):
    import json

    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"m": 64, "p": 2, "K_grid": [8, 16, 24], "trials_per_K": 5,
                                "solvers": ["TSAA", "IHT", "OMP"], "noise_level": 1e-4,
                                "master_seed": 8,
                                "max_iters": {"IHT": 200}}))
    outs = []
    for i, workers in enumerate(("1", "2")):
        out = tmp_path / f"sweep{i}.csv"
        assert cli.main(["sweep", str(spec), "-o", str(out), "--workers", workers]) == 0
        outs.append(out.read_bytes())
    src = tmp_path / "phantom.pgm"
    assert cli.main(["phantom", str(src), "--size", "32"]) == 0
    imgs = []
    for i in range(2):
        csv_path = tmp_path / f"img{i}.csv"
        assert cli.main(["image", str(src), str(tmp_path / f"r{i}.pgm"), "--levels", "5",
                         "--csv", str(csv_path)]) == 0
        imgs.append(csv_path.read_bytes())
    record_property("detail", f"sweep CSV {len(outs[0])} bytes, image CSV {len(imgs[0])} bytes")
    assert outs[0] == outs[1]
    assert imgs[0] == imgs[1]
    assert (tmp_path / "r0.pgm").read_bytes() == (tmp_path / "r1.pgm").read_bytes()

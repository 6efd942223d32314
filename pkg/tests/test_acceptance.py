"""Acceptance criteria, one test per criterion.

Each test records a ``PASS``/``FAIL`` line (with its runtime against the
limit) that is printed as it runs and repeated in the pytest terminal
summary.  A criterion passes only if its check holds within the limit.

Run alone with ``pytest tests/test_acceptance.py -v`` or
``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from diststate.diffusive import Schedule, make_nodes, run_asynchronous, run_synchronous
from diststate.harness import parse_config, run_experiment
from diststate.incremental import (
    approximation_error_exact,
    block_pinv,
    block_pinv_formula,
    communications_expected,
    incremental_min_norm,
    run_incremental,
    wls_incremental,
    wls_oracle,
)
from diststate.linalg import (
    moore_penrose_errors,
    pinv_kernel_check,
    pseudoinverse,
    record_pseudoinverses,
)
from diststate.network import (
    MonitorGraph,
    random_consistent_system,
    random_noisy_system,
)

RESULTS: list[str] = []
EPSILONS = (1.0, 0.1, 0.01)


def record(number: int, title: str, ok: bool, elapsed: float, limit: float | None,
           detail: str) -> bool:
    within = limit is None or elapsed < limit
    passed = bool(ok and within)
    budget = f"{elapsed:.2f}s" + (f" < {limit:g}s" if limit is not None else "")
    if not within:
        budget += " (over limit)"
    line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2} {title}: {detail} [{budget}]"
    RESULTS.append(line)
    print(line)
    return passed


def noisy_instance(seed: int):
    rng = np.random.default_rng([seed, 2])
    n = int(rng.integers(2, 9))
    p = int(rng.integers(n + 1, 2 * n + 6))
    return random_noisy_system(n, p, int(rng.integers(1, min(p, 5) + 1)), seed=seed)


# -- 1 ---------------------------------------------------------------------------


def test_criterion_01_min_norm_oracle():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng([seed, 1])
        n = int(rng.integers(1, 41))
        m = int(rng.integers(1, 7))
        p = int(rng.integers(m, 81))
        rank = int(rng.integers(1, min(n, p) + 1))
        s = random_consistent_system(n, m, seed=seed, rows=p, rank=rank)
        x = incremental_min_norm(s.plain_blocks())
        oracle = pseudoinverse(s.H) @ s.z
        worst = max(worst, np.linalg.norm(x - oracle) / max(np.linalg.norm(oracle), 1e-300))
    ok = record(1, "min-norm oracle", worst <= 1e-8, time.perf_counter() - t0, 10,
                f"100 systems, worst relative deviation {worst:.2e} (<= 1e-8)")
    assert ok


# -- 2 ---------------------------------------------------------------------------


def test_criterion_02_block_formula():
    t0 = time.perf_counter()
    worst = 0.0
    worst_ratio = 0.0
    for seed in range(50):
        s = noisy_instance(seed)
        W = wls_oracle(s.H, s.Sigma, np.zeros(s.H.shape[0])).W
        gaps = []
        for eps in EPSILONS:
            direct = pseudoinverse(np.hstack([s.H, eps * s.B]))
            F = block_pinv_formula(s.H, s.B, eps)
            worst = max(worst, np.linalg.norm(F - direct) / np.linalg.norm(direct))
            gaps.append(np.linalg.norm(block_pinv(s.H, s.B, eps).top - W))
        worst_ratio = max(worst_ratio, *(b / a for a, b in zip(gaps, gaps[1:])))
    ok = worst <= 1e-8 and worst_ratio <= 0.2
    ok = record(2, "block pseudoinverse formula", ok, time.perf_counter() - t0, 10,
                f"50 instances x eps {EPSILONS}, worst relative deviation {worst:.2e} (<= 1e-8), "
                f"worst per-decade ratio {worst_ratio:.2e} (<= 0.2)")
    assert ok


# -- 3 ---------------------------------------------------------------------------


def test_criterion_03_gap_identity():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(50):
        s = noisy_instance(seed)
        x_wls = wls_oracle(s.H, s.Sigma, s.z).x
        for eps in EPSILONS:
            measured = x_wls - wls_incremental(s.blocks(), eps)
            predicted = approximation_error_exact(s.H, s.B, s.z, eps)
            worst = max(worst, float(np.abs(measured - predicted).max()))
    ok = record(3, "estimation gap identity", worst <= 1e-8, time.perf_counter() - t0, None,
                f"50 instances x eps {EPSILONS}, worst deviation {worst:.2e} (<= 1e-8)")
    assert ok


# -- 4 ---------------------------------------------------------------------------


def test_criterion_04_diffusive_convergence():
    t0 = time.perf_counter()
    worst = 0.0
    over_rounds = 0
    for seed in range(100):
        rng = np.random.default_rng([seed, 4])
        m = int(rng.integers(2, 13))
        n = int(rng.integers(2, 8))
        s = random_noisy_system(n, m + n + int(rng.integers(0, 6)), m, seed=seed)
        graph = MonitorGraph.random_connected(m, seed=seed, extra_prob=float(rng.uniform(0, 0.5)))
        ref = wls_incremental(s.blocks(), 0.01)
        res = run_synchronous(make_nodes(s.blocks(), 0.01), graph)
        over_rounds += res.rounds_used > graph.diameter
        worst = max(worst, max(float(np.abs(x - ref).max()) for x in res.state_estimates))
    worst_async = 0.0
    over_slots = 0
    for seed in range(50):
        rng = np.random.default_rng([seed, 44])
        m = int(rng.integers(2, 13))
        n = int(rng.integers(2, 8))
        s = random_noisy_system(n, m + n + int(rng.integers(0, 6)), m, seed=1000 + seed)
        graph = MonitorGraph.random_connected(m, seed=1000 + seed)
        sched = Schedule.random_fair(m, windows=2 * m + 2, seed=seed)
        ref = wls_incremental(s.blocks(), 0.01)
        res = run_asynchronous(make_nodes(s.blocks(), 0.01), graph, sched)
        over_slots += res.steps > graph.diameter * sched.period
        worst_async = max(worst_async,
                          max(float(np.abs(x - ref).max()) for x in res.state_estimates))
    ok = over_rounds == 0 and over_slots == 0 and max(worst, worst_async) <= 1e-8
    ok = record(4, "diffusive convergence", ok, time.perf_counter() - t0, 60,
                f"100 graphs: {over_rounds} over diameter, worst deviation {worst:.2e}; "
                f"50 fair schedules: {over_slots} over diameter*T, worst deviation "
                f"{worst_async:.2e} (<= 1e-8)")
    assert ok


# -- 5 ---------------------------------------------------------------------------


def test_criterion_05_epsilon_slope():
    t0 = time.perf_counter()
    art = run_experiment(parse_config("kind = epsilon_sweep\n"))
    slope = art.summary["slope"]
    ok = abs(slope - 1.0) <= 0.1 and art.summary["states"] == 117
    ok = record(5, "epsilon sweep slope", ok, time.perf_counter() - t0, 30,
                f"{art.summary['states']} states, log-log slope {slope:.3f} (1.0 +/- 0.1)")
    assert ok


# -- 6 ---------------------------------------------------------------------------


def test_criterion_06_measurement_sweep():
    t0 = time.perf_counter()
    art = run_experiment(parse_config("kind = measurement_sweep\n"))
    means = art.summary["means"]
    ok = means[-1] < means[0] and art.summary["monitors"] == 5
    ok = record(6, "measurement sweep", ok, time.perf_counter() - t0, 120,
                f"mean error {means[0]:.4g} at budget 1 -> {means[-1]:.4g} at budget 5 "
                "(strict decrease)")
    assert ok


# -- 7 ---------------------------------------------------------------------------


def test_criterion_07_detection():
    t0 = time.perf_counter()
    art = run_experiment(parse_config("kind = detection\n"))
    s = art.summary
    contains = s["alarms_including_attacked_region"] == s["alarmed_snapshots"] > 0
    ok = s["false_alarms"] == 0 and s["detection_rate"] >= 0.95 and contains
    ok = record(7, "false data detection", ok, time.perf_counter() - t0, 60,
                f"{s['false_alarms']} false alarms / {s['clean_snapshots']} clean, "
                f"detection rate {s['detection_rate']:.2f} (>= 0.95), attacked region in "
                f"{s['alarms_including_attacked_region']}/{s['alarmed_snapshots']} alarm sets")
    assert ok


# -- 8 ---------------------------------------------------------------------------


def test_criterion_08_lattice_decay():
    t0 = time.perf_counter()
    art = run_experiment(parse_config("kind = lattice_decay\na = 5\nb = 4\n"))
    s = art.summary
    fits = s["fits"]
    ok = s["buses"] == 400 and s["monitors"] == 16
    parts = []
    for key in map(str, s["tracked"]):
        f = fits[key]
        good = ("q" in f and f["error_at_diameter"] <= 1e-8 and 0 < f["q"] < 1
                and f["misfit_decades"] <= 0.5 and f["envelope_dominates"])
        ok = ok and good
        parts.append(f"m{key}: q={f.get('q', float('nan')):.3f} "
                     f"misfit={f.get('misfit_decades', float('nan')):.3f}")
    ok = record(8, "finite-memory decay", ok, time.perf_counter() - t0, 120,
                f"{s['buses']} buses, {s['monitors']} monitors, max error at diameter "
                f"{s['max_error_at_diameter']:.1e}; " + ", ".join(parts))
    assert ok


# -- 9 ---------------------------------------------------------------------------


def test_criterion_09_communication_counts():
    t0 = time.perf_counter()
    checks = []
    for m in (12, 10, 7):
        sys_ = random_consistent_system(4, 1, seed=m, rows=m)
        for k in sorted({1, 2, max(m // 2, 1), m}):
            blocks = [(sys_.H[i : i + k], sys_.z[i : i + k]) for i in range(0, m, k)]
            got = run_incremental(blocks).communications
            checks.append((m, k, got, math.ceil(m / k) - 1))
    art = run_experiment(parse_config("kind = complexity_counts\n"))
    ok = all(g == e for *_, g, e in checks)
    ok = ok and all(communications_expected(m, k) == e for m, k, _, e in checks)
    ok = ok and art.summary["communications"]["12"] == 0 and art.summary["communications"]["1"] == 11
    ok = record(9, "communication counts", ok, time.perf_counter() - t0, None,
                "ceil(m/k) - 1 for m in (12, 10, 7), k in {1, 2, m/2, m}: "
                + ", ".join(f"m={m},k={k}:{g}" for m, k, g, _ in checks))
    assert ok


# -- 10 --------------------------------------------------------------------------


def test_criterion_10_lemma_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    kernels_ok = 0
    for _ in range(50):
        p, n = (int(v) for v in rng.integers(1, 13, size=2))
        r = int(rng.integers(0, min(p, n) + 1))
        M = rng.standard_normal((p, r)) @ rng.standard_normal((r, n))
        kernels_ok += pinv_kernel_check(M)

    with record_pseudoinverses() as pairs:
        for seed in range(5):
            s = noisy_instance(seed)
            wls_incremental(s.blocks(), 0.01)
            block_pinv(s.H, s.B, 0.1)
            graph = MonitorGraph.random_connected(len(s.row_sizes), seed=seed)
            run_synchronous(make_nodes(s.blocks(), 0.01), graph)
        c = random_consistent_system(8, 3, seed=3, rows=12, rank=5)
        incremental_min_norm(c.plain_blocks())
    worst = 0.0
    for M, P, tol in pairs:
        err = moore_penrose_errors(M, P)
        # M P M = M holds up to the singular values cut below the rank tolerance
        nM = max(np.linalg.norm(M, 2), tol, 1e-300)
        nP = max(np.linalg.norm(P, 2), 1e-300)
        mpm = max(err["MPM"] - tol, 0.0) / nM
        worst = max(worst, mpm, err["PMP"] / nP, err["MP_sym"], err["PM_sym"])
    ok = kernels_ok == 50 and worst <= 1e-8 and len(pairs) > 0
    ok = record(10, "pseudoinverse lemma suite", ok, time.perf_counter() - t0, None,
                f"kernel check {kernels_ok}/50; Moore-Penrose on {len(pairs)} recorded "
                f"pseudoinverses, worst normalized violation {worst:.2e} (<= 1e-8)")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))

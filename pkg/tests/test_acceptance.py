"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is echoed in the pytest terminal
summary, then asserts the criterion at its stated tolerance.
"""
import statistics
import time

import numpy as np
import pytest

from _acceptance_log import record
from _cases import bundle_with_patches, patch_permutation_gap, randomize, tiny_case
from _oracles import brute_ap, brute_auc, random_instance
from dwlkit.encodings import TimeEncoding, mite_raw, ncoe, time_encode
from dwlkit.harness.generators import random_dynamic_graph, triangle_graph
from dwlkit.harness.metrics import average_precision, roc_auc
from dwlkit.harness.splits import chronological_split, sample_negatives
from dwlkit.harness.suite import SuiteConfig, expressiveness_suite, twin_paths_checks
from dwlkit.neural import (
    AdamState,
    ModelConfig,
    TrainConfig,
    build_bundles,
    deterministic_history,
    evaluate,
    finite_diff_check,
    init_params,
    train,
    train_step,
)
from dwlkit.temporal_graph import build_dat, hdat_at, tit_at

CORE_PROPERTIES = ("hierarchy", "soundness", "sim_bound", "hope_equals_2dwl")


def test_1_expressiveness_suite():
    start = time.perf_counter()
    report = expressiveness_suite(SuiteConfig(trials=1000, seed=0, max_nodes=6, max_events=10))
    seconds = time.perf_counter() - start
    props = report.properties
    violations = {name: props[name].violations for name in CORE_PROPERTIES}
    ok = props["hierarchy"].trials >= 1000 and not any(violations.values()) and seconds < 120
    detail = f"{props['hierarchy'].trials} pairs, violations {violations}, {seconds:.1f}s"
    assert record(1, "expressiveness suite", ok, detail)


def test_2_twin_paths_counterexample():
    checks = twin_paths_checks()
    failed = [name for name, ok in checks.items() if not ok]
    assert record(2, "twin-paths counterexample", not failed, f"failed checks: {failed or 'none'}")


def test_3_gradient_verification():
    worst, worst_bias, worst_case = 0.0, 0.0, None
    for seed in range(24):
        params, bundle, label = tiny_case(seed)
        rep = finite_diff_check(params, (bundle, label), eps=1e-5)
        if rep.max_error > worst:
            worst, worst_case = rep.max_error, (seed, rep.worst()[0])
        worst_bias = max(worst_bias, rep.errors["score.b"])
    ok = worst < 1e-4 and worst_bias < 1e-8
    detail = f"24 configurations, max rel error {worst:.2e} at {worst_case}, scorer bias {worst_bias:.2e}"
    assert record(3, "gradient verification", ok, detail)


def test_4_metric_oracles():
    rng = np.random.default_rng(2024)
    gap = 0.0
    for _ in range(100):
        scores, labels = random_instance(rng, int(rng.integers(2, 201)))
        gap = max(gap, abs(average_precision(scores, labels) - brute_ap(scores, labels)))
        gap = max(gap, abs(roc_auc(scores, labels) - brute_auc(scores, labels)))
    assert record(4, "metric oracles", gap <= 1e-12, f"100 instances, max deviation {gap:.1e}")


def test_5_algebraic_identities():
    rng = np.random.default_rng(5)
    # unit norm of the time encoding
    norm_gap = 0.0
    for d_T in (2, 8, 100):
        enc = TimeEncoding(rng.uniform(1e-6, 10.0, d_T // 2))
        dts = np.concatenate([[0.0], rng.exponential(1e3, 500)])
        norm_gap = max(norm_gap, float(np.max(np.abs(np.linalg.norm(time_encode(dts, enc), axis=-1) - 1.0))))
        enc = TimeEncoding.geometric(d_T)
        norm_gap = max(norm_gap, float(np.max(np.abs(np.linalg.norm(time_encode(dts, enc), axis=-1) - 1.0))))

    # counting nonzero interval slots recovers co-occurrence counts when K covers the history
    ncoe_ok = True
    for seed in range(30):
        g = random_dynamic_graph(6, 25, 10.0, seed=seed, discrete=bool(seed % 2))
        dat = build_dat(g)
        K = max(1, dat.T)
        t = float(rng.uniform(0.0, 11.0))
        for u, v, w in [(0, 1, 2), (1, 2, 3), (3, 4, 5), (0, 5, 1)]:
            m = mite_raw(dat, u, v, w, t, K)
            ncoe_ok &= ncoe(dat, u, v, w, t) == (np.count_nonzero(m[:K]), np.count_nonzero(m[K:]))

    # intervals and timestamps determine each other exactly on a dyadic grid
    bijection_ok = True
    for seed in range(20):
        g = random_dynamic_graph(5, 30, 16.0, seed=seed, discrete=True)
        dat = build_dat(g)
        for t in (0.5, 3.25, 8.0, 15.75, 20.0):
            for u in range(5):
                for v in range(u + 1, 5):
                    h, d = hdat_at(dat, u, v, t), tit_at(dat, u, v, t)
                    fin = np.isfinite(h)
                    bijection_ok &= np.array_equal(fin, np.isfinite(d))
                    bijection_ok &= np.array_equal(t - d[fin], h[fin]) and np.array_equal(t - h[fin], d[fin])

    perm_gap = 0.0
    for seed in range(10):
        prng = np.random.default_rng(seed)
        P = int(prng.integers(1, 4))
        cfg = ModelConfig(d=8, d_T=4, K=2, d_B=4, n_layers=2, n_heads=2, patch_size=P, limit=6)
        params = randomize(init_params(cfg, seed), prng)
        _, b = bundle_with_patches(prng, P, 4, K=2, limit=6)
        perm_gap = max(perm_gap, patch_permutation_gap(params, b, 4, prng))

    ok = norm_gap <= 1e-12 and ncoe_ok and bijection_ok and perm_gap <= 1e-10
    detail = (f"norm deviation {norm_gap:.1e}, NCOE equality {bool(ncoe_ok)}, "
              f"TIT/HDAT round trip {bool(bijection_ok)}, patch permutation {perm_gap:.1e}")
    assert record(5, "algebraic identities", ok, detail)


def desk_config(seed: int, use_mite: bool) -> TrainConfig:
    return TrainConfig(lr=1e-3, batch_size=200, epochs=8, patience=3, seed=seed, limit=16, patch_size=2,
                       d=16, d_T=16, K=8, d_B=16, use_mite=use_mite)


@pytest.mark.slow
def test_6_mite_benefit():
    start = time.perf_counter()
    g, _ = triangle_graph(n=60, m=2000, seed=0)
    dat = build_dat(g)
    with_mite, without = [], []
    for seed in range(3):
        split = chronological_split(g, seed=seed)
        for use_mite, sink in ((True, with_mite), (False, without)):
            params, _ = train(g, dat, split, desk_config(seed, use_mite))
            sink.append(evaluate(params, g, dat, split, "test").ap)
    seconds = time.perf_counter() - start
    med_mite, med_plain = statistics.median(with_mite), statistics.median(without)
    ok = med_mite > med_plain and seconds < 600
    detail = (f"median test AP {med_mite:.3f} with MITE vs {med_plain:.3f} zeroed, "
              f"per seed {[round(a, 3) for a in with_mite]} vs {[round(a, 3) for a in without]}, {seconds:.0f}s")
    assert record(6, "MITE benefit", ok, detail)


def batch_seconds(g, dat, positions, negatives, limit: int, repeats: int = 3) -> float:
    cfg = TrainConfig(limit=limit, patch_size=4, d=16, d_T=16, K=8, d_B=16, lr=1e-3).model_config(g)
    params = init_params(cfg, 0)
    opt = AdamState.for_params(params, 1e-3)
    src, times = g.src[positions], g.times[positions]
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        pos = build_bundles(g, dat, cfg, src, g.dst[positions], times)
        neg = build_bundles(g, dat, cfg, src, negatives, times)
        train_step(params, opt, [(b, 1) for b in pos] + [(b, 0) for b in neg])
        best = min(best, time.perf_counter() - start)
    return best


@pytest.mark.slow
def test_7_complexity_trend():
    g = random_dynamic_graph(20, 8000, t_max=1000.0, seed=7)
    dat = build_dat(g)
    positions = np.arange(len(g) - 200, len(g))
    negatives = sample_negatives(g, positions, np.random.default_rng(7))
    timings = {L: batch_seconds(g, dat, positions, negatives, L) for L in (16, 32, 64, 128)}
    ratio = timings[128] / timings[16]
    detail = ", ".join(f"{L}: {s:.3f}s" for L, s in timings.items()) + f", ratio {ratio:.2f}"
    assert record(7, "complexity trend", ratio <= 12, detail)


def test_8_determinism():
    cfg = SuiteConfig(trials=300, seed=11)
    first, second = expressiveness_suite(cfg).to_json(), expressiveness_suite(cfg).to_json()

    g, _ = triangle_graph(n=20, m=400, t_max=500.0, seed=3)
    dat, split = build_dat(g), chronological_split(g, seed=3)
    tc = TrainConfig(lr=1e-3, batch_size=100, epochs=3, patience=3, seed=3, limit=8, patch_size=2,
                     d=8, d_T=8, K=4, d_B=8, n_layers=1)
    p1, h1 = train(g, dat, split, tc)
    p2, h2 = train(g, dat, split, tc)
    hist_ok = deterministic_history(h1) == deterministic_history(h2) and p1.equals(p2)
    ok = first == second and hist_ok
    detail = f"suite reports identical {first == second}, training histories and parameters identical {hist_ok}"
    assert record(8, "determinism", ok, detail)

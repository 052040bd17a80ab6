"""Acceptance suite: one test per release criterion, each printing a PASS or
FAIL line (run with ``pytest -s tests/test_acceptance.py -v`` to see them).

Everything runs offline from the vendored fixtures under data/fixtures/ and
the deterministic synthetic generator.
"""

import dataclasses
import math
import os
import time

import numpy as np
import pytest

import neucache as nc
from neucache.data import make_stream, stream_instances
from neucache.policies import entropy, margin
from neucache.simulator import _STREAM_TAG, derive_seed, export_trace
from neucache.student import TrainConfig, cross_entropy_loss_and_grad, evaluate

FIXTURES_DIR = os.path.join(os.path.dirname(__file__), "..", "data", "fixtures")

TABLE_TARGETS = {
    # fixture -> (teacher accuracy, average margin)
    "isear": (0.68, 10.0),
    "rtpolarity": (0.91, 15.4),
    "fever": (0.78, 9.2),
    "openbook": (0.80, 10.3),
}

BENCH_SPEC = nc.SyntheticSpec(
    name="bench",
    class_names=("a", "b", "c", "d"),
    online_size=5000,
    test_size=1000,
    feature_dim=16,
    embedding_dim=8,
    separation=1.5,
    teacher_accuracy=0.9,
    avg_margin=8.0,
    avg_margin_when_wrong=3.0,
    hardness_bias=1.0,
    seed=1234,
)

SEEDS = (0, 1, 2, 3, 4)


def report(criterion: str, ok: bool, detail: str) -> None:
    print(f"{'PASS' if ok else 'FAIL'}: {criterion} -- {detail}")
    assert ok, f"{criterion}: {detail}"


@pytest.fixture(scope="module")
def bench():
    return nc.generate_dataset(BENCH_SPEC)


@pytest.fixture(scope="module")
def spend_stream():
    spec = dataclasses.replace(BENCH_SPEC, name="spend", online_size=5100,
                               test_size=200, seed=555)
    return nc.generate_dataset(spec)


def window_instances(dataset, config):
    stream = make_stream(dataset, derive_seed(config.seed, _STREAM_TAG))
    return stream_instances(dataset, stream)[config.warmup:]


def mean_online(dataset, kind, regime, budget, warmup, freq, seeds=SEEDS):
    accs = []
    for seed in seeds:
        config = nc.ExperimentConfig(
            budget=budget, policy=nc.PolicyConfig(kind=kind),
            retrain_frequency=freq, warmup=warmup, seed=seed, regime=regime,
        )
        accs.append(nc.online_accuracy(nc.run_experiment(dataset, config)))
    return float(np.mean(accs))


def test_table_statistics_reproduction():
    worst = []
    for name, (acc_target, margin_target) in TABLE_TARGETS.items():
        start = time.monotonic()
        dataset = nc.load_dataset(os.path.join(FIXTURES_DIR, name))
        stats = nc.dataset_stats(dataset)
        elapsed = time.monotonic() - start
        ok = (
            abs(stats.teacher_accuracy - acc_target) <= 0.01
            and abs(stats.avg_margin - margin_target) <= 0.3
            and elapsed < 10.0
        )
        worst.append(ok)
        if not ok:
            report("table-statistics", False,
                   f"{name}: acc={stats.teacher_accuracy:.4f} (target {acc_target}), "
                   f"margin={stats.avg_margin:.2f} (target {margin_target}), {elapsed:.1f}s")
    detail = ", ".join(
        f"{n}={nc.dataset_stats(nc.load_dataset(os.path.join(FIXTURES_DIR, n))).teacher_accuracy:.2f}"
        for n in TABLE_TARGETS
    )
    report("table-statistics", all(worst),
           f"accuracy/margins within +/-0.01 / +/-0.3 on all fixtures ({detail})")


def test_budget_limit_endpoints(bench):
    config = nc.ExperimentConfig(
        budget=0.0, policy=nc.PolicyConfig(kind="ms"),
        retrain_frequency=500, warmup=200, seed=0,
    )
    record = nc.run_experiment(bench, config)
    window = window_instances(bench, config)
    zero_ok = nc.online_accuracy(record) == evaluate(record.initial_model, window)

    full = dataclasses.replace(config, policy=nc.PolicyConfig(kind="fr"),
                               budget=float(len(window)))
    record_full = nc.run_experiment(bench, full)
    teacher_acc = float(np.mean([i.teacher_label == i.gold for i in window]))
    full_ok = nc.online_accuracy(record_full) == teacher_acc

    report("budget-limit-endpoints", zero_ok and full_ok,
           f"b=0 equals initial-student accuracy exactly ({zero_ok}); "
           f"b=n*c front-loading equals teacher window accuracy exactly ({full_ok})")


def test_ledger_safety():
    spec = dataclasses.replace(BENCH_SPEC, name="ledger", online_size=300,
                               test_size=60, seed=77)
    dataset = nc.generate_dataset(spec)
    budgets = (0.0, 7.5, 20.0, 55.0, 130.0, 400.0)
    kinds = ("fr", "random", "ms", "pe", "qbc", "cs")
    cells = 0
    for kind in kinds:
        for budget in budgets:
            for seed in (0, 1, 2):
                config = nc.ExperimentConfig(
                    budget=budget, policy=nc.PolicyConfig(kind=kind),
                    train=TrainConfig(max_epochs=8),
                    retrain_frequency=100, warmup=50, seed=seed,
                )
                record = nc.run_experiment(dataset, config)
                spent = record.ledger.spent
                assert spent <= budget, f"{kind} b={budget} seed={seed}: spent {spent}"
                assert record.ledger.remaining >= 0.0
                assert spent + record.ledger.remaining == pytest.approx(budget)
                cells += 1
    report("ledger-safety", cells >= 100,
           f"spend <= budget held in all {cells} (policy, budget, seed) cells")


def test_adaptive_spend_property(spend_stream):
    n = 5000  # scored window length (online 5100, warmup 100)
    failures = []
    for kind in ("ms", "pe"):
        for ratio in (0.1, 0.3, 0.5):
            budget = ratio * n
            calls = []
            for seed in SEEDS:
                config = nc.ExperimentConfig(
                    budget=budget, policy=nc.PolicyConfig(kind=kind),
                    retrain_frequency=10**6, warmup=100, seed=seed,
                    regime="no_retrain",
                )
                record = nc.run_experiment(spend_stream, config)
                calls.append(len(record.ledger.spend_log))
            mean_calls = float(np.mean(calls))
            if abs(mean_calls - budget) > 0.05 * budget:
                failures.append(f"{kind}@{ratio}: {mean_calls:.0f} vs {budget:.0f}")
    report("adaptive-spend", not failures,
           "teacher calls within +/-5% of b/c for ms/pe at b/n in {0.1, 0.3, 0.5}"
           + (f"; failures: {failures}" if failures else ""))


def test_policy_ordering_synthetic(bench):
    start = time.monotonic()
    results = {}
    for regime in ("retrain", "no_retrain"):
        rand = mean_online(bench, "random", regime, 1000.0, warmup=200, freq=500)
        ms = mean_online(bench, "ms", regime, 1000.0, warmup=200, freq=500)
        qbc = mean_online(bench, "qbc", regime, 1000.0, warmup=200, freq=500)
        results[regime] = (rand, ms, qbc)
    elapsed = time.monotonic() - start
    ok = all(
        ms - rand >= 0.01 and qbc - rand >= 0.01
        for rand, ms, qbc in results.values()
    )
    detail = "; ".join(
        f"{regime}: ms-random={ms - rand:+.4f}, qbc-random={qbc - rand:+.4f}"
        for regime, (rand, ms, qbc) in results.items()
    )
    report("policy-ordering-synthetic", ok and elapsed < 600.0,
           f"{detail} (margins >= 0.01 over {len(SEEDS)} seeds, {elapsed:.0f}s)")


def test_policy_ordering_isear_fixture():
    dataset = nc.load_dataset(os.path.join(FIXTURES_DIR, "isear"))
    rand = mean_online(dataset, "random", "no_retrain", 300.0, warmup=300, freq=1000)
    ms = mean_online(dataset, "ms", "no_retrain", 300.0, warmup=300, freq=1000)
    report("policy-ordering-isear", ms >= rand,
           f"no-retrain margin sampling {ms:.4f} >= random {rand:.4f} (direction only)")


def test_criterion_oracles():
    rng = np.random.default_rng(20240601)
    worst_margin = 0.0
    worst_entropy = 0.0
    for _ in range(1000):
        k = int(rng.integers(2, 8))
        lp = np.log(rng.dirichlet(np.ones(k)))
        ordered = sorted(lp, reverse=True)
        brute_m = ordered[0] - ordered[1]
        exps = [math.exp(v - max(lp)) for v in lp]
        probs = [e / sum(exps) for e in exps]
        brute_h = -sum(p * math.log(p) for p in probs if p > 0)
        worst_margin = max(worst_margin, abs(margin(lp) - brute_m))
        worst_entropy = max(worst_entropy, abs(entropy(lp) - brute_h))

    worst_grad = 0.0
    for _ in range(5):
        k = int(rng.integers(2, 5))
        dim = int(rng.integers(2, 9))
        W = rng.normal(scale=0.5, size=(k, dim + 1))
        Xa = np.hstack([rng.normal(size=(10, dim)), np.ones((10, 1))])
        T = rng.dirichlet(np.ones(k), size=10)
        sw = np.ones(10)
        _, grad = cross_entropy_loss_and_grad(W, Xa, T, sw, 1e-3)
        eps = 1e-6
        approx = np.zeros_like(W)
        for i in range(W.shape[0]):
            for j in range(W.shape[1]):
                Wp, Wm = W.copy(), W.copy()
                Wp[i, j] += eps
                Wm[i, j] -= eps
                lp_, _ = cross_entropy_loss_and_grad(Wp, Xa, T, sw, 1e-3)
                lm_, _ = cross_entropy_loss_and_grad(Wm, Xa, T, sw, 1e-3)
                approx[i, j] = (lp_ - lm_) / (2 * eps)
        worst_grad = max(worst_grad,
                         np.linalg.norm(grad - approx) / max(np.linalg.norm(approx), 1e-12))

    ok = worst_margin < 1e-9 and worst_entropy < 1e-9 and worst_grad < 1e-4
    report("criterion-oracles", ok,
           f"margin dev {worst_margin:.1e}, entropy dev {worst_entropy:.1e} "
           f"(tol 1e-9, 1000 distributions); gradient rel dev {worst_grad:.1e} (tol 1e-4)")


def test_determinism_byte_identical(bench, tmp_path):
    config = nc.ExperimentConfig(
        budget=400.0, policy=nc.PolicyConfig(kind="qbc"),
        train=TrainConfig(max_epochs=8), retrain_frequency=500, warmup=200, seed=3,
    )
    pairs = []
    for tag in ("a", "b"):
        record = nc.run_experiment(bench, config)
        trace_path = str(tmp_path / f"trace-{tag}.jsonl")
        export_trace(record, trace_path)
        cells = [nc.simulator.SweepCell(
            policy=record.policy, budget=record.budget, seed=record.seed,
            record=record, metrics=nc.run_metrics(record, bench))]
        rep = nc.build_report(bench.name, cells)
        report_path = str(tmp_path / f"report-{tag}.json")
        with open(report_path, "w") as fh:
            fh.write(nc.metrics.report_to_json(rep))
        pairs.append((trace_path, report_path))
    trace_same = open(pairs[0][0], "rb").read() == open(pairs[1][0], "rb").read()
    report_same = open(pairs[0][1], "rb").read() == open(pairs[1][1], "rb").read()
    report("determinism", trace_same and report_same,
           f"repeated run produced byte-identical trace ({trace_same}) "
           f"and report ({report_same}) files")


def test_oracle_filter_direction():
    spec = dataclasses.replace(
        BENCH_SPEC, name="noisy", online_size=2000, test_size=800,
        separation=2.5, teacher_accuracy=0.7, hardness_bias=0.0, seed=4242,
    )
    dataset = nc.generate_dataset(spec)
    base = nc.ExperimentConfig(
        budget=1000.0, policy=nc.PolicyConfig(kind="fr"),
        retrain_frequency=500, warmup=200, seed=0,
    )
    deltas = []
    for seed in SEEDS:
        config = dataclasses.replace(base, seed=seed)
        plain = nc.run_metrics(nc.run_experiment(dataset, config), dataset)
        filtered_config = dataclasses.replace(config, oracle_filter=True)
        filt = nc.run_metrics(nc.run_experiment(dataset, filtered_config), dataset)
        deltas.append(filt.final_accuracy - plain.final_accuracy)
    mean_delta = float(np.mean(deltas))
    report("oracle-filter-direction", mean_delta > 0.0,
           f"mean final-accuracy delta {mean_delta:+.4f} > 0 over {len(SEEDS)} seeds "
           f"at 30% teacher noise (direction only)")

"""Acceptance gate: the binding system-level requirements, one test per
criterion, in definition order.

Each test prints a one-line summary with the measured quantities. The
conftest collection hook schedules this module after every other test
file, so the final runtime criterion bounds the whole session.
"""

import math
import time

import numpy as np
import pytest
from conftest import (
    FRACTION_GRID,
    SESSION_T0,
    kde_oracle,
    make_dataset,
    max_relative_gradient_error,
)

from ova_drift.asynchrony import compute_alpha, pair_llr
from ova_drift.cli import main
from ova_drift.density import kde_fit, kde_log_density
from ova_drift.embedding import EmbeddingTable
from ova_drift.experiments import (
    BaseConfig,
    SweepConfig,
    SweepKind,
    run_async_sweep,
    run_class_sweep,
    run_staleness_sweep,
)
from ova_drift.models import binary_loss_and_grad, multiclass_loss_and_grad
from ova_drift.registry import Registry, generate_synthetic_corpus, subsample

VARIANCE = 0.01


def test_criterion_01_synchronized_registries_score_exactly_zero():
    start = time.perf_counter()
    table = EmbeddingTable.hashed(dimension=16)
    for k in (2, 5, 10):
        datasets = generate_synthetic_corpus(k, 50, 10, 0.2, (1, 3), seed=k)
        registry = Registry(datasets=datasets)
        registry.materialize(fraction=1.0, staleness=0, seed=0)
        report = compute_alpha(registry, table, VARIANCE, jobs=4)
        assert report.alpha == 0.0
        assert report.alpha_abs == 0.0
        assert all(value == 0.0 for value in report.per_pair.values())
        assert report.skipped_pairs == ()
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    print(f"criterion 1 PASS: alpha exactly 0 for synchronized K=2,5,10 ({elapsed:.2f}s)")


def test_criterion_02_kde_matches_direct_summation_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(202)
    for _ in range(200):
        n = int(rng.integers(1, 11))
        d = int(rng.integers(1, 5))
        variance = float(rng.uniform(0.01, 0.5))
        points = rng.uniform(-0.5, 0.5, size=(n, d))
        query = rng.uniform(-0.5, 0.5, size=d)
        got = kde_log_density(kde_fit(points, variance), query)
        assert got == pytest.approx(kde_oracle(points, variance, query), rel=1e-10, abs=1e-12)
    for d in (1, 2, 3, 4):
        model = kde_fit(np.zeros((1, d)), VARIANCE)
        closed_form = -(d / 2.0) * math.log(2.0 * math.pi * VARIANCE)
        assert kde_log_density(model, np.zeros(d)) == pytest.approx(closed_form, abs=1e-12)
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    print(f"criterion 2 PASS: 200 oracle instances within 1e-10 ({elapsed:.2f}s)")


def test_criterion_03_pair_score_matches_mixture_oracle():
    table = EmbeddingTable(
        dimension=1, entries={"zero": np.array([0.0]), "one": np.array([1.0])}
    )
    original = make_dataset(0, [["zero"], ["one"]])
    copy = subsample(make_dataset(0, [["zero"]]), fraction=1.0, seed=0, consumer_class=1)

    def log_mixture(centers, x):
        dens = sum(
            math.exp(-((x - c) ** 2) / (2.0 * VARIANCE))
            / math.sqrt(2.0 * math.pi * VARIANCE)
            for c in centers
        )
        return math.log(dens / len(centers))

    expected = np.mean(
        [log_mixture([0.0], x) - log_mixture([0.0, 1.0], x) for x in (0.0, 1.0)]
    )
    got = pair_llr(original, copy, table, VARIANCE)
    assert got == pytest.approx(expected, abs=1e-10)
    print(f"criterion 3 PASS: pair score {got:.6f} matches hand mixture {expected:.6f}")


def test_criterion_04_analytic_gradients_match_finite_differences():
    rng = np.random.default_rng(404)
    X = rng.normal(size=(10, 3))
    y = rng.integers(0, 2, size=10).astype(float)
    params = rng.normal(scale=0.5, size=4)
    binary_err = max_relative_gradient_error(
        lambda p: binary_loss_and_grad(p, X, y, 1e-3), params
    )
    assert binary_err <= 1e-4

    k, d = 3, 2
    Xm = rng.normal(size=(10, d))
    ym = rng.integers(0, k, size=10)
    params_m = rng.normal(scale=0.5, size=k * (d + 1))
    multi_err = max_relative_gradient_error(
        lambda p: multiclass_loss_and_grad(p, Xm, ym, 1e-3, k), params_m
    )
    assert multi_err <= 1e-4
    print(
        "criterion 4 PASS: worst relative gradient error "
        f"binary {binary_err:.2e}, multiclass {multi_err:.2e}"
    )


def test_criterion_05_synchronized_ova_matches_multiclass_baseline():
    start = time.perf_counter()
    base = BaseConfig()
    base.k = 4
    result = run_async_sweep(
        SweepConfig(kind=SweepKind.ASYNC_FRACTION, grid=[1.0], base=base), jobs=4
    )
    assert result.failures == []
    mean_abs_gap = float(np.mean([abs(row.gap) for row in result.rows]))
    assert mean_abs_gap <= 0.02
    elapsed = time.perf_counter() - start
    assert elapsed < 120.0
    print(f"criterion 5 PASS: mean |gap| {mean_abs_gap:.4f} <= 0.02 ({elapsed:.1f}s)")


def test_criterion_06_asynchrony_and_gap_grow_as_sharing_shrinks(fraction_sweep):
    result, _ = fraction_sweep
    assert result.failures == []
    means = result.seed_means
    assert [m["sweep_value"] for m in means] == FRACTION_GRID
    aabs = [m["alpha_abs"] for m in means]
    assert aabs[0] == 0.0
    assert all(later > earlier for earlier, later in zip(aabs, aabs[1:]))
    assert means[-1]["gap"] >= means[0]["gap"]
    print(
        "criterion 6 PASS: alpha_abs strictly increases "
        f"{[round(v, 1) for v in aabs]}, gap {means[0]['gap']:.4f} -> {means[-1]['gap']:.4f}"
    )


def test_criterion_07_gap_correlates_with_asynchrony(fraction_sweep):
    result, elapsed = fraction_sweep
    assert result.correlation_abs is not None
    assert abs(result.correlation_abs) >= 0.7
    assert elapsed < 300.0
    print(
        f"criterion 7 PASS: |pearson r| {abs(result.correlation_abs):.4f} >= 0.7 "
        f"({elapsed:.1f}s sweep)"
    )


def test_criterion_08_asynchrony_accumulates_with_class_count():
    base = BaseConfig()
    base.k = 8
    result = run_class_sweep(
        SweepConfig(kind=SweepKind.CLASS_COUNT, grid=[2, 4, 8], base=base), jobs=4
    )
    assert result.failures == []
    aabs = [m["alpha_abs"] for m in result.seed_means]
    assert all(later >= earlier for earlier, later in zip(aabs, aabs[1:]))
    print(f"criterion 8 PASS: alpha_abs non-decreasing over K=2,4,8 {[round(v) for v in aabs]}")


def test_criterion_09_staleness_raises_asynchrony_and_relative_gap():
    result = run_staleness_sweep(
        SweepConfig(kind=SweepKind.STALENESS, grid=[0, 2, 4, 6]), jobs=4
    )
    assert result.failures == []
    means = result.seed_means
    assert means[-1]["alpha_abs"] >= means[0]["alpha_abs"]
    assert means[-1]["rel_gap"] >= means[0]["rel_gap"]

    launched = BaseConfig()
    launched.launch_months = {4: 6}
    launched.seeds = (1, 2)
    launch_result = run_staleness_sweep(
        SweepConfig(kind=SweepKind.STALENESS, grid=[6], base=launched), jobs=4
    )
    assert launch_result.failures == []
    assert all(row.n_skipped_pairs > 0 for row in launch_result.rows)
    print(
        "criterion 9 PASS: rel_gap "
        f"{means[0]['rel_gap']:.4f} -> {means[-1]['rel_gap']:.4f}, "
        f"launched-class runs skip {launch_result.rows[0].n_skipped_pairs} pairs"
    )


def test_criterion_10_every_command_rerun_is_byte_identical(tmp_path, capsys):
    def snapshot(directory):
        return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.is_file()}

    def run(argv):
        code = main(argv)
        capsys.readouterr()
        assert code == 0

    data = tmp_path / "data"
    gen_argv = [
        "gen-data", "--out", str(data), "--classes", "3", "--per-class", "20",
        "--seed", "5", "--vocab-per-class", "10", "--shared-vocab", "10",
        "--fraction", "0.5", "--copies-seed", "3",
    ]
    run(gen_argv)
    generated = snapshot(data)
    run(gen_argv)
    assert snapshot(data) == generated

    manifest = str(data / "manifest.json")
    report = tmp_path / "report.json"
    metric_argv = ["metric", "--manifest", manifest, "--out", str(report)]
    run(metric_argv)
    report_bytes = report.read_bytes()
    run(metric_argv)
    assert report.read_bytes() == report_bytes

    models = tmp_path / "models"
    train_argv = [
        "train", "--manifest", manifest, "--out", str(models),
        "--baseline", "--max-iters", "60",
    ]
    run(train_argv)
    trained = snapshot(models)
    run(train_argv)
    assert snapshot(models) == trained

    evaluation = tmp_path / "eval.json"
    eval_argv = [
        "evaluate", "--model", str(models / "ova_system.json"),
        "--manifest", manifest, "--out", str(evaluation),
    ]
    run(eval_argv)
    eval_bytes = evaluation.read_bytes()
    run(eval_argv)
    assert evaluation.read_bytes() == eval_bytes

    sweep_dir = tmp_path / "sweep"
    sweep_argv = [
        "sweep", "--kind", "async", "--grid", "1.0,0.5", "--out", str(sweep_dir),
        "--seeds", "1,2", "--classes", "3", "--per-class", "60",
        "--vocab-per-class", "10", "--shared-vocab", "10",
        "--dimension", "16", "--jobs", "4",
    ]
    run(sweep_argv)
    swept = snapshot(sweep_dir)
    run(sweep_argv)
    assert snapshot(sweep_dir) == swept

    verdict = tmp_path / "verdict.json"
    health_argv = [
        "health", "--baseline", str(report), "--current", str(report), "--out", str(verdict)
    ]
    run(health_argv)
    verdict_bytes = verdict.read_bytes()
    run(health_argv)
    assert verdict.read_bytes() == verdict_bytes

    print("criterion 10 PASS: all six commands rerun byte-identical")


def test_criterion_11_full_suite_fits_the_runtime_budget():
    elapsed = time.perf_counter() - SESSION_T0
    assert elapsed < 900.0
    print(f"criterion 11 PASS: suite elapsed {elapsed:.0f}s < 900s")

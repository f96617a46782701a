"""Shared fixtures, builders, and hand-rolled oracles for the test suite."""

import math
import time

import numpy as np
import pytest

from ova_drift.experiments import SweepConfig, SweepKind, run_async_sweep
from ova_drift.registry import Dataset, DatasetVersion, Registry, Utterance

FRACTION_GRID = [1.0, 0.9, 0.7, 0.5, 0.3]

SESSION_T0 = time.perf_counter()


def pytest_collection_modifyitems(config, items):
    # Acceptance runs last so its suite-runtime criterion sees the whole session.
    items.sort(key=lambda item: item.module.__name__ == "test_acceptance")


def make_dataset(class_id, token_lists, timestamp=0):
    """Single-version dataset from raw token lists."""
    utts = tuple(Utterance(tokens=tuple(t), class_label=class_id) for t in token_lists)
    return Dataset(class_id=class_id, versions=(DatasetVersion(timestamp, utts),))


def make_registry(per_class_tokens):
    """Registry over one single-version dataset per entry of per_class_tokens."""
    datasets = [make_dataset(c, tokens) for c, tokens in enumerate(per_class_tokens)]
    return Registry(datasets=datasets)


def kde_oracle(points, variance, query):
    """Direct-summation Gaussian mixture log density in plain arithmetic.

    Intentionally naive: per-point normalized kernels summed without any
    log-space tricks, so it only works at well-scaled inputs.
    """
    d = len(query)
    norm = (2.0 * math.pi * variance) ** (d / 2.0)
    total = 0.0
    for p in points:
        sq = sum((a - b) ** 2 for a, b in zip(query, p))
        total += math.exp(-sq / (2.0 * variance)) / norm
    return math.log(total / len(points))


def max_relative_gradient_error(loss_grad, params, step=1e-5):
    """Worst per-component relative gap between analytic and central differences."""
    _, analytic = loss_grad(params)
    worst = 0.0
    for i in range(len(params)):
        bumped = params.copy()
        bumped[i] += step
        hi, _ = loss_grad(bumped)
        bumped[i] -= 2.0 * step
        lo, _ = loss_grad(bumped)
        numeric = (hi - lo) / (2.0 * step)
        denom = max(abs(numeric), abs(analytic[i]), 1e-8)
        worst = max(worst, abs(numeric - analytic[i]) / denom)
    return worst


@pytest.fixture(scope="session")
def fraction_sweep():
    """Fraction sweep at published defaults: (SweepResult, wall_seconds).

    Runs once per session; both the acceptance gate and the sweep-shape
    tests consume it.
    """
    config = SweepConfig(kind=SweepKind.ASYNC_FRACTION, grid=list(FRACTION_GRID))
    start = time.perf_counter()
    result = run_async_sweep(config, jobs=4)
    return result, time.perf_counter() - start

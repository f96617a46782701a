"""Kernel density estimates against closed forms and a direct-summation oracle."""

import math

import numpy as np
import pytest
from conftest import kde_oracle

from ova_drift.density import kde_fit, kde_log_density, kde_log_density_batch
from ova_drift.errors import InvalidInputError


def test_fit_stores_sample_verbatim():
    pts = np.array([[0.1, 0.2], [0.3, 0.4], [0.5, 0.6], [0.7, 0.8], [0.9, 1.0]])
    model = kde_fit(pts, 0.01)
    assert model.n_points == 5
    assert model.dimension == 2
    assert model.variance == 0.01
    assert np.array_equal(model.points, pts)


def test_fit_rejects_empty_sample():
    with pytest.raises(InvalidInputError):
        kde_fit([], 0.01)


def test_fit_rejects_mixed_dimensions():
    with pytest.raises(InvalidInputError):
        kde_fit([np.zeros(2), np.zeros(3)], 0.01)


def test_fit_rejects_nonpositive_variance():
    for bad in (0.0, -0.01):
        with pytest.raises(InvalidInputError):
            kde_fit(np.zeros((2, 2)), bad)


def test_fit_rejects_nonfinite_points():
    with pytest.raises(InvalidInputError):
        kde_fit([np.array([0.0, np.inf])], 0.01)


def test_single_point_closed_form():
    # A normalized Gaussian evaluated at its own center: -(d/2) log(2 pi sigma^2).
    x1 = np.array([0.25, -0.75])
    model = kde_fit([x1], 0.01)
    expected = -math.log(2.0 * math.pi * 0.01)
    value = kde_log_density(model, x1)
    assert value == pytest.approx(expected, abs=1e-12)
    assert round(value, 6) == 2.767293


def test_duplicate_points_change_nothing():
    p = np.array([0.3, -0.2, 0.1])
    q = np.array([0.5, 0.5, -0.4])
    single = kde_log_density(kde_fit([p], 0.01), q)
    doubled = kde_log_density(kde_fit([p, p], 0.01), q)
    assert doubled == pytest.approx(single, abs=1e-12)


def test_matches_direct_summation_oracle():
    rng = np.random.default_rng(42)
    for _ in range(200):
        n = int(rng.integers(1, 11))
        d = int(rng.integers(1, 5))
        variance = float(rng.uniform(0.01, 0.5))
        points = rng.uniform(-0.5, 0.5, size=(n, d))
        query = rng.uniform(-0.5, 0.5, size=d)
        expected = kde_oracle(points, variance, query)
        got = kde_log_density(kde_fit(points, variance), query)
        assert got == pytest.approx(expected, rel=1e-10, abs=1e-12)


def test_translation_equivariance():
    rng = np.random.default_rng(7)
    points = rng.normal(size=(6, 3))
    queries = rng.normal(size=(4, 3))
    shift = np.array([3.0, -1.5, 0.25])
    base = kde_log_density_batch(kde_fit(points, 0.05), queries)
    shifted = kde_log_density_batch(kde_fit(points + shift, 0.05), queries + shift)
    assert np.all(np.abs(shifted - base) <= 1e-9)


def test_monotone_locality_single_point():
    model = kde_fit([np.zeros(2)], 0.01)
    radii = np.linspace(0.05, 3.0, 40)
    values = [kde_log_density(model, np.array([r, 0.0])) for r in radii]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_density_integrates_to_one_1d():
    model = kde_fit(np.array([[-0.3], [0.2], [0.75]]), 0.01)
    sigma = math.sqrt(0.01)
    xs = np.linspace(-0.3 - 10 * sigma, 0.75 + 10 * sigma, 20001)
    log_dens = kde_log_density_batch(model, xs[:, None])
    integral = np.trapezoid(np.exp(log_dens), xs)
    assert integral == pytest.approx(1.0, abs=1e-4)


def test_far_queries_stay_finite():
    # Exponents near -1.8e5; a plain-arithmetic sum would underflow to log(0).
    model = kde_fit(np.zeros((3, 2)), 0.01)
    value = kde_log_density(model, np.array([60.0, 0.0]))
    assert np.isfinite(value)
    expected = -(60.0**2) / 0.02 - math.log(2.0 * math.pi * 0.01)
    assert value == pytest.approx(expected, rel=1e-12)


def test_query_dimension_mismatch():
    model = kde_fit(np.zeros((2, 2)), 0.01)
    with pytest.raises(InvalidInputError):
        kde_log_density(model, np.zeros(3))
    with pytest.raises(InvalidInputError):
        kde_log_density_batch(model, np.zeros((4, 3)))


def test_scalar_matches_batch():
    rng = np.random.default_rng(3)
    points = rng.normal(size=(5, 2))
    queries = rng.normal(size=(4, 2))
    model = kde_fit(points, 0.02)
    batch = kde_log_density_batch(model, queries)
    for i, q in enumerate(queries):
        assert kde_log_density(model, q) == batch[i]

"""Gaussian kernel density estimation over sentence embeddings.

The density is the mean of isotropic Gaussian kernels centered at the
fitted sample points, all sharing one diagonal variance. Log densities
are evaluated with the log-sum-exp trick so that queries far from every
kernel stay finite instead of underflowing to -inf.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidInputError


@dataclass(frozen=True)
class KdeModel:
    """Fitted sample plus the shared kernel variance. Immutable."""

    points: np.ndarray  # (n, dimension)
    variance: float
    dimension: int

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


def kde_fit(embeddings: np.ndarray | list[np.ndarray], variance: float) -> KdeModel:
    """Store the sample verbatim after validation; KDE has no training step."""
    if isinstance(embeddings, list):
        if len(embeddings) == 0:
            raise InvalidInputError("cannot fit a density on an empty sample")
        dims = {np.asarray(e).shape for e in embeddings}
        if len(dims) != 1:
            raise InvalidInputError(f"inconsistent embedding dimensions: {sorted(dims)}")
        points = np.stack([np.asarray(e, dtype=np.float64) for e in embeddings])
    else:
        points = np.asarray(embeddings, dtype=np.float64)
        if points.ndim != 2 or points.shape[0] == 0:
            raise InvalidInputError(
                f"expected a non-empty (n, d) sample, got shape {points.shape}"
            )
    if not np.all(np.isfinite(points)):
        raise InvalidInputError("sample contains non-finite values")
    if not variance > 0:
        raise InvalidInputError(f"variance must be positive, got {variance}")
    return KdeModel(points=points, variance=float(variance), dimension=points.shape[1])


def kde_log_density_batch(model: KdeModel, queries: np.ndarray) -> np.ndarray:
    """Log density of each query row under the kernel mixture.

    log p(x) = logsumexp_i( -||x - x_i||^2 / (2 s2) ) - log n - (d/2) log(2 pi s2)
    """
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim == 1:
        queries = queries[None, :]
    if queries.shape[1] != model.dimension:
        raise InvalidInputError(
            f"query dimension {queries.shape[1]} != model dimension {model.dimension}"
        )
    # Squared distances via the expansion ||x||^2 + ||y||^2 - 2 x.y, clipped
    # at zero to guard against tiny negative round-off.
    sq = (
        np.sum(queries**2, axis=1)[:, None]
        + np.sum(model.points**2, axis=1)[None, :]
        - 2.0 * queries @ model.points.T
    )
    np.maximum(sq, 0.0, out=sq)
    s2 = model.variance
    exponents = -sq / (2.0 * s2)
    norm = np.log(model.n_points) + 0.5 * model.dimension * np.log(2.0 * np.pi * s2)
    return logsumexp(exponents, axis=1) - norm


def kde_log_density(model: KdeModel, x: np.ndarray) -> float:
    """Log density at a single query point."""
    return float(kde_log_density_batch(model, np.asarray(x))[0])

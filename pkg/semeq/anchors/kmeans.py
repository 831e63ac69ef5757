"""
Deterministic k-means: k-means++ seeding followed by Lloyd iterations.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import numpy.typing as npt

from semeq.errors import InvalidArgumentError
from semeq.numerics import RealMatrix, as_matrix

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITER = 100


@dataclass(frozen=True, eq=False)
class ClusteringResult:
    """
    Final state of a k-means run.

    `inertia_history[t]` is the inertia right after the assignment step of Lloyd
    iteration t; the sequence never increases.
    """

    assignments: np.ndarray
    centroids: RealMatrix
    inertia: float
    iterations_run: int
    inertia_history: Tuple[float, ...]
    converged: bool


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, np.newaxis, :] - centroids[np.newaxis, :, :]
    return np.sum(diff * diff, axis=-1)


def _kmeans_plusplus(points: np.ndarray, n_clusters: int, rng: np.random.Generator) -> np.ndarray:
    n_points = points.shape[0]
    centroids = np.empty((n_clusters, points.shape[1]))
    centroids[0] = points[rng.integers(n_points)]
    closest = _squared_distances(points, centroids[:1])[:, 0]
    for k in range(1, n_clusters):
        total = closest.sum()
        if total > 0.0:
            index = rng.choice(n_points, p=closest / total)
        else:
            # every point coincides with a chosen centroid
            index = rng.integers(n_points)
        centroids[k] = points[index]
        closest = np.minimum(closest, _squared_distances(points, centroids[k : k + 1])[:, 0])
    return centroids


def _update_centroids(
    points: np.ndarray, assignments: np.ndarray, distances: np.ndarray, n_clusters: int
) -> np.ndarray:
    centroids = np.empty((n_clusters, points.shape[1]))
    counts = np.bincount(assignments, minlength=n_clusters)
    for cluster in np.flatnonzero(counts):
        centroids[cluster] = points[assignments == cluster].mean(axis=0)

    empty = np.flatnonzero(counts == 0)
    if empty.size:
        own = distances[np.arange(points.shape[0]), assignments]
        farthest = np.argsort(-own, kind="stable")
        for cluster, index in zip(empty, farthest):
            centroids[cluster] = points[index]
        logger.debug("Refilled %d empty clusters", empty.size)
    return centroids


def kmeans(
    points: npt.ArrayLike, n_clusters: int, seed: int = 0, max_iter: int = DEFAULT_MAX_ITER
) -> ClusteringResult:
    """
    Cluster the rows of `points` into `n_clusters` groups.

    Seeding is k-means++ from a generator seeded with `seed`. Lloyd iterations
    run until the assignments stop changing or `max_iter` is reached. Empty
    clusters are refilled with the points farthest from their current centroid.
    Distance ties go to the lowest centroid index.

    Args:
        points: n x d matrix
        n_clusters: Number of clusters, between 1 and n
        seed: Seed of the k-means++ draw
        max_iter: Maximum number of Lloyd iterations

    Returns:
        ClusteringResult whose assignments are nearest-centroid for its centroids

    Raises:
        InvalidArgumentError: If n_clusters is outside [1, n] or max_iter < 1
    """
    points = as_matrix(points, "points")
    n_points = points.shape[0]
    if not 1 <= n_clusters <= n_points:
        raise InvalidArgumentError(
            f"n_clusters must lie in [1, {n_points}], got {n_clusters}"
        )
    if max_iter < 1:
        raise InvalidArgumentError("max_iter must be at least 1")

    rng = np.random.default_rng(seed)
    centroids = _kmeans_plusplus(points, n_clusters, rng)
    assignments = None
    history = []
    converged = False

    for _ in range(max_iter):
        distances = _squared_distances(points, centroids)
        updated = np.argmin(distances, axis=1)
        history.append(float(np.sum(distances[np.arange(n_points), updated])))
        if assignments is not None and np.array_equal(updated, assignments):
            converged = True
            break
        assignments = updated
        centroids = _update_centroids(points, assignments, distances, n_clusters)

    distances = _squared_distances(points, centroids)
    assignments = np.argmin(distances, axis=1)
    inertia = float(np.sum(distances[np.arange(n_points), assignments]))
    logger.debug(
        "k-means with %d clusters: %d iterations, inertia %.6g, converged=%s",
        n_clusters,
        len(history),
        inertia,
        converged,
    )
    return ClusteringResult(
        assignments=assignments,
        centroids=centroids,
        inertia=inertia,
        iterations_run=len(history),
        inertia_history=tuple(history),
        converged=converged,
    )

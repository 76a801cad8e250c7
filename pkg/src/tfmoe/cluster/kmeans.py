"""Deterministic k-means: k-means++ seeding, Lloyd iterations, restarts.

Convergence is on centroid movement (max L2 shift below tol) rather than
inertia delta, so the outcome is insensitive to the loss scale.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..seeding import rng_for


def _plus_plus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centroids[j] = points[rng.integers(n)]
        else:
            centroids[j] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((points - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _lloyd(points, centroids, tol, max_iter, rng):
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        new = np.empty_like(centroids)
        for j in range(centroids.shape[0]):
            members = points[labels == j]
            if members.shape[0] == 0:
                # re-seed an empty cluster at the point farthest from its centroid
                worst = d2[np.arange(points.shape[0]), labels].argmax()
                new[j] = points[worst]
            else:
                new[j] = members.mean(axis=0)
        shift = np.sqrt(((new - centroids) ** 2).sum(axis=1)).max()
        centroids = new
        if shift < tol:
            break
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    inertia = d2.min(axis=1).sum()
    return centroids, inertia


def kmeans_init(
    latents: np.ndarray,
    k: int,
    seed: int,
    restarts: int = 10,
    tol: float = 1e-6,
    max_iter: int = 300,
) -> np.ndarray:
    """Best-of-``restarts`` k-means centroids by inertia."""
    points = np.asarray(latents, dtype=np.float64)
    if points.shape[0] < k:
        raise ConfigError(f"k-means needs at least k={k} points, got {points.shape[0]}")
    best = None
    best_inertia = np.inf
    for r in range(restarts):
        rng = rng_for(seed, "kmeans", r)
        centroids = _plus_plus_init(points, k, rng)
        centroids, inertia = _lloyd(points, centroids, tol, max_iter, rng)
        if inertia < best_inertia:
            best, best_inertia = centroids, inertia
    return best

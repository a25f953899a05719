"""Whitened linear part models and their discriminative initialization.

A part model is a direction in descriptor space obtained by LDA-style
whitening of the mean descriptor assigned to the part:
``w = inv(cov + ridge*I) @ (part_mean - global_mean)``.  Descriptor
matrices here follow the column convention, shape
``(dim, n_descriptors)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyPartError,
    SingularCovarianceError,
    TooFewClustersError,
)
from .grouping import kmeans
from .validation import check_matrix, check_same_shape


@dataclass
class LdaStats:
    """Shared mean / covariance statistics for whitening part models."""

    mu: np.ndarray        # (dim,)
    sigma: np.ndarray     # (dim, dim)
    sigma_inv: np.ndarray  # inverse of sigma + ridge * I
    ridge: float

    @property
    def dim(self) -> int:
        return self.mu.shape[0]


def default_ridge(sigma: np.ndarray) -> float:
    """Scale-aware shrinkage: 1% of the average eigenvalue."""
    return 0.01 * float(np.trace(sigma)) / sigma.shape[0]


def compute_lda_stats(descriptors, ridge=None) -> LdaStats:
    """Mean and covariance over descriptor columns, plus a ridged inverse.

    ``descriptors`` is (dim, n) with n >= 2; normalization is by n.
    Raises ``SingularCovarianceError`` when the ridged matrix still
    cannot be inverted, which signals a ridge chosen too small.
    """
    X = check_matrix(descriptors, "descriptors")
    dim, n = X.shape
    if n < 2:
        raise DimensionMismatchError("need at least 2 descriptors for covariance")
    mu = X.mean(axis=1)
    centered = X - mu[:, None]
    sigma = (centered @ centered.T) / n
    if ridge is None:
        ridge = default_ridge(sigma)
    ridged = sigma + ridge * np.eye(dim)
    try:
        sigma_inv = np.linalg.inv(ridged)
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError(f"covariance not invertible at ridge={ridge}") from exc
    if not np.all(np.isfinite(sigma_inv)):
        raise SingularCovarianceError(f"covariance inversion overflowed at ridge={ridge}")
    return LdaStats(mu=mu, sigma=sigma, sigma_inv=sigma_inv, ridge=float(ridge))


def part_models(assign, descriptors, stats: LdaStats, n_images: int) -> np.ndarray:
    """All part models at once: ``sigma_inv @ (X A^T / n_images - mu 1^T)``.

    ``assign`` is (n_parts, n_descriptors); for a binary feasible
    assignment each row sums to ``n_images`` so columns equal the
    whitened difference between the part's mean descriptor and the
    global mean.  Returns (dim, n_parts).
    """
    A = check_matrix(assign, "assign")
    X = check_matrix(descriptors, "descriptors")
    if A.shape[1] != X.shape[1]:
        raise DimensionMismatchError(
            f"assign has {A.shape[1]} columns but descriptors has {X.shape[1]}"
        )
    row_sums = A.sum(axis=1)
    if np.any(row_sums <= 0):
        empty = int(np.flatnonzero(row_sums <= 0)[0])
        raise EmptyPartError(f"part {empty} has no assigned mass")
    return stats.sigma_inv @ (X @ A.T / n_images - stats.mu[:, None])


def part_models_normalized(assign, descriptors, stats: LdaStats) -> np.ndarray:
    """Row-normalized variant: each part uses its own assignment mass.

    Equivalent to :func:`part_models` whenever every row of ``assign``
    sums to ``n_images`` (true for binary feasible assignments); they
    differ during soft iterations.
    """
    A = check_matrix(assign, "assign")
    X = check_matrix(descriptors, "descriptors")
    if A.shape[1] != X.shape[1]:
        raise DimensionMismatchError(
            f"assign has {A.shape[1]} columns but descriptors has {X.shape[1]}"
        )
    row_sums = A.sum(axis=1)
    if np.any(row_sums <= 0):
        empty = int(np.flatnonzero(row_sums <= 0)[0])
        raise EmptyPartError(f"part {empty} has no assigned mass")
    means = X @ A.T / row_sums[None, :]
    return stats.sigma_inv @ (means - stats.mu[:, None])


def matching_matrix(models, descriptors) -> np.ndarray:
    """Scores of every part on every descriptor: ``W^T X``, (n_parts, n)."""
    W = check_matrix(models, "models")
    X = check_matrix(descriptors, "descriptors")
    if W.shape[0] != X.shape[0]:
        raise DimensionMismatchError(
            f"models live in dim {W.shape[0]} but descriptors in dim {X.shape[0]}"
        )
    return W.T @ X


def objective(assign, scores) -> float:
    """Frobenius inner product <A, M> of an assignment with its scores."""
    A = np.asarray(assign, dtype=np.float64)
    M = np.asarray(scores, dtype=np.float64)
    check_same_shape(A, M, "assign", "scores")
    return float(np.sum(A * M))


def init_parts(group_regions, image_regions, in_group, stats: LdaStats,
               n_parts: int, seed, candidate_factor: int = 10) -> np.ndarray:
    """Pick the most group-discriminative candidate parts.

    Clusters the group's region descriptors into
    ``candidate_factor * n_parts`` centroids (capped at the number of
    regions), whitens each centroid into a candidate model, and scores
    every candidate by the ratio of summed max-pooled responses inside
    the group to those outside (smoothed by 1e-8).  Returns the
    (dim, n_parts) bank of top-ratio candidates, ties broken toward
    the lowest cluster index.

    ``image_regions`` is the per-image list of (dim, regions) matrices
    for *all* training images; ``in_group`` is the matching boolean
    mask marking the group's own images.
    """
    Xk = check_matrix(group_regions, "group_regions")
    in_group = np.asarray(in_group, dtype=bool)
    if len(image_regions) != in_group.shape[0]:
        raise DimensionMismatchError("image_regions and in_group lengths differ")
    pool = min(candidate_factor * n_parts, Xk.shape[1])
    if pool < n_parts:
        raise TooFewClustersError(
            f"{Xk.shape[1]} regions cannot seed {n_parts} parts"
        )
    centroids = kmeans(Xk.T, pool, seed)
    candidates = stats.sigma_inv @ (centroids.vectors.T - stats.mu[:, None])  # (dim, pool)
    response_in = np.zeros(pool)
    response_out = np.zeros(pool)
    for inside, regions in zip(in_group, image_regions):
        pooled = (candidates.T @ np.asarray(regions, dtype=np.float64)).max(axis=1)
        if inside:
            response_in += pooled
        else:
            response_out += pooled
    ratio = response_in / (response_out + 1e-8)
    order = np.argsort(-ratio, kind="stable")
    return candidates[:, order[:n_parts]]

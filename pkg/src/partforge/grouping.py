"""Balanced grouping of images by global descriptor similarity.

Plain k-means picks the centroids; a balancing pass then turns the
clusters into a uniform partition, either greedily (round-robin,
nearest unassigned image per group) or iteratively (repeated
assignment under a penalized squared distance whose per-group penalty
grows with group size).  Both balancers guarantee group sizes within
one of each other; the iterative one finishes with a deterministic
repair pass because the penalty dynamics only converge in the limit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .errors import KTooLargeError, ZeroTargetSizeError
from .validation import check_matrix


@dataclass
class Centroids:
    vectors: np.ndarray  # (n_clusters, dim)
    seed: object = None
    distortion_trace: list = field(default_factory=list)
    reseeds: int = 0

    @property
    def n_clusters(self) -> int:
        return self.vectors.shape[0]


def _squared_distances(points, centers):
    """(n_points, n_centers) squared Euclidean distances."""
    # ||p - c||^2 expanded; clip tiny negatives from cancellation
    d2 = (
        np.sum(points ** 2, axis=1)[:, None]
        - 2.0 * points @ centers.T
        + np.sum(centers ** 2, axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _kmeanspp_init(points, n_clusters, rng):
    n = points.shape[0]
    centers = np.empty((n_clusters, points.shape[1]))
    first = int(rng.integers(n))
    centers[0] = points[first]
    closest = _squared_distances(points, centers[:1])[:, 0]
    for k in range(1, n_clusters):
        total = closest.sum()
        if total <= 0:
            # all remaining mass at distance zero: duplicate points
            idx = int(rng.integers(n))
        else:
            target = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(closest), target))
            idx = min(idx, n - 1)
        centers[k] = points[idx]
        closest = np.minimum(closest, _squared_distances(points, centers[k:k + 1])[:, 0])
    return centers


def kmeans(points, n_clusters, seed, max_iter=100) -> Centroids:
    """Lloyd's algorithm with k-means++ seeding, deterministic given seed.

    Empty clusters are re-seeded to the point currently farthest from
    its own centroid.  The distortion after every assignment step is
    recorded on the returned ``Centroids``.
    """
    points = check_matrix(points, "points")
    n = points.shape[0]
    if n_clusters < 1 or n_clusters > n:
        raise KTooLargeError(f"n_clusters={n_clusters} with only {n} points")
    rng = np.random.default_rng(seed)
    centers = _kmeanspp_init(points, n_clusters, rng)
    labels = np.full(n, -1)
    trace: list[float] = []
    reseeds = 0
    for _ in range(max_iter):
        d2 = _squared_distances(points, centers)
        new_labels = np.argmin(d2, axis=1)  # ties: lowest cluster index
        point_d2 = d2[np.arange(n), new_labels]
        sizes = np.bincount(new_labels, minlength=n_clusters)
        for k in range(n_clusters):
            if sizes[k] == 0:
                # steal the globally farthest point, but never empty its donor
                eligible = np.where(sizes[new_labels] >= 2, point_d2, -np.inf)
                farthest = int(np.argmax(eligible))
                sizes[new_labels[farthest]] -= 1
                sizes[k] += 1
                centers[k] = points[farthest]
                new_labels[farthest] = k
                point_d2[farthest] = 0.0
                reseeds += 1
        trace.append(float(point_d2.sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for k in range(n_clusters):
            centers[k] = points[labels == k].mean(axis=0)
    return Centroids(vectors=centers, seed=seed, distortion_trace=trace, reseeds=reseeds)


def penalized_distance(center, point, penalty) -> float:
    """Squared Euclidean distance plus a positive additive penalty."""
    if penalty <= 0:
        raise ValueError(f"penalty must be positive, got {penalty}")
    diff = np.asarray(center, dtype=np.float64) - np.asarray(point, dtype=np.float64)
    return float(diff @ diff) + float(penalty)


@dataclass
class BalanceState:
    """Per-group size penalties for iterative balancing."""

    penalties: np.ndarray
    iteration: int = 0
    alpha: float = 0.01

    def __post_init__(self):
        self.penalties = np.asarray(self.penalties, dtype=np.float64)
        if self.iteration == 0 and not np.all(self.penalties == 1.0):
            raise ValueError("penalties must start at 1")

    @classmethod
    def initial(cls, n_groups: int, alpha: float) -> "BalanceState":
        return cls(penalties=np.ones(n_groups), iteration=0, alpha=alpha)


def update_penalty(state: BalanceState, sizes, n_points: int, n_groups: int) -> BalanceState:
    """Multiply each penalty by (group size / target size) ** alpha."""
    if n_groups > n_points:
        raise ZeroTargetSizeError(f"{n_groups} groups for {n_points} points")
    sizes = np.asarray(sizes, dtype=np.float64)
    target = n_points / n_groups
    new = state.penalties * (sizes / target) ** state.alpha
    return BalanceState(penalties=new, iteration=state.iteration + 1, alpha=state.alpha)


def greedy_balance(centroids: Centroids, points) -> list[list[int]]:
    """Round-robin over groups; each turn grabs the nearest unassigned image.

    Ties break toward the lowest image index.  Returns index groups
    whose sizes differ by at most one.
    """
    points = check_matrix(points, "points")
    n = points.shape[0]
    n_groups = centroids.n_clusters
    dist = np.sqrt(_squared_distances(points, centroids.vectors))
    unassigned = np.ones(n, dtype=bool)
    groups: list[list[int]] = [[] for _ in range(n_groups)]
    remaining = n
    while remaining > 0:
        for k in range(n_groups):
            if remaining == 0:
                break
            column = np.where(unassigned, dist[:, k], np.inf)
            pick = int(np.argmin(column))
            groups[k].append(pick)
            unassigned[pick] = False
            remaining -= 1
    return groups


@dataclass
class IterativeBalanceResult:
    groups: list[list[int]]
    state: BalanceState
    size_history: list[np.ndarray]
    penalty_history: list[np.ndarray]
    repair_moves: int


def iterative_balance(centroids: Centroids, points, alpha=0.01, n_rounds=80) -> IterativeBalanceResult:
    """Penalized re-assignment for ``n_rounds`` rounds, then exact repair.

    Each round assigns every image to the group minimizing squared
    distance plus the group's penalty, then updates the penalties from
    the observed sizes.  The repair pass moves images from largest to
    smallest groups, picking the move with the smallest increase in
    plain squared distance (lowest image index on ties), until sizes
    are within one.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if n_rounds < 1:
        raise ValueError("need at least one round")
    points = check_matrix(points, "points")
    n = points.shape[0]
    n_groups = centroids.n_clusters
    d2 = _squared_distances(points, centroids.vectors)
    state = BalanceState.initial(n_groups, alpha)
    size_history: list[np.ndarray] = []
    penalty_history: list[np.ndarray] = []
    labels = np.zeros(n, dtype=int)
    for _ in range(n_rounds):
        labels = np.argmin(d2 + state.penalties[None, :], axis=1)
        sizes = np.bincount(labels, minlength=n_groups)
        state = update_penalty(state, sizes, n, n_groups)
        size_history.append(sizes)
        penalty_history.append(state.penalties.copy())
    labels, moves = _repair(labels, d2, n_groups)
    groups = [list(np.flatnonzero(labels == k)) for k in range(n_groups)]
    return IterativeBalanceResult(
        groups=groups,
        state=state,
        size_history=size_history,
        penalty_history=penalty_history,
        repair_moves=moves,
    )


def _repair(labels, d2, n_groups):
    """Move images from max-size to min-size groups until spread <= 1."""
    labels = labels.copy()
    sizes = np.bincount(labels, minlength=n_groups)
    moves = 0
    while sizes.max() - sizes.min() > 1:
        donors = np.flatnonzero(sizes == sizes.max())
        receivers = np.flatnonzero(sizes == sizes.min())
        best = None  # (delta, image_idx, receiver)
        for image in np.flatnonzero(np.isin(labels, donors)):
            here = d2[image, labels[image]]
            for k in receivers:
                candidate = (d2[image, k] - here, int(image), int(k))
                if best is None or candidate < best:
                    best = candidate
        _, image, k = best
        sizes[labels[image]] -= 1
        sizes[k] += 1
        labels[image] = k
        moves += 1
    return labels, moves


@dataclass
class Partition:
    """K disjoint groups of image ids covering the whole set."""

    groups: list[list[str]]
    method: str
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        flat = [i for grp in self.groups for i in grp]
        if len(set(flat)) != len(flat):
            raise ValueError("partition groups overlap")
        # class-derived partitions (supervised mode) may be unbalanced
        if self.method in ("greedy", "iterative"):
            sizes = self.sizes()
            if sizes and max(sizes) - min(sizes) > 1:
                raise ValueError(f"partition is unbalanced: sizes {sizes}")

    def sizes(self) -> list[int]:
        return [len(grp) for grp in self.groups]

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def group_of(self, image_id: str) -> int:
        for k, grp in enumerate(self.groups):
            if image_id in grp:
                return k
        raise KeyError(image_id)

    def to_document(self) -> dict:
        return {
            "groups": {str(k): list(grp) for k, grp in enumerate(self.groups)},
            "provenance": dict(self.provenance, method=self.method),
        }

    @classmethod
    def from_document(cls, doc: dict) -> "Partition":
        groups = [list(doc["groups"][str(k)]) for k in range(len(doc["groups"]))]
        provenance = dict(doc.get("provenance", {}))
        method = provenance.pop("method", "unknown")
        return cls(groups=groups, method=method, provenance=provenance)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_document(), indent=2, sort_keys=True),
                              encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Partition":
        return cls.from_document(json.loads(Path(path).read_text(encoding="utf-8")))


class BalancedKMeans(BaseEstimator, ClusterMixin):
    """k-means followed by greedy or iterative size balancing.

    Parameters
    ----------
    n_clusters : number of groups.
    balance : "greedy" or "iterative".
    alpha : penalty growth exponent for iterative balancing.
    balance_rounds : penalized assignment rounds before repair.
    kmeans_max_iter : Lloyd iteration cap.
    random_state : seed for centroid initialization.

    After ``fit(X)`` with X of shape (n_samples, n_features):
    ``cluster_centers_``, ``labels_``, and for iterative balancing
    ``penalties_`` and ``size_history_``.
    """

    def __init__(self, n_clusters=2, balance="iterative", alpha=0.01,
                 balance_rounds=80, kmeans_max_iter=100, random_state=0):
        self.n_clusters = n_clusters
        self.balance = balance
        self.alpha = alpha
        self.balance_rounds = balance_rounds
        self.kmeans_max_iter = kmeans_max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        if self.balance not in ("greedy", "iterative"):
            raise ValueError(f"unknown balance method {self.balance!r}")
        X = check_matrix(X, "X")
        centroids = kmeans(X, self.n_clusters, self.random_state,
                           max_iter=self.kmeans_max_iter)
        if self.balance == "greedy":
            groups = greedy_balance(centroids, X)
            self.penalties_ = None
            self.size_history_ = None
        else:
            result = iterative_balance(centroids, X, alpha=self.alpha,
                                       n_rounds=self.balance_rounds)
            groups = result.groups
            self.penalties_ = result.state.penalties
            self.size_history_ = result.size_history
        labels = np.empty(X.shape[0], dtype=int)
        for k, grp in enumerate(groups):
            labels[grp] = k
        self.cluster_centers_ = centroids.vectors
        self.distortion_trace_ = centroids.distortion_trace
        self.labels_ = labels
        return self

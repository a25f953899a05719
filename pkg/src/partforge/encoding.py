"""Fixed-length image encodings from part responses.

Given the banks of part models from every group and one image's
region descriptors, the score matrix stacks the response of every
part on every region (group-major, parts ascending within a group).
Four encodings condense it:

* ``bop``    -- per part, (mean, max) response over regions; dim 2*P*K.
* ``sbop``   -- bop plus, per part, the max response within each image
  quarter; dim 6*P*K.  The first 2*P*K coordinates match bop up to the
  shared final normalization.
* ``pcop``   -- per part, the (PCA-projected) descriptor of its
  best-scoring region, concatenated; dim d' * P * K.
* ``wpcop``  -- pcop with each part's block weighted by the part's max
  score (signed, unclamped); dim d' * P * K.

Every encoder l2-normalizes its output and raises
``DegenerateEncodingError`` on an all-zero vector.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DegenerateEncodingError, DimensionMismatchError, GeometryMismatchError
from .matrixio import RegionGeometry
from .validation import check_matrix


def l2_normalize(vector) -> np.ndarray:
    vec = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise DegenerateEncodingError("cannot normalize an all-zero vector")
    return vec / norm


def part_scores(banks, region_descriptors) -> np.ndarray:
    """Stack every group's part responses on one image's regions.

    ``banks`` is a sequence of (dim, n_parts) model matrices sharing
    their shape; the result is (n_parts * n_groups, n_regions) with
    groups in order and parts in column order within each group.
    """
    X = check_matrix(region_descriptors, "region_descriptors")
    if not banks:
        raise DimensionMismatchError("no part banks given")
    n_parts = None
    rows = []
    for k, bank in enumerate(banks):
        W = check_matrix(bank, f"bank {k}")
        if W.shape[0] != X.shape[0]:
            raise DimensionMismatchError(
                f"bank {k} has dim {W.shape[0]} but descriptors have dim {X.shape[0]}"
            )
        if n_parts is None:
            n_parts = W.shape[1]
        elif W.shape[1] != n_parts:
            raise DimensionMismatchError("banks disagree on parts per group")
        rows.append(W.T @ X)
    return np.vstack(rows)


def encode_bop(scores) -> np.ndarray:
    """Interleaved (mean, max) response per part, l2-normalized."""
    S = check_matrix(scores, "scores")
    out = np.empty(2 * S.shape[0])
    out[0::2] = S.mean(axis=1)
    out[1::2] = S.max(axis=1)
    return l2_normalize(out)


def quarter_index(cx, cy, width, height) -> int:
    """Row-major quarter of a box center; boundary points go to the
    lower-index quarter."""
    col = 0 if cx <= width / 2.0 else 1
    row = 0 if cy <= height / 2.0 else 1
    return 2 * row + col


def encode_sbop(scores, geometry: RegionGeometry) -> np.ndarray:
    """Bop block followed by per-part max responses in each image quarter.

    A quarter with no region contributes 0 for every part.
    """
    S = check_matrix(scores, "scores")
    if geometry.n_regions != S.shape[1]:
        raise GeometryMismatchError(
            f"{geometry.n_regions} boxes for {S.shape[1]} score columns"
        )
    n_rows = S.shape[0]
    head = np.empty(2 * n_rows)
    head[0::2] = S.mean(axis=1)
    head[1::2] = S.max(axis=1)
    centers = geometry.centers()
    quarters = np.array([
        quarter_index(cx, cy, geometry.image_width, geometry.image_height)
        for cx, cy in centers
    ])
    tail = np.zeros((n_rows, 4))
    for q in range(4):
        mask = quarters == q
        if np.any(mask):
            tail[:, q] = S[:, mask].max(axis=1)
    return l2_normalize(np.concatenate([head, tail.ravel()]))


class PrincipalComponents(BaseEstimator, TransformerMixin):
    """PCA with a fixed sign convention and rank-deficiency padding.

    Each component's coordinate of largest magnitude is made positive
    (first such coordinate on ties), so the basis is reproducible.
    When the data has fewer nonzero singular values than
    ``n_components``, the missing directions are padded with zero
    vectors and the usable count is recorded in ``effective_rank_``,
    keeping output dimensions stable.

    ``fit`` expects X of shape (n_samples, n_features).
    """

    def __init__(self, n_components=None):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_matrix(X, "X")
        n, dim = X.shape
        k = dim if self.n_components is None else int(self.n_components)
        if k < 1 or k > min(dim, n):
            raise ValueError(f"n_components={k} must lie in [1, min(n_features={dim}, n_samples={n})]")
        self.mean_ = X.mean(axis=0)
        centered = X - self.mean_
        _, singular, vt = np.linalg.svd(centered, full_matrices=False)
        cutoff = singular[0] * max(n, dim) * np.finfo(np.float64).eps if singular.size else 0.0
        rank = int(np.sum(singular > cutoff))
        components = np.zeros((k, dim))
        usable = min(rank, k)
        components[:usable] = vt[:usable]
        for row in components[:usable]:
            pivot = int(np.argmax(np.abs(row)))
            if row[pivot] < 0:
                row *= -1.0
        self.components_ = components
        self.singular_values_ = singular[:usable]
        self.explained_variance_ = (singular[:usable] ** 2) / n
        self.effective_rank_ = usable
        self.n_components_ = k
        return self

    def transform(self, X):
        X = check_matrix(X, "X")
        return (X - self.mean_) @ self.components_.T

    def inverse_transform(self, Z):
        Z = np.asarray(Z, dtype=np.float64)
        return Z @ self.components_ + self.mean_

    def project_columns(self, columns) -> np.ndarray:
        """Project a (dim, n) column-major matrix to (n_components, n)."""
        cols = check_matrix(columns, "columns")
        return self.components_ @ (cols - self.mean_[:, None])


def fit_pca(descriptor_columns, n_components) -> PrincipalComponents:
    """Fit :class:`PrincipalComponents` on a (dim, n) column matrix."""
    X = check_matrix(descriptor_columns, "descriptor_columns")
    return PrincipalComponents(n_components=n_components).fit(X.T)


def _best_region_blocks(scores, region_descriptors, pca):
    S = check_matrix(scores, "scores")
    X = check_matrix(region_descriptors, "region_descriptors")
    if S.shape[1] != X.shape[1]:
        raise DimensionMismatchError(
            f"scores cover {S.shape[1]} regions but descriptors {X.shape[1]}"
        )
    best = np.argmax(S, axis=1)  # ties: lowest region index
    picked = X[:, best]
    if pca is not None:
        picked = pca.project_columns(picked)
    maxima = S[np.arange(S.shape[0]), best]
    return picked, maxima


def encode_pcop(scores, region_descriptors, pca=None) -> np.ndarray:
    """Concatenate each part's best-region descriptor (optionally PCA-reduced)."""
    picked, _ = _best_region_blocks(scores, region_descriptors, pca)
    return l2_normalize(picked.T.ravel())


def encode_wpcop(scores, region_descriptors, pca=None) -> np.ndarray:
    """pcop with each part's block scaled by the part's max score."""
    picked, maxima = _best_region_blocks(scores, region_descriptors, pca)
    return l2_normalize((picked * maxima[None, :]).T.ravel())


ENCODERS = ("bop", "sbop", "pcop", "wpcop")


def encoded_length(kind, n_parts, n_groups, n_components=None) -> int:
    """Declared output dimension of an encoding."""
    if kind == "bop":
        return 2 * n_parts * n_groups
    if kind == "sbop":
        return 6 * n_parts * n_groups
    if kind in ("pcop", "wpcop"):
        if n_components is None:
            raise ValueError(f"{kind} needs n_components")
        return n_components * n_parts * n_groups
    raise ValueError(f"unknown encoding {kind!r}")

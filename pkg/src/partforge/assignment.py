"""Region-to-part assignment solvers.

Assignments are (n_parts, n_regions_total) matrices whose columns are
grouped into contiguous per-image blocks of ``regions_per_image``
columns.  A *binary feasible* assignment gives every part exactly one
region in every image (block row sums equal 1) while no region serves
two parts (column sums at most 1).

Two solvers produce binary feasible assignments: an annealed
soft-assignment loop that alternates part re-estimation, scaled
exponential soft-assignment, thresholding and Sinkhorn projection for
a growing sharpness parameter, and a direct per-image Hungarian
solve.  A brute-force enumerator over small instances serves as the
exactness oracle for both.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import (
    InfeasibleBlockError,
    InstanceTooLargeError,
    NoFeasibleBinarizationError,
    NonFiniteValueError,
    ZeroRowError,
)
from .matrixio import load_matrix, save_matrix
from .parts import LdaStats, matching_matrix, part_models
from .validation import check_block_layout, check_matrix


@dataclass
class AnnealSchedule:
    """Sharpness ramp for the annealed solver."""

    beta0: float = 1.0
    beta_growth: float = 2.0
    beta_max: float = 128.0
    inner_tol: float = 1e-4
    inner_max_iter: int = 50

    def __post_init__(self):
        if self.beta0 <= 0:
            raise ValueError("beta0 must be positive")
        if self.beta_growth <= 1:
            raise ValueError("beta_growth must exceed 1")
        if self.beta_max < self.beta0:
            raise ValueError("beta_max must be >= beta0")

    def betas(self):
        beta = self.beta0
        while True:
            yield beta
            if beta >= self.beta_max:
                return
            beta = min(beta * self.beta_growth, self.beta_max)


def soft_assign(scores, beta, regions_per_image) -> np.ndarray:
    """Scaled exponential soft-assignment of scores.

    Subtracts, per part and per image block, the block's row maximum,
    then applies ``exp(beta * .)`` elementwise, so each row's largest
    entry within every image block is exactly 1.
    """
    M = check_matrix(scores, "scores")
    if beta <= 0:
        raise ValueError("beta must be positive")
    n_images = check_block_layout(M, regions_per_image, "scores")
    blocks = M.reshape(M.shape[0], n_images, regions_per_image)
    shifted = blocks - blocks.max(axis=2, keepdims=True)
    return np.exp(beta * shifted).reshape(M.shape)


def threshold(assign, tau) -> np.ndarray:
    """Zero out entries below ``tau`` (tau in (0, 1)); may empty columns."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    A = np.asarray(assign, dtype=np.float64)
    return np.where(A < tau, 0.0, A)


def sinkhorn(assign, regions_per_image, tol=1e-6, max_iter=1000) -> np.ndarray:
    """Alternate block-row and column l1 normalization.

    Row step: within each per-image block, every nonzero row is scaled
    to sum 1.  Column step: columns whose sum exceeds 1 are scaled
    down to 1; columns at or below 1 (including zero columns) are left
    untouched, so the zero pattern is preserved.  Residuals are
    checked before each sweep, making the fixed point exactly
    idempotent.  Raises ``ZeroRowError`` if a part has no nonzero
    entry at all.
    """
    A = np.array(assign, dtype=np.float64)
    check_matrix(A, "assign")
    if np.any(A < 0):
        raise ValueError("assignment entries must be non-negative")
    n_images = check_block_layout(A, regions_per_image, "assign")
    full_row_sums = A.sum(axis=1)
    if np.any(full_row_sums == 0):
        empty = int(np.flatnonzero(full_row_sums == 0)[0])
        raise ZeroRowError(f"part {empty} has no nonzero entry")
    A = np.ascontiguousarray(A)
    blocks = A.reshape(A.shape[0], n_images, regions_per_image)
    for _ in range(max_iter):
        block_sums = blocks.sum(axis=2)
        nonzero = block_sums > 0
        row_residual = np.abs(block_sums[nonzero] - 1.0).max() if np.any(nonzero) else 0.0
        col_sums = A.sum(axis=0)
        col_residual = max(float(col_sums.max()) - 1.0, 0.0)
        if row_residual < tol and col_residual < tol:
            break
        scale = np.where(nonzero, 1.0 / np.where(nonzero, block_sums, 1.0), 1.0)
        blocks *= scale[:, :, None]
        col_sums = A.sum(axis=0)
        shrink = np.where(col_sums > 1.0, 1.0 / np.where(col_sums > 1.0, col_sums, 1.0), 1.0)
        A *= shrink[None, :]
    return A


def hungarian_per_image(scores, regions_per_image) -> np.ndarray:
    """Exact per-image linear assignment of parts to regions.

    The feasibility constraints decouple across images, so each block
    is solved independently for the partial permutation maximizing the
    block's score sum, and the blocks are concatenated.
    """
    M = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(M)):
        raise NonFiniteValueError("scores contain non-finite values")
    n_parts = M.shape[0]
    if n_parts > regions_per_image:
        raise InfeasibleBlockError(
            f"{n_parts} parts cannot each take a distinct region out of {regions_per_image}"
        )
    n_images = check_block_layout(M, regions_per_image, "scores")
    A = np.zeros_like(M)
    for i in range(n_images):
        start = i * regions_per_image
        block = M[:, start:start + regions_per_image]
        rows, cols = linear_sum_assignment(block, maximize=True)
        A[rows, start + cols] = 1.0
    return A


def brute_force_assign(scores, regions_per_image, max_arrangements=10 ** 6) -> np.ndarray:
    """Exhaustive search over feasible assignments (test oracle).

    Enumerates, per image, every ordered choice of distinct regions
    for the parts, using plain Python summation loops only.  Refuses
    instances whose per-image arrangement count exceeds
    ``max_arrangements``.
    """
    M = np.asarray(scores, dtype=np.float64)
    n_parts = M.shape[0]
    if n_parts > regions_per_image:
        raise InfeasibleBlockError(
            f"{n_parts} parts cannot each take a distinct region out of {regions_per_image}"
        )
    n_images = check_block_layout(M, regions_per_image, "scores")
    count = 1
    for i in range(n_parts):
        count *= regions_per_image - i
    if count > max_arrangements:
        raise InstanceTooLargeError(
            f"{count} arrangements per image exceeds the cap {max_arrangements}"
        )
    A = np.zeros_like(M)
    for i in range(n_images):
        start = i * regions_per_image
        best_perm = None
        best_score = None
        for perm in itertools.permutations(range(regions_per_image), n_parts):
            total = 0.0
            for part, region in enumerate(perm):
                total += float(M[part, start + region])
            if best_score is None or total > best_score:
                best_score = total
                best_perm = perm
        for part, region in enumerate(best_perm):
            A[part, start + region] = 1.0
    return A


def isa(assign0, descriptors, stats: LdaStats, regions_per_image,
        schedule: AnnealSchedule | None = None, tau: float = 0.01,
        sinkhorn_tol: float = 1e-6, sinkhorn_max_iter: int = 500) -> np.ndarray:
    """Annealed iterative soft-assignment, returning a binary assignment.

    Starting from a soft assignment, alternates part re-estimation
    with soft-assignment of the resulting scores, thresholding, and
    Sinkhorn projection, repeating until the assignment stops moving
    and then sharpening the exponential.  The converged soft matrix is
    binarized block-wise by the Hungarian solver so the output is
    feasible exactly.
    """
    schedule = schedule or AnnealSchedule()
    A = check_matrix(assign0, "assign0")
    X = check_matrix(descriptors, "descriptors")
    n_images = check_block_layout(A, regions_per_image, "assign0")
    if A.shape[0] > regions_per_image:
        raise NoFeasibleBinarizationError(
            f"{A.shape[0]} parts cannot be placed on {regions_per_image} regions per image"
        )
    A = sinkhorn(A, regions_per_image, tol=sinkhorn_tol, max_iter=sinkhorn_max_iter)
    for beta in schedule.betas():
        for _ in range(schedule.inner_max_iter):
            models = part_models(A, X, stats, n_images)
            scores = matching_matrix(models, X)
            new = sinkhorn(threshold(soft_assign(scores, beta, regions_per_image), tau),
                           regions_per_image, tol=sinkhorn_tol, max_iter=sinkhorn_max_iter)
            delta = float(np.abs(new - A).max())
            A = new
            if delta < schedule.inner_tol:
                break
    return hungarian_per_image(A, regions_per_image)


def save_assignment(assign, regions_per_image, path, mode="binary", group=None) -> None:
    """Write an assignment matrix plus a JSON sidecar describing it."""
    path = Path(path)
    save_matrix(assign, path)
    sidecar = {
        "mode": mode,
        "n_parts": int(np.asarray(assign).shape[0]),
        "regions_per_image": int(regions_per_image),
        "group": group,
    }
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True), encoding="utf-8"
    )


def load_assignment(path):
    """Read an assignment matrix and its sidecar; returns (matrix, meta)."""
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text(encoding="utf-8"))
    return load_matrix(path).astype(np.float64), meta

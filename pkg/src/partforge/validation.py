"""Input validation helpers shared by the numeric modules.

Descriptor matrices follow the column convention throughout the math
layers: shape ``(dim, n_items)`` with one descriptor per column.  The
sklearn-facing estimators use the usual ``(n_samples, n_features)``
orientation and convert at the boundary.
"""

import numpy as np

from .errors import DimensionMismatchError, NonFiniteValueError


def check_matrix(values, name="matrix", dtype=np.float64):
    """Return ``values`` as a finite 2-D array, raising on bad input."""
    arr = np.asarray(values, dtype=dtype)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatchError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValueError(f"{name} contains non-finite values")
    return arr


def check_vector(values, name="vector", dtype=np.float64):
    arr = np.asarray(values, dtype=dtype)
    if arr.ndim != 1 or arr.shape[0] < 1:
        raise DimensionMismatchError(f"{name} must be a non-empty 1-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValueError(f"{name} contains non-finite values")
    return arr


def check_same_shape(a, b, name_a="a", name_b="b"):
    if a.shape != b.shape:
        raise DimensionMismatchError(
            f"{name_a} has shape {a.shape} but {name_b} has shape {b.shape}"
        )


def check_block_layout(matrix, regions_per_image, name="matrix"):
    """Validate that columns split into whole per-image blocks.

    Returns the number of images.
    """
    if regions_per_image < 1:
        raise DimensionMismatchError("regions_per_image must be >= 1")
    n_cols = matrix.shape[1]
    if n_cols % regions_per_image != 0:
        raise DimensionMismatchError(
            f"{name} has {n_cols} columns, not a multiple of "
            f"regions_per_image={regions_per_image}"
        )
    return n_cols // regions_per_image


def check_binary_feasible(assign, regions_per_image):
    """Assert the exact feasibility constraints of a binary assignment.

    Every entry is 0 or 1, every column sums to at most 1, and within
    each per-image block every row sums to exactly 1.  Raises
    ``AssertionError`` on violation; used by solvers and tests as a
    hard audit.
    """
    a = np.asarray(assign)
    n_images = check_block_layout(a, regions_per_image, "assignment")
    values = np.unique(a)
    assert np.all(np.isin(values, (0.0, 1.0))), f"non-binary values {values}"
    col_sums = a.sum(axis=0)
    assert np.all(col_sums <= 1), "a region serves more than one part"
    blocks = a.reshape(a.shape[0], n_images, regions_per_image)
    block_row_sums = blocks.sum(axis=2)
    assert np.all(block_row_sums == 1), "a part misses exactly-one-region-per-image"
    return True

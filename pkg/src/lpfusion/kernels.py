"""RBF kernels and the data-derived width base shared by the kernel learners."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InsufficientData, InvalidInput

WIDTH_MULTIPLIERS = (0.25, 0.5, 1.0)


@dataclass(frozen=True)
class KernelSpec:
    """RBF kernel ``exp(-||x - y||^2 / width)``.

    ``width`` is in squared-distance units of the data.  ``width_multiplier``
    records the grid multiplier when the spec was built by :func:`kernel_grid`.
    """

    width: float
    width_multiplier: float | None = None

    def __post_init__(self):
        if not np.isfinite(self.width) or self.width <= 0:
            raise InvalidInput(f"kernel width must be positive and finite, got {self.width}")


def _as_matrix(X, name="X") -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InvalidInput(f"{name} must be 2-D, got shape {X.shape}")
    return X


def mean_sq_dist(X) -> float:
    """Mean squared Euclidean distance over all unordered distinct pairs."""
    X = _as_matrix(X)
    n = X.shape[0]
    if n < 2:
        raise InsufficientData(f"need at least 2 samples, got {n}")
    if not np.all(np.isfinite(X)):
        raise InvalidInput("X contains non-finite entries")
    # sum_{i<j} ||x_i - x_j||^2 = n * sum_i ||x_i - mean||^2
    centered = X - X.mean(axis=0)
    total = n * float(np.sum(centered * centered))
    return total / (n * (n - 1) / 2.0)


def width_base(X) -> float:
    """Return M, the mean pairwise squared distance, with degenerate data mapped to 1."""
    m = mean_sq_dist(X)
    if m <= 0.0:
        warnings.warn("all training points are identical; using kernel width base 1.0",
                      RuntimeWarning, stacklevel=2)
        return 1.0
    return m


def kernel_grid(X, multipliers=WIDTH_MULTIPLIERS) -> list[KernelSpec]:
    base = width_base(X)
    return [KernelSpec(width=mult * base, width_multiplier=mult) for mult in multipliers]


def rbf_kernel_matrix(X, Y, spec: KernelSpec) -> np.ndarray:
    X = _as_matrix(X, "X")
    Y = _as_matrix(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise InvalidInput(f"feature dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    sq = cdist(X, Y, metric="sqeuclidean")
    return np.exp(-sq / spec.width)

"""Scores for candidate kernels: target alignment and normalized top eigenvalue."""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, DimensionError, NumericError, UsageError


def _check_labels(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or not np.all(np.isin(y, (-1.0, 1.0))):
        raise UsageError("labels must be a 1-D vector over {-1, +1}")
    if np.all(y == y[0]):
        raise UsageError("labels contain a single class")
    return y


def label_weights(y, balanced: bool = False) -> np.ndarray:
    """Labels as floats; with ``balanced`` each class is scaled by 1/class size."""
    y = _check_labels(y)
    if not balanced:
        return y
    n_pos = np.count_nonzero(y > 0)
    return np.where(y > 0, 1.0 / n_pos, 1.0 / (len(y) - n_pos)) * y


def target_alignment(K, y, balanced: bool = False) -> float:
    """Frobenius cosine between ``K`` and the ideal kernel ``y y^T``.

    ``balanced=True`` rescales each class's labels by its inverse size
    before forming the ideal kernel, which zeroes the alignment of a
    constant kernel on imbalanced data.
    """
    K = np.asarray(K, dtype=float)
    w = label_weights(y, balanced)
    if K.shape != (len(w), len(w)):
        raise DimensionError(f"kernel shape {K.shape} does not match {len(w)} labels")
    k_norm = np.linalg.norm(K)
    if k_norm == 0.0:
        return 0.0
    inner = w @ K @ w
    return float(inner / (k_norm * (w @ w)))


def symmetric_max_eigenvalue(K, seed: int = 0, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Dominant eigenvalue of a symmetric PSD matrix by power iteration.

    Stops once successive Rayleigh quotients differ by less than ``tol``.
    """
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {K.shape}")
    if not np.all(np.isfinite(K)):
        raise NumericError("matrix has non-finite entries")
    if not np.allclose(K, K.T, atol=1e-8, rtol=0.0):
        raise UsageError("matrix is not symmetric within 1e-8")
    n = K.shape[0]
    if n == 1:
        return float(K[0, 0])
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    w = K @ v
    rq = float(v @ w)
    for _ in range(max_iter):
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        w = K @ v
        new_rq = float(v @ w)
        if abs(new_rq - rq) < tol:
            return new_rq
        rq = new_rq
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps", last_value=rq)


def max_eigen_fitness(K, seed: int = 0) -> float:
    """Largest eigenvalue divided by the trace (= N for unit-diagonal kernels)."""
    K = np.asarray(K, dtype=float)
    if not np.all(np.isfinite(K)):
        raise NumericError("kernel matrix has non-finite entries")
    trace = float(np.trace(K))
    if trace <= 0.0:
        raise NumericError(f"kernel trace must be positive, got {trace}")
    return symmetric_max_eigenvalue(K, seed=seed) / trace

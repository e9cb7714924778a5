"""Soft-margin SVM on precomputed kernels, trained by SMO, plus AUC scoring."""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError, UsageError

C_GRID = (0.1, 1.0, 10.0, 100.0)
_TAU = 1e-12


@dataclass(frozen=True)
class SvmConfig:
    """``class_weight_positive=None`` means ``#negative / #positive`` of the training labels.

    ``max_passes`` caps SMO at ``max_passes * N`` pair updates.
    """

    C: float = 1.0
    class_weight_positive: float | None = None
    kkt_tolerance: float = 1e-3
    max_passes: int = 1000

    def __post_init__(self):
        if not self.C > 0:
            raise ConfigurationError(f"C must be > 0, got {self.C}")
        if not self.kkt_tolerance > 0:
            raise ConfigurationError(f"kkt_tolerance must be > 0, got {self.kkt_tolerance}")
        if self.class_weight_positive is not None and not self.class_weight_positive > 0:
            raise ConfigurationError("class_weight_positive must be > 0")
        if self.max_passes < 1:
            raise ConfigurationError("max_passes must be >= 1")


@dataclass(frozen=True)
class TrainedModel:
    dual_coefficients: np.ndarray
    bias: float
    support_indices: tuple[int, ...]
    config: SvmConfig
    training_data_digest: str
    upper_bounds: np.ndarray
    iterations: int = 0
    warnings: tuple[str, ...] = field(default_factory=tuple)

    @property
    def alphas(self) -> np.ndarray:
        return np.abs(self.dual_coefficients)

    def to_dict(self) -> dict:
        return {
            "dual_coefficients": self.dual_coefficients.tolist(),
            "bias": self.bias,
            "support_indices": list(self.support_indices),
            "config": asdict(self.config),
            "training_data_digest": self.training_data_digest,
            "upper_bounds": self.upper_bounds.tolist(),
            "iterations": self.iterations,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainedModel":
        return cls(
            dual_coefficients=np.asarray(data["dual_coefficients"], dtype=float),
            bias=float(data["bias"]),
            support_indices=tuple(data["support_indices"]),
            config=SvmConfig(**data["config"]),
            training_data_digest=data["training_data_digest"],
            upper_bounds=np.asarray(data.get("upper_bounds", []), dtype=float),
            iterations=int(data.get("iterations", 0)),
            warnings=tuple(data.get("warnings", ())),
        )


def _labels(y, n: int | None = None) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or not np.all(np.isin(y, (-1.0, 1.0))):
        raise UsageError("labels must be a 1-D vector over {-1, +1}")
    if n is not None and len(y) != n:
        raise DimensionError(f"{len(y)} labels for a {n}x{n} kernel")
    if np.all(y == y[0]):
        raise UsageError("labels contain a single class")
    return y


def data_digest(K: np.ndarray, y: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(K, dtype=float).tobytes())
    h.update(np.ascontiguousarray(y, dtype=float).tobytes())
    return h.hexdigest()


def dual_objective(alphas: np.ndarray, K: np.ndarray, y: np.ndarray) -> float:
    """``sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij``."""
    v = alphas * y
    return float(alphas.sum() - 0.5 * v @ K @ v)


def train_precomputed(K, y, cfg: SvmConfig | None = None) -> TrainedModel:
    """Solve the weighted soft-margin dual with SMO.

    Pairs are chosen by the maximal-violation rule with second-order
    selection of the partner; training stops once the largest KKT gap is
    below ``kkt_tolerance``.
    """
    cfg = cfg or SvmConfig()
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DimensionError(f"kernel must be square, got {K.shape}")
    n = K.shape[0]
    y = _labels(y, n)
    warnings = []
    min_eig = float(np.linalg.eigvalsh((K + K.T) / 2).min())
    if min_eig < -1e-6:
        warnings.append(f"kernel is not PSD (min eigenvalue {min_eig:.3e})")

    n_pos = int(np.count_nonzero(y > 0))
    weight = cfg.class_weight_positive
    if weight is None:
        weight = (n - n_pos) / n_pos
    upper = np.where(y > 0, cfg.C * weight, cfg.C)

    Q = (y[:, None] * y[None, :]) * K
    diag = np.diag(K)
    alpha = np.zeros(n)
    grad = -np.ones(n)
    max_iter = cfg.max_passes * max(n, 1)
    it = 0
    while True:
        up = ((y > 0) & (alpha < upper)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < upper))
        score = -y * grad
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        m = score[i]
        cand = np.flatnonzero(low & (score < m))
        if cand.size == 0 or m - score[low].min() < cfg.kkt_tolerance:
            break
        if it >= max_iter:
            warnings.append(f"SMO stopped at the iteration cap ({max_iter}) with KKT gap "
                            f"{m - score[low].min():.3e}")
            break
        b = m - score[cand]
        a = diag[i] + diag[cand] - 2.0 * K[i, cand]
        a = np.where(a > 0, a, _TAU)
        j = int(cand[np.argmin(-(b * b) / a)])

        quad = diag[i] + diag[j] - 2.0 * K[i, j]
        step = (m - score[j]) / (quad if quad > 0 else _TAU)
        step = min(step, upper[i] - alpha[i] if y[i] > 0 else alpha[i])
        step = min(step, alpha[j] if y[j] > 0 else upper[j] - alpha[j])
        d_i = y[i] * step
        d_j = -y[j] * step
        alpha[i] = np.clip(alpha[i] + d_i, 0.0, upper[i])
        alpha[j] = np.clip(alpha[j] + d_j, 0.0, upper[j])
        grad += Q[:, i] * d_i + Q[:, j] * d_j
        it += 1

    yg = y * grad
    free = (alpha > 0) & (alpha < upper)
    if free.any():
        rho = float(yg[free].mean())
    else:
        at_upper = alpha >= upper
        at_zero = alpha <= 0
        ub_mask = ((y > 0) & at_upper) | ((y < 0) & at_zero)
        lb_mask = ((y > 0) & at_zero) | ((y < 0) & at_upper)
        ub = yg[ub_mask].min() if ub_mask.any() else np.inf
        lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2) if np.isfinite(ub) and np.isfinite(lb) else float(
            ub if np.isfinite(ub) else lb)
    return TrainedModel(
        dual_coefficients=alpha * y,
        bias=-rho,
        support_indices=tuple(int(k) for k in np.flatnonzero(alpha > 0)),
        config=cfg,
        training_data_digest=data_digest(K, y),
        upper_bounds=upper,
        iterations=it,
        warnings=tuple(warnings),
    )


def decision_values(model: TrainedModel, K_cross) -> np.ndarray:
    K_cross = np.asarray(K_cross, dtype=float)
    if K_cross.ndim != 2 or K_cross.shape[1] != len(model.dual_coefficients):
        raise DimensionError(
            f"cross kernel has shape {K_cross.shape}, expected (*, {len(model.dual_coefficients)})"
        )
    return K_cross @ model.dual_coefficients + model.bias


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    _, start, counts = np.unique(sorted_vals, return_index=True, return_counts=True)
    avg = start + (counts + 1) / 2.0
    ranks = np.empty(len(values))
    ranks[order] = np.repeat(avg, counts)
    return ranks


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(positive score > negative score), ties count one half."""
    scores = np.asarray(scores, dtype=float)
    y = _labels(labels)
    if scores.shape != y.shape:
        raise DimensionError(f"{len(scores)} scores for {len(y)} labels")
    pos = y > 0
    n_pos = int(pos.sum())
    n_neg = len(y) - n_pos
    ranks = _average_ranks(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def select_c(K, y, cfg: SvmConfig | None = None, grid=C_GRID, seed: int = 0,
             validation_fraction: float = 0.25) -> float:
    """Pick C from ``grid`` by validation AUC on a stratified hold-out of the training rows."""
    cfg = cfg or SvmConfig()
    K = np.asarray(K, dtype=float)
    y = _labels(y, K.shape[0])
    rng = np.random.default_rng(seed)
    val = []
    for cls in (-1.0, 1.0):
        idx = rng.permutation(np.flatnonzero(y == cls))
        if len(idx) < 2:
            raise UsageError("each class needs at least two rows for C selection")
        k = min(len(idx) - 1, max(1, int(round(validation_fraction * len(idx)))))
        val.extend(idx[:k].tolist())
    val = np.sort(np.array(val))
    train = np.setdiff1d(np.arange(len(y)), val)
    best_c, best_auc = None, -1.0
    for c in grid:
        model = train_precomputed(K[np.ix_(train, train)], y[train],
                                  SvmConfig(c, cfg.class_weight_positive, cfg.kkt_tolerance,
                                            cfg.max_passes))
        score = auc(decision_values(model, K[np.ix_(val, train)]), y[val])
        if score > best_auc:
            best_c, best_auc = c, score
    return float(best_c)


def linear_kernel(A, B) -> np.ndarray:
    return np.asarray(A, dtype=float) @ np.asarray(B, dtype=float).T


def default_gamma(X) -> float:
    """``1 / (d * var(X))``; falls back to ``1 / d`` for constant data."""
    X = np.asarray(X, dtype=float)
    var = float(X.var())
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0 / X.shape[1]


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))

"""Tabular data handling: CSV I/O, MI ranking, LDA reduction, splits, synthetic sets."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionError, IngestionError, NumericError, UsageError

LABEL_COLUMN = "label"


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    columns: list[str]
    label_name: str = LABEL_COLUMN
    provenance: str = ""
    rejected: int = 0

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2:
            raise DimensionError(f"feature matrix must be 2-D, got shape {self.X.shape}")
        if self.X.shape[0] != len(self.y):
            raise DimensionError(f"{self.X.shape[0]} rows but {len(self.y)} labels")
        if len(self.columns) != self.X.shape[1]:
            raise DimensionError(f"{len(self.columns)} names for {self.X.shape[1]} columns")
        if not np.all(np.isin(self.y, (-1.0, 1.0))):
            raise UsageError("labels must be in {-1, +1}")

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_positive(self) -> int:
        return int(np.count_nonzero(self.y > 0))

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=int)
        return replace(self, X=self.X[rows], y=self.y[rows], rejected=0)


def load_csv(path: str | Path, label_column: str = LABEL_COLUMN,
             positive_label: str = "1") -> Dataset:
    """Read a header-first CSV; every non-label column must be numeric.

    Rows with an empty or non-numeric feature cell are dropped and counted in
    ``Dataset.rejected``.  Labels equal to ``positive_label`` map to +1, all
    others to -1.
    """
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise IngestionError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path} is empty") from None
        if label_column not in header:
            raise IngestionError(f"{path}: label column {label_column!r} not in header {header}")
        li = header.index(label_column)
        columns = [c for k, c in enumerate(header) if k != li]
        rows, labels, rejected = [], [], 0
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise IngestionError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            try:
                values = [float(v) for k, v in enumerate(rec) if k != li]
            except ValueError:
                rejected += 1
                continue
            if not all(math.isfinite(v) for v in values):
                rejected += 1
                continue
            rows.append(values)
            labels.append(1.0 if rec[li].strip() == str(positive_label) else -1.0)
    if not rows:
        raise IngestionError(f"{path}: no usable data rows ({rejected} rejected)")
    return Dataset(np.array(rows, dtype=float).reshape(len(rows), len(columns)),
                   np.array(labels), columns, label_column, str(path), rejected)


def write_csv(path: str | Path, data: Dataset) -> Path:
    """Write features plus a trailing label column of ``1`` / ``-1``; floats use ``repr``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(data.columns) + [data.label_name])
        for row, label in zip(data.X, data.y):
            writer.writerow([repr(float(v)) for v in row] + [str(int(label))])
    return path


def _equal_frequency_bins(values: np.ndarray, bins: int) -> np.ndarray:
    # rank = number of strictly smaller values, so ties share a bin
    ranks = np.searchsorted(np.sort(values), values, side="left")
    return np.minimum(ranks * bins // len(values), bins - 1)


def mutual_information(feature, y, bins: int = 10) -> float:
    """Plug-in MI (nats) between an equal-frequency-binned feature and the label."""
    feature = np.asarray(feature, dtype=float)
    y = np.asarray(y)
    b = _equal_frequency_bins(feature, bins)
    c = (y > 0).astype(int)
    joint = np.zeros((bins, 2))
    np.add.at(joint, (b, c), 1.0)
    joint /= joint.sum()
    pb = joint.sum(1, keepdims=True)
    pc = joint.sum(0, keepdims=True)
    nz = joint > 0
    return float(max(0.0, np.sum(joint[nz] * np.log(joint[nz] / (pb @ pc)[nz]))))


def mutual_info_rank(data: Dataset, bins: int = 10) -> list[tuple[int, float]]:
    """Columns by descending MI with the label; ties keep column order."""
    if bins < 2:
        raise UsageError(f"bins must be >= 2, got {bins}")
    scores = [mutual_information(data.X[:, k], data.y, bins) for k in range(data.X.shape[1])]
    order = sorted(range(len(scores)), key=lambda k: (-scores[k], k))
    return [(k, scores[k]) for k in order]


@dataclass
class ReductionModel:
    selected_columns: list[int]
    column_names: list[str]
    means: np.ndarray
    stds: np.ndarray
    projection: np.ndarray
    range_min: np.ndarray
    range_max: np.ndarray
    mi_scores: list[float] = field(default_factory=list)

    @property
    def out_dim(self) -> int:
        return self.projection.shape[1]

    def to_dict(self) -> dict:
        return {
            "selected_columns": [int(k) for k in self.selected_columns],
            "column_names": list(self.column_names),
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "projection": self.projection.tolist(),
            "range_min": self.range_min.tolist(),
            "range_max": self.range_max.tolist(),
            "mi_scores": [float(s) for s in self.mi_scores],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReductionModel":
        return cls(
            selected_columns=list(d["selected_columns"]),
            column_names=list(d["column_names"]),
            means=np.asarray(d["means"], dtype=float),
            stds=np.asarray(d["stds"], dtype=float),
            projection=np.asarray(d["projection"], dtype=float),
            range_min=np.asarray(d["range_min"], dtype=float),
            range_max=np.asarray(d["range_max"], dtype=float),
            mi_scores=list(d.get("mi_scores", [])),
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "ReductionModel":
        return cls.from_dict(json.loads(text))


def fisher_direction(Z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Unit vector along ``S_w^-1 (mu_pos - mu_neg)`` with a small ridge on ``S_w``."""
    pos, neg = Z[y > 0], Z[y < 0]
    mu_pos, mu_neg = pos.mean(0), neg.mean(0)
    s_w = (pos - mu_pos).T @ (pos - mu_pos) + (neg - mu_neg).T @ (neg - mu_neg)
    ridge = 1e-6 * float(np.mean(np.diag(s_w)))
    if ridge <= 0:
        ridge = 1e-6
    try:
        w = np.linalg.solve(s_w + ridge * np.eye(Z.shape[1]), mu_pos - mu_neg)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"within-class scatter is singular: {exc}") from exc
    norm = np.linalg.norm(w)
    if not np.isfinite(norm):
        raise NumericError("Fisher direction is not finite")
    if norm == 0.0:
        # identical class means: any direction is as good; take the first axis
        w = np.zeros(Z.shape[1])
        w[0] = 1.0
        return w
    return w / norm


def _fix_sign(v: np.ndarray) -> np.ndarray:
    return v if v[np.argmax(np.abs(v))] >= 0 else -v


def fit_reduction(data: Dataset, top_k: int = 10, out_dim: int = 2,
                  bins: int = 10) -> ReductionModel:
    """MI top-k selection, z-scoring, Fisher direction plus orthogonal PCA fill.

    Everything is estimated from ``data`` alone.  ``top_k`` is capped at the
    number of columns.
    """
    top_k = min(top_k, data.X.shape[1])
    if not 1 <= out_dim <= top_k:
        raise UsageError(f"out_dim must be in [1, {top_k}], got {out_dim}")
    if data.n_positive in (0, len(data)):
        raise UsageError("both classes must be present to fit a reduction")
    ranking = mutual_info_rank(data, bins)[:top_k]
    selected = [k for k, _ in ranking]
    raw = data.X[:, selected]
    means = raw.mean(0)
    stds = raw.std(0)
    stds = np.where(stds > 0, stds, 1.0)
    Z = (raw - means) / stds

    w = fisher_direction(Z, data.y)
    components = [w]
    if out_dim > 1:
        # orthonormal basis of the complement of w, then PCA inside it
        q, _ = np.linalg.qr(np.column_stack([w, np.eye(top_k)]))
        basis = q[:, 1:top_k]
        cov = np.cov(Z @ basis, rowvar=False, bias=True).reshape(top_k - 1, top_k - 1)
        evals, evecs = np.linalg.eigh(cov)
        for k in np.argsort(-evals, kind="stable")[: out_dim - 1]:
            components.append(_fix_sign(basis @ evecs[:, k]))
    P = np.column_stack(components)
    projected = Z @ P
    return ReductionModel(
        selected_columns=selected,
        column_names=[data.columns[k] for k in selected],
        means=means,
        stds=stds,
        projection=P,
        range_min=projected.min(0),
        range_max=projected.max(0),
        mi_scores=[s for _, s in ranking],
    )


def project(model: ReductionModel, X: np.ndarray) -> np.ndarray:
    """Select, standardize and project, without the final range map."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or (model.selected_columns and max(model.selected_columns) >= X.shape[1]):
        raise UsageError(f"data with shape {X.shape} lacks the model's selected columns")
    return ((X[:, model.selected_columns] - model.means) / model.stds) @ model.projection


def apply_reduction(model: ReductionModel, data: Dataset) -> Dataset:
    """Project and map each output column affinely onto [-pi, pi] using the train range."""
    missing = [c for c in model.column_names if c not in data.columns]
    if missing:
        raise UsageError(f"dataset lacks columns {missing}")
    cols = [data.columns.index(c) for c in model.column_names]
    Z = ((data.X[:, cols] - model.means) / model.stds) @ model.projection
    span = model.range_max - model.range_min
    safe = np.where(span > 0, span, 1.0)
    scaled = np.where(span > 0, -math.pi + 2 * math.pi * (Z - model.range_min) / safe, 0.0)
    scaled = np.clip(scaled, -math.pi, math.pi)
    names = [f"c{k}" for k in range(model.out_dim)]
    return Dataset(scaled, data.y.copy(), names, data.label_name,
                   f"reduced({data.provenance})")


def _class_indices(y: np.ndarray) -> list[np.ndarray]:
    return [np.flatnonzero(y < 0), np.flatnonzero(y > 0)]


def stratified_split(data: Dataset, train_fraction: float, seed: int = 0
                     ) -> tuple[Dataset, Dataset]:
    """Per-class proportional split; rows keep their original relative order."""
    if not 0.0 < train_fraction < 1.0:
        raise UsageError(f"train_fraction must be in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for idx in _class_indices(data.y):
        if len(idx) < 2:
            raise UsageError("each class needs at least two rows to split")
        perm = rng.permutation(idx)
        k = min(len(idx) - 1, max(1, int(round(train_fraction * len(idx)))))
        train.extend(perm[:k])
        test.extend(perm[k:])
    return data.subset(np.sort(train)), data.subset(np.sort(test))


def downsample(data: Dataset, n: int, seed: int = 0, nested: bool = True) -> Dataset:
    """Stratified subsample of ``n`` rows in original row order.

    With ``nested`` the per-class permutation depends only on ``seed``, so
    for a fixed seed smaller samples are subsets of larger ones.
    """
    if n < 2:
        raise UsageError(f"downsample size must be >= 2, got {n}")
    if n > len(data):
        raise UsageError(f"cannot draw {n} rows from {len(data)}")
    rng = np.random.default_rng(seed if nested else [seed, n])
    neg, pos = _class_indices(data.y)
    n_pos = int(round(n * len(pos) / len(data)))
    n_pos = min(max(n_pos, 1 if len(pos) else 0), len(pos), n - (1 if len(neg) else 0))
    n_neg = n - n_pos
    rows = np.concatenate([rng.permutation(neg)[:n_neg], rng.permutation(pos)[:n_pos]])
    return data.subset(np.sort(rows))


GENERATORS = ("xor", "gauss-imbalanced", "rings")


def _class_counts(n: int, positive_rate: float) -> tuple[int, int]:
    n_pos = int(round(n * positive_rate))
    return n - n_pos, n_pos


def _finish(X: np.ndarray, y: np.ndarray, nuisance: int, rng, name: str,
            params: dict) -> Dataset:
    if nuisance:
        X = np.column_stack([X, rng.standard_normal((X.shape[0], nuisance))])
    order = rng.permutation(X.shape[0])
    columns = [f"x{k}" for k in range(X.shape[1])]
    prov = json.dumps({"generator": name, **params}, sort_keys=True)
    return Dataset(X[order], y[order], columns, LABEL_COLUMN, prov)


def _xor(rng, n=500, sigma=0.25, nuisance=0, positive_rate=None):
    if positive_rate is None:
        y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    else:
        n_neg, n_pos = _class_counts(n, positive_rate)
        y = np.concatenate([-np.ones(n_neg), np.ones(n_pos)])
    # quadrant sign product decides the class: (+,+)/(-,-) positive
    s1 = np.where(rng.random(len(y)) < 0.5, 1.0, -1.0)
    s2 = s1 * y
    X = np.column_stack([s1, s2]) + sigma * rng.standard_normal((len(y), 2))
    return X, y, nuisance


def _gauss_imbalanced(rng, n=1000, d=10, informative=2, positive_rate=0.10,
                      separation=2.0):
    if not 1 <= informative <= d:
        raise UsageError("informative must be in [1, d]")
    n_neg, n_pos = _class_counts(n, positive_rate)
    y = np.concatenate([-np.ones(n_neg), np.ones(n_pos)])
    X = rng.standard_normal((n, d))
    shift = separation / math.sqrt(informative)
    X[y > 0, :informative] += shift
    return X, y, 0


def _rings(rng, n=500, inner=1.0, outer=2.0, noise=0.1, positive_rate=0.5, nuisance=0):
    n_neg, n_pos = _class_counts(n, positive_rate)
    y = np.concatenate([-np.ones(n_neg), np.ones(n_pos)])
    radius = np.where(y > 0, inner, outer) + noise * rng.standard_normal(n)
    angle = rng.uniform(0.0, 2 * math.pi, n)
    X = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    return X, y, nuisance


def synth_generate(spec: dict, seed: int = 0) -> Dataset:
    """Build a synthetic dataset from ``{"generator": name, **params}``.

    ``xor``: two informative columns, class = sign of the quadrant product,
    Gaussian noise ``sigma``, optional ``nuisance`` noise columns and an
    optional ``positive_rate`` enforced by sampling each class separately.
    ``gauss-imbalanced``: ``d`` columns of which ``informative`` carry a
    mean shift for the positives (default rate 0.10).
    ``rings``: concentric annuli, positives inside.
    """
    spec = dict(spec)
    name = spec.pop("generator", None)
    builders = {"xor": _xor, "gauss-imbalanced": _gauss_imbalanced, "rings": _rings}
    if name not in builders:
        raise UsageError(f"unknown generator {name!r}; expected one of {list(GENERATORS)}")
    rng = np.random.default_rng(seed)
    try:
        X, y, nuisance = builders[name](rng, **spec)
    except TypeError as exc:
        raise UsageError(f"bad parameters for generator {name!r}: {exc}") from exc
    return _finish(X, y, nuisance, rng, name, {**spec, "seed": seed})

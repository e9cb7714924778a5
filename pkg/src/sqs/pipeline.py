"""End-to-end steps shared by the CLI commands and the benchmark harnesses."""

from __future__ import annotations

import csv
import logging
import time
from pathlib import Path

import numpy as np

from .config import DataSource, RunConfig
from .datapipe import (Dataset, ReductionModel, apply_reduction, downsample, fit_reduction,
                       load_csv, stratified_split, synth_generate)
from .errors import DimensionError, IngestionError, UsageError
from .evolution import EvolutionReport, run
from .pauli_sim import FeatureMap
from .qkernel import cross_gram, gram_matrix
from .svm import (SvmConfig, auc, decision_values, default_gamma, linear_kernel, rbf_kernel,
                  select_c, train_precomputed)

log = logging.getLogger(__name__)

BASELINE_NAMES = {"svc-rbf": "SVC", "svc-linear": "SVC-linear"}


def load_source(src: DataSource, seed: int) -> Dataset:
    if src.path is not None:
        return load_csv(src.path, src.label_column, src.positive_label)
    return synth_generate(src.generator, seed)


def reduce_pair(train: Dataset, test: Dataset | None, cfg: RunConfig
                ) -> tuple[Dataset, Dataset | None, ReductionModel | None]:
    """Fit the reduction on ``train`` when it has more columns than qubits."""
    qubits = cfg.evolution.qubit_size
    d = train.X.shape[1]
    if d == qubits:
        return train, test, None
    if d < qubits:
        raise DimensionError(f"data has {d} columns but the feature map needs {qubits}")
    r = cfg.reduction
    model = fit_reduction(train, r.top_k, r.out_dim or qubits, r.bins)
    if model.out_dim != qubits:
        raise DimensionError(f"reduction outDim {model.out_dim} != qubitSize {qubits}")
    return (apply_reduction(model, train),
            apply_reduction(model, test) if test is not None else None, model)


def search(train: Dataset, cfg: RunConfig, threads: int = 1,
           seed: int | None = None) -> tuple[FeatureMap, EvolutionReport]:
    evo = cfg.evolution.build(cfg.seed if seed is None else seed)
    if train.X.shape[1] != evo.qubit_size:
        raise DimensionError(
            f"training data has {train.X.shape[1]} columns, qubitSize is {evo.qubit_size}")
    return run(evo, train.X, train.y, threads=threads)


def _fit_score(K_train, K_test, y_train, y_test, cfg: RunConfig, seed: int) -> dict:
    C = select_c(K_train, y_train, cfg.svm.build(), seed=seed) if cfg.svm.c_grid else None
    svm_cfg: SvmConfig = cfg.svm.build(C)
    start = time.perf_counter()
    model = train_precomputed(K_train, y_train, svm_cfg)
    scores = decision_values(model, K_test)
    return {
        "auc": auc(scores, y_test),
        "n_support": len(model.support_indices),
        "C": svm_cfg.C,
        "fit_time": time.perf_counter() - start,
        "decision_values": scores.tolist(),
        "model": model,
    }


def evaluate_models(fm: FeatureMap, train: Dataset, test: Dataset, cfg: RunConfig,
                    baselines=None, seed: int | None = None) -> list[dict]:
    """Train the quantum-kernel SVM and the requested classical baselines."""
    if fm.qubits != train.X.shape[1] or fm.qubits != test.X.shape[1]:
        raise DimensionError(
            f"feature map has {fm.qubits} qubits but data has "
            f"{train.X.shape[1]}/{test.X.shape[1]} columns")
    seed = cfg.seed if seed is None else seed
    shots = cfg.shots
    rows = []
    K = gram_matrix(fm, train.X, shots=shots, seed=[seed, 1] if shots else None)
    Kx = cross_gram(fm, test.X, train.X, shots=shots, seed=[seed, 2] if shots else None)
    row = _fit_score(K, Kx, train.y, test.y, cfg, seed)
    row.update(model_name="SQS", feature_map=fm.to_dict(), kernel=cfg.kernel)
    rows.append(row)
    for name in (cfg.baselines if baselines is None else baselines):
        if name == "svc-rbf":
            gamma = default_gamma(train.X)
            K, Kx = rbf_kernel(train.X, train.X, gamma), rbf_kernel(test.X, train.X, gamma)
        elif name == "svc-linear":
            K, Kx = linear_kernel(train.X, train.X), linear_kernel(test.X, train.X)
        else:
            raise UsageError(f"unknown baseline {name!r}")
        row = _fit_score(K, Kx, train.y, test.y, cfg, seed)
        row.update(model_name=BASELINE_NAMES[name])
        rows.append(row)
    return rows


def read_imported_scores(path: str | Path, test_labels=None) -> list[dict]:
    """Rows from an external scores file.

    Either a ``model,auc`` table, or one column of per-test-row scores per
    model (AUC is then computed against ``test_labels``).
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            table = list(csv.reader(fh))
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    if not table:
        raise IngestionError(f"{path} is empty")
    header = [h.strip() for h in table[0]]
    body = [r for r in table[1:] if r]
    try:
        if [h.lower() for h in header] == ["model", "auc"]:
            return [{"model_name": r[0], "auc": float(r[1]), "imported": True} for r in body]
        values = np.array([[float(v) for v in r] for r in body], dtype=float)
    except (ValueError, IndexError) as exc:
        raise IngestionError(f"{path}: unreadable score table: {exc}") from exc
    if test_labels is None:
        raise UsageError(f"{path}: per-row scores need test labels")
    if values.shape[0] != len(test_labels):
        raise DimensionError(f"{path}: {values.shape[0]} score rows, {len(test_labels)} test rows")
    return [{"model_name": name, "auc": auc(values[:, k], test_labels), "imported": True}
            for k, name in enumerate(header)]


def scaling_bench(data: Dataset, cfg: RunConfig, threads: int = 1) -> list[dict]:
    """Downsample, split, reduce, search and evaluate once per scenario size."""
    sizes = sorted(cfg.scenarios)
    if sizes and sizes[-1] > len(data):
        raise UsageError(f"scenario size {sizes[-1]} exceeds the {len(data)}-row dataset")
    records = []
    for n in sizes:
        sample = downsample(data, n, cfg.seed, nested=cfg.nested_scenarios)
        train, test = stratified_split(sample, cfg.train_fraction, cfg.seed)
        train, test, _ = reduce_pair(train, test, cfg)
        started = time.perf_counter()
        fm, report = search(train, cfg, threads)
        search_time = time.perf_counter() - started
        log.info("scenario n=%d: search done in %.1fs", n, search_time)
        for row in evaluate_models(fm, train, test, cfg):
            records.append({
                "scenario": f"n={n}",
                "n": n,
                "train_size": len(train),
                "test_size": len(test),
                "model": row["model_name"],
                "auc": row["auc"],
                "fit_time": row["fit_time"] + (search_time if row["model_name"] == "SQS" else 0.0),
                "feature_map": row.get("feature_map"),
                "seed": cfg.seed,
            })
    return records


def generalization_bench(data: Dataset, cfg: RunConfig, threads: int = 1,
                         train_fraction: float = 0.1, imported=()
                         ) -> tuple[list[dict], Dataset, Dataset]:
    """Search on a small stratified training share and score the remainder."""
    train_raw, test_raw = stratified_split(data, train_fraction, cfg.seed)
    train, test, _ = reduce_pair(train_raw, test_raw, cfg)
    started = time.perf_counter()
    fm, _ = search(train, cfg, threads)
    search_time = time.perf_counter() - started
    records = []
    for row in evaluate_models(fm, train, test, cfg):
        records.append({
            "scenario": "generalization",
            "n": len(data),
            "train_size": len(train),
            "test_size": len(test),
            "model": row["model_name"],
            "auc": row["auc"],
            "fit_time": row["fit_time"] + (search_time if row["model_name"] == "SQS" else 0.0),
            "feature_map": row.get("feature_map"),
            "seed": cfg.seed,
        })
    for path in imported:
        for row in read_imported_scores(path, test.y):
            records.append({
                "scenario": "generalization", "n": len(data), "train_size": len(train),
                "test_size": len(test), "model": row["model_name"], "auc": row["auc"],
                "fit_time": None, "feature_map": None, "seed": cfg.seed, "imported": True,
            })
    return records, train_raw, test_raw


def render_table(records: list[dict], fmt: str = "text") -> str:
    """AUC table, one column per model and one row per scenario; best AUC per row starred."""
    scenarios: list[str] = []
    models: list[str] = []
    cell: dict[tuple[str, str], float] = {}
    for r in records:
        s = str(r.get("scenario", "AUC"))
        if s not in scenarios:
            scenarios.append(s)
        if r["model"] not in models:
            models.append(r["model"])
        cell[s, r["model"]] = float(r["auc"])
    lines = []
    header = ["Scenario"] + models
    body = []
    for s in scenarios:
        vals = [cell.get((s, m)) for m in models]
        best = max(v for v in vals if v is not None)
        row = [s]
        for v in vals:
            if v is None:
                row.append("-")
            elif v == best:
                row.append(f"**{v:.3f}**" if fmt == "markdown" else f"{v:.3f}*")
            else:
                row.append(f"{v:.3f}")
        body.append(row)
    if fmt == "markdown":
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "---|" * len(header))
        lines.extend("| " + " | ".join(r) + " |" for r in body)
    else:
        widths = [max(len(str(x)) for x in col) for col in zip(header, *body)]
        lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
        lines.extend("  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in body)
    return "\n".join(lines) + "\n"

"""Command-line entry point.

Exit codes: 0 success, 2 usage/config error, 3 numeric/convergence error.
Flags override config-file keys, which override defaults.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from pydantic import ValidationError

from . import __version__
from .config import RunConfig
from .datapipe import (apply_reduction, fit_reduction, load_csv, stratified_split,
                       synth_generate, write_csv)
from .errors import NumericError, UsageError
from .evolution import run
from .pauli_sim import FeatureMap
from .pipeline import (evaluate_models, generalization_bench, load_source,
                       read_imported_scores, reduce_pair, render_table, scaling_bench)
from .qkernel import gram_matrix, write_gram

log = logging.getLogger("sqs")


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")


def _threads(args, cfg: RunConfig | None = None) -> int:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("SQS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"SQS_THREADS must be an integer, got {env!r}") from None
    if cfg is not None and cfg.threads:
        return cfg.threads
    return 1


def _resolve_config(args) -> RunConfig:
    """Config file (if any) with command-line overrides applied."""
    raw = {}
    if getattr(args, "config", None):
        try:
            raw = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config} is not valid JSON: {exc}") from exc
    cfg = RunConfig.model_validate(raw)
    data = cfg.to_json_dict()
    evo = data["evolution"]
    overrides = {
        "seed": ("seed", data),
        "kernel": ("kernel", data),
        "out_dir": ("outputDir", data),
        "threads": ("threads", data),
        "train_fraction": ("trainFraction", data),
        "generations": ("maximumGenerations", evo),
        "population": ("populationSize", evo),
        "qubits": ("qubitSize", evo),
    }
    for attr, (key, target) in overrides.items():
        value = getattr(args, attr, None)
        if value is not None:
            target[key] = value
    if getattr(args, "qubits", None) is not None:
        evo["quantumDim"] = None
    if getattr(args, "baseline", None):
        data["baselines"] = args.baseline
    if getattr(args, "scenarios", None):
        data["scenarios"] = args.scenarios
    if getattr(args, "data", None):
        src = data.get("data") or {}
        data["data"] = {"path": args.data,
                        "labelColumn": src.get("labelColumn", "label"),
                        "positiveLabel": src.get("positiveLabel", "1")}
    return RunConfig.model_validate(data)


def cmd_gen_data(args) -> int:
    try:
        spec = json.loads(Path(args.spec).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read spec {args.spec}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"spec {args.spec} is not valid JSON: {exc}") from exc
    data = synth_generate(spec, args.seed)
    out = Path(args.out)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        write_csv(out, data)
        _write_json(out.with_suffix(out.suffix + ".json"), {
            "spec": spec, "seed": args.seed, "rows": len(data),
            "positives": data.n_positive, "columns": data.columns,
            "config_digest": _digest({"spec": spec, "seed": args.seed}),
        })
    except OSError as exc:
        raise UsageError(f"cannot write {out}: {exc}") from exc
    print(f"wrote {len(data)} rows ({data.n_positive} positive) to {out}")
    return 0


def cmd_preprocess(args) -> int:
    cfg = _resolve_config(args)
    if args.top_k is not None:
        cfg.reduction.top_k = args.top_k
    out_dim = args.out_dim or cfg.reduction.out_dim or cfg.evolution.qubit_size
    if cfg.data is None:
        raise UsageError("preprocess needs --data or a config with a data source")
    data = load_source(cfg.data, cfg.seed)
    train, test = stratified_split(data, cfg.train_fraction, cfg.seed)
    model = fit_reduction(train, cfg.reduction.top_k, out_dim, cfg.reduction.bins)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "train.csv", apply_reduction(model, train))
    write_csv(out / "test.csv", apply_reduction(model, test))
    _write_json(out / "reduction.json", {**model.to_dict(), "config_digest": cfg.digest()})
    print(f"reduced {len(data)} rows to {out_dim} columns "
          f"(train {len(train)}, test {len(test)}, rejected {data.rejected}) in {out}")
    return 0


def cmd_search(args) -> int:
    cfg = _resolve_config(args)
    if args.dry_run:
        print(json.dumps(cfg.to_json_dict(), indent=2))
        return 0
    if cfg.data is None:
        raise UsageError("search needs --data or a config with a data source")
    data = load_source(cfg.data, cfg.seed)
    train, _, reduction = reduce_pair(data, None, cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    digest = cfg.digest()
    if reduction is not None:
        _write_json(out / "reduction.json", {**reduction.to_dict(), "config_digest": digest})

    def progress(rec):
        log.info("generation %d: best %.6f mean %.6f", rec.generation, rec.best_fitness,
                 rec.mean_fitness)

    evo = cfg.evolution.build(cfg.seed)
    best, report = run(evo, train.X, train.y, threads=_threads(args, cfg), callback=progress)
    _write_json(out / "feature_map.json", best.to_dict())
    with (out / "evolution.jsonl").open("w") as fh:
        for rec in report.generations:
            fh.write(json.dumps({**rec.to_dict(), "config_digest": digest}) + "\n")
    summary = {**report.summary(), "config_digest": digest, "config": cfg.to_json_dict()}
    _write_json(out / "summary.json", summary)
    print(f"best fitness {report.best_fitness:.6f}, final alignment "
          f"{report.final_alignment:.6f} ({report.stop_reason}); wrote {out / 'feature_map.json'}")
    return 0


def _read_fm(path) -> FeatureMap:
    try:
        return FeatureMap.from_json(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read feature map {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"feature map {path} is not valid JSON: {exc}") from exc


def cmd_evaluate(args) -> int:
    cfg = _resolve_config(args)
    fm = _read_fm(args.feature_map)
    train = load_csv(args.train, args.label_column, args.positive_label)
    test = load_csv(args.test, args.label_column, args.positive_label)
    rows = evaluate_models(fm, train, test, cfg)
    for path in args.import_scores or []:
        rows.extend(read_imported_scores(path, test.y))
    out = Path(args.out)
    report = {
        "kind": "evaluate",
        "config_digest": cfg.digest(),
        "seed": cfg.seed,
        "kernel": cfg.kernel,
        "records": [
            {"scenario": "evaluate", "model": r["model_name"], "auc": r["auc"],
             "n_support": r.get("n_support"), "train_size": len(train),
             "test_size": len(test), "seed": cfg.seed, "imported": r.get("imported", False)}
            for r in rows
        ],
        "decision_values": {r["model_name"]: r["decision_values"]
                            for r in rows if "decision_values" in r},
    }
    _write_json(out, report)
    if args.model_out:
        _write_json(Path(args.model_out), rows[0]["model"].to_dict())
    if args.export_gram:
        K = gram_matrix(fm, train.X, shots=cfg.shots,
                        seed=[cfg.seed, 1] if cfg.shots else None)
        write_gram(args.export_gram, K, fm, shots=cfg.shots,
                   seed=cfg.seed if cfg.shots else None,
                   extra={"config_digest": cfg.digest()})
    sys.stdout.write(render_table(report["records"]))
    return 0


def cmd_scaling_bench(args) -> int:
    cfg = _resolve_config(args)
    if cfg.data is None:
        raise UsageError("scaling-bench needs a data source")
    data = load_source(cfg.data, cfg.seed)
    records = scaling_bench(data, cfg, _threads(args, cfg))
    out = Path(cfg.output_dir)
    _write_json(out / "scaling_report.json", {
        "kind": "scaling", "config_digest": cfg.digest(), "seed": cfg.seed,
        "config": cfg.to_json_dict(), "records": records})
    with (out / "scaling.csv").open("w") as fh:
        fh.write("scenario,n,model,auc\n")
        for r in records:
            fh.write(f"{r['scenario']},{r['n']},{r['model']},{r['auc']!r}\n")
    sys.stdout.write(render_table(records))
    return 0


def cmd_generalization_bench(args) -> int:
    cfg = _resolve_config(args)
    if cfg.data is None:
        raise UsageError("generalization-bench needs a data source")
    data = load_source(cfg.data, cfg.seed)
    records, train_raw, test_raw = generalization_bench(
        data, cfg, _threads(args, cfg), args.train_share, args.import_scores or ())
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "generalization_train.csv", train_raw)
    write_csv(out / "generalization_test.csv", test_raw)
    _write_json(out / "generalization_report.json", {
        "kind": "generalization", "config_digest": cfg.digest(), "seed": cfg.seed,
        "config": cfg.to_json_dict(), "records": records})
    sys.stdout.write(render_table(records))
    return 0


def cmd_report(args) -> int:
    try:
        report = json.loads(Path(args.input).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read report {args.input}: {exc}") from exc
    records = report.get("records") if isinstance(report, dict) else report
    if not records:
        raise UsageError(f"{args.input} has no records")
    text = render_table(records, args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _add_common(p: argparse.ArgumentParser, data: bool = True) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="worker threads (also SQS_THREADS)")
    p.add_argument("--out-dir", dest="out_dir")
    if data:
        p.add_argument("--data", help="CSV dataset (overrides the config data source)")
    p.add_argument("--qubits", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--population", type=int)
    p.add_argument("--kernel", help="exact or shots:<n>")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sqs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dataset")
    p.add_argument("--spec", required=True, help="generator spec JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("preprocess", help="split, select, reduce and rescale a dataset")
    _add_common(p)
    p.add_argument("--train-fraction", type=float, dest="train_fraction")
    p.add_argument("--top-k", type=int, dest="top_k")
    p.add_argument("--out-dim", type=int, dest="out_dim")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("search", help="evolve a feature map")
    _add_common(p)
    p.add_argument("--dry-run", action="store_true", help="print the resolved config and exit")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("evaluate", help="train and score SVMs for a feature map")
    _add_common(p, data=False)
    p.add_argument("--feature-map", required=True, dest="feature_map")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--label-column", default="label", dest="label_column")
    p.add_argument("--positive-label", default="1", dest="positive_label")
    p.add_argument("--baseline", action="append", choices=["svc-rbf", "svc-linear"])
    p.add_argument("--import-scores", action="append", dest="import_scores")
    p.add_argument("--export-gram", dest="export_gram")
    p.add_argument("--model-out", dest="model_out")
    p.add_argument("--out", default="metrics.json")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("scaling-bench", help="AUC versus downsampled dataset size")
    _add_common(p)
    p.add_argument("--scenarios", type=int, nargs="+")
    p.add_argument("--baseline", action="append", choices=["svc-rbf", "svc-linear"])
    p.set_defaults(func=cmd_scaling_bench)

    p = sub.add_parser("generalization-bench", help="train on a small share, test on the rest")
    _add_common(p)
    p.add_argument("--train-share", type=float, default=0.1, dest="train_share")
    p.add_argument("--baseline", action="append", choices=["svc-rbf", "svc-linear"])
    p.add_argument("--import-scores", action="append", dest="import_scores")
    p.set_defaults(func=cmd_generalization_bench)

    p = sub.add_parser("report", help="render a report's AUC table")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["text", "markdown"], default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: invalid configuration:\n{exc}", file=sys.stderr)
        return 2
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``gaan {mol2jsonl,fold,train,eval,gradcheck}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 check failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .datasets import Dataset, load_dataset, read_label_csv, read_smiles_file
from .exceptions import ArchitectureError, CheckpointMismatch, GaanError
from .folding import (FoldParams, RingCollapseParams, build_pyramid, level_to_dot,
                      pyramid_to_json, stack_one_hots)
from .graph import AttributeSchema, initial_features, read_jsonl, write_jsonl
from .model import GAANModel, ModelConfig
from .training import evaluate, train, write_history

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CHECK = 0, 1, 2, 3

logger = logging.getLogger("gaan")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def cmd_mol2jsonl(args) -> int:
    smiles, labels, _ = read_smiles_file(args.smiles_path)
    if args.labels:
        _, labels, _ = read_label_csv(args.labels)
        if labels.shape[0] != len(smiles):
            print(f"error: {len(smiles)} molecules but {labels.shape[0]} label rows", file=sys.stderr)
            return EXIT_DATA
    from .smiles import parse_smiles
    graphs, kept = [], []
    for i, s in enumerate(smiles):
        try:
            graphs.append(parse_smiles(s))
            kept.append(i)
        except GaanError as exc:
            print(f"line {i + 1}: {type(exc).__name__}: {exc} ({s!r})", file=sys.stderr)
    if not graphs:
        print("error: no molecule could be converted", file=sys.stderr)
        return EXIT_DATA
    write_jsonl(args.out_path, graphs, None if labels is None else labels[kept])
    print(f"wrote {len(graphs)} graphs to {args.out_path} ({len(smiles) - len(graphs)} rejected)")
    return EXIT_OK


def cmd_fold(args) -> int:
    graphs, _ = read_jsonl(args.graph_path)
    if not graphs:
        print("error: graph file is empty", file=sys.stderr)
        return EXIT_DATA
    schema = AttributeSchema.from_graphs(graphs)
    params = [(FoldParams(args.alpha, args.beta), RingCollapseParams(args.omega, args.theta))] * args.levels
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.graph_path).stem
    for gi, g in enumerate(graphs):
        g0 = initial_features(g, schema)
        pyr = build_pyramid(stack_one_hots(g0), params)
        fix = pyr.fixpoint_level()
        if fix is not None and fix < pyr.h_max:
            logger.warning("graph %d: fixpoint at level %d", gi, fix)
        obj = pyramid_to_json(pyr)
        for h in range(pyr.h_max + 1):
            base = out_dir / f"{stem}_g{gi}_level{h}"
            if args.dump_pyramid == "dot":
                base.with_suffix(".dot").write_text(level_to_dot(pyr, h))
            else:
                base.with_suffix(".json").write_text(json.dumps(obj["levels"][h], indent=1))
        counts = ",".join(str(c) for c in pyr.vertex_counts())
        print(f"graph {gi}: vertex counts {counts}")
    return EXIT_OK


def read_config(path) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    cfg = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            cfg[key.strip()] = value.strip()
    return cfg


_CONFIG_FIELDS = {
    "arch": str, "lam": float, "learnable_lambda": lambda s: s.lower() in ("1", "true", "yes"),
    "lr": float, "batch_size": int, "max_epochs": int, "early_stop_patience": int, "seed": int,
    "encoder_dim": int, "recon_weight": float, "fold_init": float,
}


def model_config_from(cfg: dict) -> ModelConfig:
    kwargs = {}
    for key, conv in _CONFIG_FIELDS.items():
        if key in cfg:
            try:
                kwargs[key] = conv(cfg[key])
            except ValueError as exc:
                raise UsageError(f"bad value for {key}: {cfg[key]!r}") from exc
    if "patience" in cfg:
        kwargs["early_stop_patience"] = int(cfg["patience"])
    if os.environ.get("GAAN_SEED"):
        kwargs["seed"] = int(os.environ["GAAN_SEED"])
    return ModelConfig(**kwargs)


def _fmt_metrics(metrics: dict) -> str:
    parts = []
    for k, v in metrics.items():
        if isinstance(v, np.ndarray):
            parts.append(f"{k}=[{', '.join(f'{x:.4f}' for x in v)}]")
        else:
            parts.append(f"{k}={v:.4f}")
    return " ".join(parts)


def cmd_train(args) -> int:
    cfg = read_config(args.config_path)
    base = Path(args.config_path).parent

    def resolve(key, default=None):
        if key not in cfg:
            return default
        p = Path(cfg[key])
        return p if p.is_absolute() else base / p

    if "graphs" not in cfg:
        raise UsageError("config needs a graphs= entry")
    config = model_config_from(cfg)
    train_ds, valid_ds, test_ds = load_dataset(resolve("graphs"), resolve("labels"),
                                               int(cfg.get("split_seed", 0)))
    state, history = train(train_ds, valid_ds, config)
    metrics_path = resolve("metrics", base / "metrics.csv")
    checkpoint_path = resolve("checkpoint", base / "checkpoint.json")
    write_history(metrics_path, history)
    state.model.save(checkpoint_path)
    print(f"best epoch {state.best_epoch} of {state.epoch}")
    print("valid: " + _fmt_metrics(evaluate(state.model, valid_ds if len(valid_ds) else train_ds)))
    if len(test_ds):
        print("test: " + _fmt_metrics(evaluate(state.model, test_ds)))
    print(f"checkpoint: {checkpoint_path}\nmetrics: {metrics_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if not Path(args.checkpoint).exists():
        print(f"error: checkpoint {args.checkpoint} not found", file=sys.stderr)
        return EXIT_DATA
    model = GAANModel.load(args.checkpoint)
    graphs, jsonl_labels = read_jsonl(args.dataset)
    if args.labels:
        _, labels, _ = read_label_csv(args.labels)
    else:
        labels = np.array([[np.nan] * len(model.task_types) if y is None else y for y in jsonl_labels])
    data = Dataset(graphs, labels, model.task_types)
    metrics = evaluate(model, data)
    for k, v in metrics.items():
        if isinstance(v, np.ndarray):
            for t, x in enumerate(v):
                print(f"{k.replace('_per_task', '')}[task{t}] {x:.6f}")
        else:
            print(f"{k} {v:.6f}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .gradcheck import TOLERANCE, format_report, gradcheck_model
    report = gradcheck_model(seed=args.seed)
    print(format_report(report, TOLERANCE))
    failed = [k for k, v in report.items() if not v <= TOLERANCE]
    if failed:
        print(f"FAILED: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gaan", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mol2jsonl", help="convert SMILES to the JSONL graph format")
    p.add_argument("smiles_path")
    p.add_argument("out_path")
    p.add_argument("--labels", help="CSV with header id,task1,...")
    p.set_defaults(func=cmd_mol2jsonl)

    p = sub.add_parser("fold", help="dump folding pyramids with constant weights")
    p.add_argument("graph_path")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--dump-pyramid", choices=("dot", "json"), default="json")
    p.add_argument("--out-dir", default=".")
    for name in ("alpha", "beta", "omega", "theta"):
        p.add_argument(f"--{name}", type=float, default=1.0)
    p.set_defaults(func=cmd_fold)

    p = sub.add_parser("train", help="train from a key=value config file")
    p.add_argument("config_path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a JSONL dataset")
    p.add_argument("checkpoint")
    p.add_argument("dataset")
    p.add_argument("--labels")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ArchitectureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GaanError, OSError, CheckpointMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

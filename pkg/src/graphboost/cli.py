"""Experiment harness: synth / train / eval / sweep commands.

Every command is a pure function of (config file, seed) to output bytes;
no output file carries timing, so identical runs are byte-identical.
Failures print a machine-readable JSON error to stderr and exit nonzero
(2 for usage problems, 1 for runtime failures).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .boosting import train_boosted
from .checkpoint import load_checkpoint, peek_encoder_config, save_checkpoint
from .config import ExperimentConfig, UsageError, load_config
from .export import (
    write_embeddings_csv,
    write_error_curves_csv,
    write_margins_csv,
    write_metrics_json,
)
from .graphs import load_edge_csv, load_node_features, load_node_labels
from .splits import make_split
from .synthetic import gen_synthetic_multimodal

__all__ = ["main"]


def _write_manifest(cfg: ExperimentConfig, out_dir: Path, command: str,
                    extra_hashes=()) -> None:
    digest = hashlib.sha256()
    digest.update(json.dumps(cfg.effective(), sort_keys=True).encode())
    for path in extra_hashes:
        digest.update(Path(path).read_bytes())
    manifest = {
        "command": command,
        "inputs_hash": digest.hexdigest(),
        "seed": cfg.seed,
        "version": __version__,
        "effective_config": cfg.effective(),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _resolve_graph(cfg: ExperimentConfig):
    """Build the graph from the synthetic block or from dataset files."""
    ds = cfg.dataset
    if "synthetic" in ds:
        synth = gen_synthetic_multimodal(seed=cfg.seed, **ds["synthetic"])
        return synth.graph, synth
    paths = ds["path"]
    graph = load_edge_csv(paths["edges"], has_timestamps=paths.get("has_timestamps", False))
    if "features" in paths:
        graph = load_node_features(paths["features"], graph,
                                   allow_zero=paths.get("allow_zero", False))
    if "labels" in paths:
        graph = load_node_labels(paths["labels"], graph)
    return graph, None


def _dataset_files(cfg: ExperimentConfig):
    ds = cfg.dataset
    if "path" not in ds:
        return []
    return [p for key, p in ds["path"].items() if key in ("edges", "features", "labels")]


def cmd_synth(cfg: ExperimentConfig) -> int:
    if "synthetic" not in cfg.dataset:
        raise UsageError("synth requires a dataset.synthetic block")
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    synth = gen_synthetic_multimodal(seed=cfg.seed, **cfg.dataset["synthetic"])
    graph = synth.graph

    with (out / "edges.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src", "dst"])
        for u, v in graph.edges:
            writer.writerow([u, v])
    with (out / "features.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        for i, row in enumerate(graph.node_features):
            writer.writerow([i] + [repr(float(x)) for x in row])
    with (out / "labels.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        for i, row in enumerate(graph.node_labels):
            writer.writerow([i] + [repr(float(x)) for x in row])
    (out / "ground_truth.json").write_text(
        json.dumps(synth.ground_truth(), sort_keys=True, indent=1) + "\n", encoding="utf-8")
    _write_manifest(cfg, out, "synth")
    return 0


def _run_training(cfg: ExperimentConfig, graph, split):
    encoder = cfg.encoder_config(input_dim=graph.node_features.shape[1])
    state, report = train_boosted(
        graph, split, encoder, cfg.boost_config(), cfg.training_config(),
        seed=cfg.seed, task=cfg.task, mix=cfg.mix)
    return state, report


def cmd_train(cfg: ExperimentConfig) -> int:
    graph, _ = _resolve_graph(cfg)
    if graph.node_features is None:
        raise UsageError("training requires node features (dataset.path.features)")
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    split = make_split(graph, cfg.split_spec(), dedupe_eval=cfg.raw["dedupe_eval"])
    state, report = _run_training(cfg, graph, split)
    save_checkpoint(state, out / "checkpoint.json")
    write_metrics_json(report, out / "metrics.json")
    write_margins_csv(report, out / "margins.csv")
    write_error_curves_csv([report], out / "error_curves.csv")
    write_embeddings_csv(state, graph, out)
    _write_manifest(cfg, out, "train", extra_hashes=_dataset_files(cfg))
    return 0


def cmd_eval(cfg: ExperimentConfig, checkpoint_path) -> int:
    graph, _ = _resolve_graph(cfg)
    encoder = peek_encoder_config(checkpoint_path)
    dim = graph.node_features.shape[1] if graph.node_features is not None else 0
    if dim != encoder.input_dim:
        raise UsageError(
            f"dataset feature dimension {dim} does not match checkpoint "
            f"encoder input_dim {encoder.input_dim}")
    state = load_checkpoint(checkpoint_path, graph)
    split = make_split(graph, cfg.split_spec(), dedupe_eval=cfg.raw["dedupe_eval"])
    _, report = train_boosted(
        graph, split, state.encoder_config, state.config, state.training_config,
        seed=state.seed, task=state.task, mix=cfg.mix, resume_state=state)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_json(report, out / "metrics_eval.json")
    _write_manifest(cfg, out, "eval", extra_hashes=[checkpoint_path] + _dataset_files(cfg))
    print(json.dumps({"test_ap": report.final_test_ap,
                      "rounds": len(report.rounds)}, sort_keys=True))
    return 0


_AXES = ("num_learners", "embed_dim", "train_fraction")


def cmd_sweep(cfg: ExperimentConfig, axis: str, values) -> int:
    if axis not in _AXES:
        raise UsageError(f"unknown sweep axis {axis!r}; valid: {_AXES}")
    if len(set(values)) != len(values):
        raise UsageError("sweep values must be distinct (output dirs would overlap)")
    seeds = cfg.sweep["seeds"] or [cfg.seed]
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    k_default = cfg.boost_config().max_learners
    rows = []
    for seed in seeds:
        # Paired seeds: both arms share the data, split and sampling seeds.
        def run(max_learners=None, embed_dim=None, train_fraction=None):
            arm_cfg = ExperimentConfig(raw=json.loads(json.dumps(cfg.raw)))
            arm_cfg.raw["seed"] = int(seed)
            graph, _ = _resolve_graph(arm_cfg)
            split = make_split(graph, arm_cfg.split_spec(train_fraction=train_fraction),
                               dedupe_eval=arm_cfg.raw["dedupe_eval"])
            encoder = arm_cfg.encoder_config(
                input_dim=graph.node_features.shape[1], embed_dim=embed_dim)
            return train_boosted(
                graph, split, encoder, arm_cfg.boost_config(max_learners=max_learners),
                arm_cfg.training_config(), seed=int(seed), task=arm_cfg.task,
                mix=arm_cfg.mix)

        if axis == "num_learners":
            # One run at the largest budget; prefixes give every smaller K.
            k_max = int(max(values))
            state, report = run(max_learners=k_max)
            for value in values:
                k = min(int(value), len(report.rounds))
                rows.append({"axis": axis, "value": value, "seed": seed,
                             "actual_k": k,
                             "baseline_test_ap": report.at_k(1).test_ap,
                             "boosted_test_ap": report.at_k(k).test_ap})
        elif axis == "embed_dim":
            for value in values:
                per_learner = int(value)
                _, boosted = run(embed_dim=per_learner)
                base_dim = cfg.sweep["baseline_embed_dim"] or k_default * per_learner
                _, baseline = run(max_learners=1, embed_dim=base_dim)
                rows.append({"axis": axis, "value": value, "seed": seed,
                             "actual_k": len(boosted.rounds),
                             "baseline_test_ap": baseline.final.test_ap,
                             "boosted_test_ap": boosted.final.test_ap})
        else:  # train_fraction
            for value in values:
                frac = float(value)
                _, boosted = run(train_fraction=frac)
                base_dim = cfg.sweep["baseline_embed_dim"] or \
                    k_default * cfg.raw["encoder"]["embed_dim"]
                _, baseline = run(max_learners=1, embed_dim=base_dim, train_fraction=frac)
                rows.append({"axis": axis, "value": value, "seed": seed,
                             "actual_k": len(boosted.rounds),
                             "baseline_test_ap": baseline.final.test_ap,
                             "boosted_test_ap": boosted.final.test_ap})

    with (out / "sweep.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["axis", "value", "seed", "actual_k",
                         "baseline_test_ap", "boosted_test_ap"])
        for row in rows:
            writer.writerow([row["axis"], row["value"], row["seed"], row["actual_k"],
                             repr(float(row["baseline_test_ap"])),
                             repr(float(row["boosted_test_ap"]))])
    _write_manifest(cfg, out, f"sweep:{axis}", extra_hashes=_dataset_files(cfg))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphboost",
        description="Boosted multi-space graph embeddings: data generation, "
                    "training, evaluation and sweeps.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE", help="dotted-path config override")
        p.add_argument("--print-effective-config", action="store_true",
                       help="print the fully resolved config and exit")

    for name in ("synth", "train"):
        common(sub.add_parser(name))
    p_eval = sub.add_parser("eval")
    common(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    p_sweep = sub.add_parser("sweep")
    common(p_sweep)
    p_sweep.add_argument("--axis", required=True)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated axis values")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed, out_dir=args.out,
                          overrides=args.override)
        if args.print_effective_config:
            print(json.dumps(cfg.effective(), sort_keys=True, indent=1))
            return 0
        if args.command == "synth":
            return cmd_synth(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, args.checkpoint)
        if args.command == "sweep":
            values = [json.loads(v) for v in args.values.split(",")]
            return cmd_sweep(cfg, args.axis, values)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(json.dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports all failures
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Experiment configuration: JSON file + overrides -> typed configs.

The hyperparameter grids follow the standard tuning sets (learning rate in
{1e-4, 5e-4, 1e-3}, heads in {1, 2, 3}, neighbor sample size in
{10, 20, 30}, boosting learning rate in {1.0, 2.0, 3.0}, batch size 200);
values outside them are rejected unless ``allow_nonstandard_grid`` is set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .boosting import BoostConfig
from .encoder import EncoderConfig
from .splits import SplitSpec
from .training import TrainingConfig

__all__ = ["ExperimentConfig", "UsageError", "load_config", "apply_override"]

LEARNING_RATE_GRID = (1e-4, 5e-4, 1e-3)
HEADS_GRID = (1, 2, 3)
NEIGHBOR_GRID = (10, 20, 30)
BOOST_LR_GRID = (1.0, 2.0, 3.0)
BATCH_SIZE = 200


class UsageError(ValueError):
    """Configuration problem the caller must fix; maps to exit status 2."""


_DEFAULTS = {
    "dataset": {},
    "split": {"mode": "random_transductive", "train_fraction": 0.5},
    "encoder": {"kind": "attention", "embed_dim": 16, "num_heads": 1,
                "neighbor_sample_size": 10, "include_self_in_node_task": False},
    "boosting": {"max_learners": 5, "boost_learning_rate": 1.0,
                 "algorithm": "samme_r", "tau": 0.5, "require_progress": True,
                 "weight_update_source": "auto", "weight_cap": 0.5},
    "training": {"learning_rate": 1e-3, "epochs": 40, "patience": 5,
                 "batch_size": BATCH_SIZE},
    "sweep": {"seeds": None, "baseline_embed_dim": None},
    "task": "link",
    "mix": 0.5,
    "dedupe_eval": False,
    "seed": 0,
    "out_dir": "runs/out",
    "allow_nonstandard_grid": False,
}


@dataclass
class ExperimentConfig:
    raw: dict

    @property
    def task(self) -> str:
        return self.raw["task"]

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def out_dir(self) -> Path:
        return Path(self.raw["out_dir"])

    @property
    def mix(self) -> float:
        return float(self.raw["mix"])

    @property
    def dataset(self) -> dict:
        return self.raw["dataset"]

    @property
    def sweep(self) -> dict:
        return self.raw["sweep"]

    def split_spec(self, train_fraction: Optional[float] = None,
                   seed: Optional[int] = None) -> SplitSpec:
        blk = self.raw["split"]
        return SplitSpec(
            mode=blk["mode"],
            train_fraction=blk["train_fraction"] if train_fraction is None else train_fraction,
            seed=self.seed if seed is None else seed,
        )

    def encoder_config(self, input_dim: int, embed_dim: Optional[int] = None) -> EncoderConfig:
        blk = self.raw["encoder"]
        return EncoderConfig(
            kind=blk["kind"],
            input_dim=input_dim,
            embed_dim=int(blk["embed_dim"] if embed_dim is None else embed_dim),
            num_heads=int(blk["num_heads"]),
            neighbor_sample_size=int(blk["neighbor_sample_size"]),
            include_self_in_node_task=bool(blk["include_self_in_node_task"]),
        )

    def boost_config(self, max_learners: Optional[int] = None) -> BoostConfig:
        blk = dict(self.raw["boosting"])
        algorithm = blk["algorithm"]
        if algorithm == "none":
            algorithm = "samme_r"
            blk["max_learners"] = 1
        return BoostConfig(
            max_learners=int(blk["max_learners"] if max_learners is None else max_learners),
            boost_learning_rate=float(blk["boost_learning_rate"]),
            algorithm=algorithm,
            tau=float(blk["tau"]),
            require_progress=bool(blk["require_progress"]),
            weight_update_source=blk["weight_update_source"],
            weight_cap=float(blk["weight_cap"]),
        )

    def training_config(self) -> TrainingConfig:
        blk = self.raw["training"]
        return TrainingConfig(
            learning_rate=float(blk["learning_rate"]),
            epochs=int(blk["epochs"]),
            patience=int(blk["patience"]),
            batch_size=int(blk["batch_size"]),
        )

    def effective(self) -> dict:
        """Fully resolved config; out_dir is location metadata, not an input,
        so it is excluded and outputs stay byte-identical across locations."""
        out = json.loads(json.dumps(self.raw, sort_keys=True))
        out.pop("out_dir", None)
        return out

    def validate(self) -> None:
        raw = self.raw
        if raw["task"] not in ("link", "recommend", "multitask"):
            raise UsageError(f"unknown task {raw['task']!r}")
        ds = raw["dataset"]
        if "synthetic" not in ds and "path" not in ds:
            raise UsageError("dataset block must contain either 'synthetic' or 'path'")
        if "path" in ds:
            for key in ("edges",):
                if key not in ds["path"]:
                    raise UsageError(f"dataset.path block is missing {key!r}")
            for key, value in ds["path"].items():
                if key in ("edges", "features", "labels") and not Path(value).exists():
                    raise UsageError(f"dataset.path.{key}: no such file {value!r}")
        if not raw["allow_nonstandard_grid"]:
            tr, enc, bo = raw["training"], raw["encoder"], raw["boosting"]
            checks = [
                (float(tr["learning_rate"]) in LEARNING_RATE_GRID,
                 f"training.learning_rate {tr['learning_rate']} not in grid {LEARNING_RATE_GRID}"),
                (int(tr["batch_size"]) == BATCH_SIZE,
                 f"training.batch_size {tr['batch_size']} != {BATCH_SIZE}"),
                (int(enc["num_heads"]) in HEADS_GRID,
                 f"encoder.num_heads {enc['num_heads']} not in grid {HEADS_GRID}"),
                (int(enc["neighbor_sample_size"]) in NEIGHBOR_GRID,
                 f"encoder.neighbor_sample_size {enc['neighbor_sample_size']}"
                 f" not in grid {NEIGHBOR_GRID}"),
                (float(bo["boost_learning_rate"]) in BOOST_LR_GRID,
                 f"boosting.boost_learning_rate {bo['boost_learning_rate']}"
                 f" not in grid {BOOST_LR_GRID}"),
            ]
            for ok, message in checks:
                if not ok:
                    raise UsageError(message + " (set allow_nonstandard_grid to override)")


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(raw: dict, spec: str) -> None:
    """Apply one KEY=VALUE override with a dotted key path."""
    if "=" not in spec:
        raise UsageError(f"override {spec!r} must look like KEY=VALUE")
    key, _, value = spec.partition("=")
    parts = key.strip().split(".")
    node = raw
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            node[part] = {}
        node = node[part]
    node[parts[-1]] = _parse_value(value.strip())


def load_config(path, seed: Optional[int] = None, out_dir: Optional[str] = None,
                overrides=()) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    try:
        user = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(user, dict):
        raise UsageError(f"config {path} must contain a JSON object")
    raw = _deep_merge(_DEFAULTS, user)
    if seed is not None:
        raw["seed"] = int(seed)
    if out_dir is not None:
        raw["out_dir"] = str(out_dir)
    for spec in overrides:
        apply_override(raw, spec)
    cfg = ExperimentConfig(raw=raw)
    cfg.validate()
    return cfg

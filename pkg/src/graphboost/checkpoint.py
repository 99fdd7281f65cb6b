"""JSON checkpointing of boosting state.

Parameter arrays travel as little-endian float64 bytes, base64-encoded, so
a reloaded state is bit-identical and training can resume mid-run (all
per-round randomness derives from the master seed and the round index).
Per-learner embedding tables are recomputed on load rather than stored.
"""

from __future__ import annotations

import base64
import json
from dataclasses import asdict
from pathlib import Path
from typing import Dict

import numpy as np

from .boosting import _TAG_EMBED, BoostConfig, BoostState, _derived_seed
from .encoder import EncoderConfig, WeakLearnerParams, node_embeddings
from .graphs import Graph
from .tensor import Tensor, parameter
from .training import TrainingConfig

__all__ = ["save_checkpoint", "load_checkpoint", "peek_encoder_config", "CHECKPOINT_FORMAT"]

CHECKPOINT_FORMAT = 1


def _encode_array(arr: np.ndarray) -> dict:
    data = np.ascontiguousarray(arr, dtype="<f8")
    return {"shape": list(arr.shape), "data": base64.b64encode(data.tobytes()).decode("ascii")}


def _decode_array(payload: dict) -> np.ndarray:
    raw = base64.b64decode(payload["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(payload["shape"]).copy()


def _encode_tensors(tensors: Dict[str, Tensor]) -> dict:
    return {name: _encode_array(t.values) for name, t in tensors.items()}


def _decode_tensors(payload: dict) -> Dict[str, Tensor]:
    return {name: parameter(_decode_array(arr)) for name, arr in payload.items()}


def peek_encoder_config(path) -> EncoderConfig:
    """Read just the encoder configuration from a checkpoint file."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return EncoderConfig(**payload["encoder_config"])
    except json.JSONDecodeError as exc:
        raise ValueError(f"checkpoint {path} is not valid JSON: {exc}") from None
    except (KeyError, TypeError) as exc:
        raise ValueError(f"checkpoint {path} is malformed: {exc}") from None


def save_checkpoint(state: BoostState, path) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "seed": state.seed,
        "task": state.task,
        "boost_config": asdict(state.config),
        "encoder_config": asdict(state.encoder_config),
        "training_config": asdict(state.training_config),
        "stopped": state.stopped,
        "stop_reason": state.stop_reason,
        "round_errors": list(state.round_errors),
        "mean_negative_weight": state.mean_negative_weight,
        "positive_weights": None if state.positive_weights is None
        else _encode_array(state.positive_weights),
        "node_weights": None if state.node_weights is None
        else _encode_array(state.node_weights),
        "r2_bootstrap": None if state.r2_bootstrap is None
        else [int(i) for i in state.r2_bootstrap],
        "learners": [
            {"alpha": w.alpha,
             "encoder": _encode_tensors(w.encoder),
             "decoder": _encode_tensors(w.decoder)}
            for w in state.learners
        ],
        "concat_decoder": None if state.concat_decoder is None
        else _encode_tensors(state.concat_decoder),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_checkpoint(path, graph: Graph) -> BoostState:
    """Rebuild a boosting state; embedding tables are recomputed per learner."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"checkpoint {path} is not valid JSON: {exc}") from None
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"checkpoint {path} has unsupported format {payload.get('format')!r}")
    try:
        state = BoostState(
            config=BoostConfig(**payload["boost_config"]),
            encoder_config=EncoderConfig(**payload["encoder_config"]),
            training_config=TrainingConfig(**payload["training_config"]),
            seed=payload["seed"],
            task=payload["task"],
            stopped=payload["stopped"],
            stop_reason=payload["stop_reason"],
            round_errors=list(payload["round_errors"]),
            mean_negative_weight=payload["mean_negative_weight"],
        )
        if payload["positive_weights"] is not None:
            state.positive_weights = _decode_array(payload["positive_weights"])
        if payload["node_weights"] is not None:
            state.node_weights = _decode_array(payload["node_weights"])
        if payload.get("r2_bootstrap") is not None:
            state.r2_bootstrap = np.asarray(payload["r2_bootstrap"], dtype=np.int64)
        for entry in payload["learners"]:
            state.learners.append(WeakLearnerParams(
                encoder=_decode_tensors(entry["encoder"]),
                decoder=_decode_tensors(entry["decoder"]),
                alpha=entry["alpha"],
            ))
        if payload["concat_decoder"] is not None:
            state.concat_decoder = _decode_tensors(payload["concat_decoder"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"checkpoint {path} is malformed: {exc}") from None
    for k, params in enumerate(state.learners):
        state.embeddings.append(node_embeddings(
            params, state.encoder_config, graph,
            seed=_derived_seed(state.seed, _TAG_EMBED, k)))
    return state

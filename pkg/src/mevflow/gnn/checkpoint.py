"""Portable model checkpoints (.arbinet.json).

Floats are written with ``repr`` which round-trips float64 exactly, so a
saved and reloaded model gives bit-identical outputs.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import CheckpointError, ShapeError
from .layers import GnnLayerParams, param_shapes
from .model import ArbiNetModel
from .tensor import Tensor

CHECKPOINT_VERSION = 1
CHECKPOINT_SUFFIX = ".arbinet.json"


def _matrix(t: Tensor) -> dict:
    return {"rows": t.rows, "cols": t.cols, "data": [float(v) for v in t.data.ravel()]}


def _tensor(obj: dict, where: str) -> Tensor:
    rows, cols, data = obj["rows"], obj["cols"], obj["data"]
    if len(data) != rows * cols:
        raise CheckpointError(f"{where}: {len(data)} values for a {rows}x{cols} matrix")
    return Tensor(np.array(data, dtype=np.float64).reshape(rows, cols), requires_grad=True)


def model_to_json(model: ArbiNetModel) -> dict:
    return {
        "format": "arbinet",
        "version": CHECKPOINT_VERSION,
        "scheme": model.scheme,
        "final_activation": model.final_activation,
        "layers": [
            {
                "kind": layer.kind,
                "d_in": layer.d_in,
                "d_out": layer.d_out,
                "params": {name: _matrix(t) for name, t in layer.tensors()},
            }
            for layer in model.layers
        ],
        "head": {"W": _matrix(model.head_W), "b": _matrix(model.head_b)},
        "metadata": model.metadata,
    }


def model_from_json(obj: dict) -> ArbiNetModel:
    if obj.get("format") != "arbinet":
        raise CheckpointError("not an arbinet checkpoint")
    if obj.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {obj.get('version')!r}")
    try:
        layers = []
        for i, raw in enumerate(obj["layers"]):
            expected = param_shapes(raw["kind"], raw["d_in"], raw["d_out"])
            params = {name: _tensor(raw["params"][name], f"layers.{i}.{name}") for name in expected}
            layers.append(GnnLayerParams(raw["kind"], raw["d_in"], raw["d_out"], params))
        return ArbiNetModel(
            layers,
            _tensor(obj["head"]["W"], "head.W"),
            _tensor(obj["head"]["b"], "head.b"),
            obj["scheme"],
            obj.get("final_activation", "identity"),
            obj.get("metadata", {}),
        )
    except ShapeError as exc:
        raise CheckpointError(f"shape mismatch: {exc}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint: {exc!r}") from None


def save_checkpoint(model: ArbiNetModel, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_json(model), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path: str | Path) -> ArbiNetModel:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not valid JSON ({exc})") from None
    return model_from_json(obj)

"""Versioned model files: magic, JSON header, little-endian float64 blob.

Layout::

    b"LRMD" | u32 version | u32 header length | header (UTF-8 JSON) | blob

The header lists parameter names and shapes in blob order, the model spec, the
training config, best epoch and history.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..exceptions import FormatError
from .spec import ModelSpec, TrainingConfig
from .training import TrainedModel

MAGIC = b"LRMD"
VERSION = 1


def dumps_model(model: TrainedModel) -> bytes:
    names = [n for n, _ in model.spec.param_shapes()]
    header = {
        "spec": model.spec.to_dict(),
        "config": model.config.to_dict(),
        "best_epoch": model.best_epoch,
        "pos_weight": model.pos_weight,
        "history": [list(h) for h in model.history],
        "params": [{"name": n, "shape": list(model.params[n].shape)} for n in names],
    }
    head = json.dumps(header, separators=(",", ":"), sort_keys=True).encode("utf-8")
    blob = b"".join(np.ascontiguousarray(model.params[n], dtype="<f8").tobytes() for n in names)
    return MAGIC + struct.pack("<II", VERSION, len(head)) + head + blob


def loads_model(data: bytes) -> TrainedModel:
    if data[:4] != MAGIC:
        raise FormatError("", "not a model file")
    version, n = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise FormatError("/version", f"unsupported model file version {version}")
    header = json.loads(data[12 : 12 + n].decode("utf-8"))
    offset = 12 + n
    params = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape)
        params[entry["name"]] = arr.astype(np.float64)
        offset += 8 * count
    if offset != len(data):
        raise FormatError("/params", "blob length does not match parameter shapes")
    return TrainedModel(
        spec=ModelSpec.from_dict(header["spec"]),
        params=params,
        history=[(int(e), float(l), float(m)) for e, l, m in header["history"]],
        best_epoch=header["best_epoch"],
        config=TrainingConfig(**header["config"]),
        pos_weight=header["pos_weight"],
    )


def save_model(model: TrainedModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_model(model))


def load_model(path) -> TrainedModel:
    with open(path, "rb") as fh:
        return loads_model(fh.read())

"""Save and load fitted fusion models.

A model file is an uncompressed ``.npz`` archive.  Entry ``__header__`` holds a
JSON document (format name, version and the object tree); every array in the
tree is replaced by a reference to its own archive entry, so floats are stored
bit-for-bit.  Python floats in the header go through ``repr`` and round-trip
exactly as well.
"""

from __future__ import annotations

import dataclasses
import io
import json
from enum import Enum
from pathlib import Path

import numpy as np

from . import base_learners as bl
from .errors import DataIOError, ParseError
from .fusion import FusionInput, FusionMode, FusionModel, LocalWeightSet, OptimizerConfig
from .kernels import KernelSpec
from .scorespace import NormalizerState

FORMAT = "lpfusion-model"
VERSION = 1

_TYPES = {cls.__name__: cls for cls in (
    FusionModel, LocalWeightSet, OptimizerConfig, NormalizerState, KernelSpec,
    bl.SVDDModel, bl.OCGPModel, bl.KPCAModel, bl.GMMModel)}
_ENUMS = {cls.__name__: cls for cls in (FusionMode, FusionInput, bl.LearnerKind)}


def _encode(obj, arrays):
    if isinstance(obj, np.ndarray):
        key = f"a{len(arrays)}"
        arrays[key] = obj
        return {"__array__": key}
    if isinstance(obj, Enum):
        return {"__enum__": type(obj).__name__, "value": obj.value}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        name = type(obj).__name__
        if name not in _TYPES:
            raise DataIOError(f"cannot serialise {name}")
        fields = {f.name: _encode(getattr(obj, f.name), arrays)
                  for f in dataclasses.fields(obj) if f.init}
        return {"__type__": name, "fields": fields}
    if isinstance(obj, (list, tuple)):
        return {"__seq__": type(obj).__name__, "items": [_encode(v, arrays) for v in obj]}
    if isinstance(obj, np.generic):
        return obj.item()
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    raise DataIOError(f"cannot serialise value of type {type(obj).__name__}")


def _decode(node, arrays):
    if isinstance(node, dict):
        if "__array__" in node:
            return arrays[node["__array__"]]
        if "__enum__" in node:
            return _ENUMS[node["__enum__"]](node["value"])
        if "__type__" in node:
            cls = _TYPES.get(node["__type__"])
            if cls is None:
                raise ParseError(f"unknown object type {node['__type__']!r}")
            return cls(**{k: _decode(v, arrays) for k, v in node["fields"].items()})
        if "__seq__" in node:
            items = [_decode(v, arrays) for v in node["items"]]
            return tuple(items) if node["__seq__"] == "tuple" else items
        raise ParseError(f"unrecognised node with keys {sorted(node)}")
    return node


def save_model(model: FusionModel, path) -> None:
    arrays = {}
    tree = _encode(model, arrays)
    header = json.dumps({"format": FORMAT, "version": VERSION, "model": tree}, sort_keys=True)
    payload = {"__header__": np.frombuffer(header.encode(), dtype=np.uint8)}
    payload.update(arrays)
    buf = io.BytesIO()
    np.savez(buf, **payload)
    try:
        Path(path).write_bytes(buf.getvalue())
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc


def load_model(path) -> FusionModel:
    try:
        with np.load(path, allow_pickle=False) as z:
            arrays = {k: z[k] for k in z.files}
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise ParseError(f"{path} is not a model archive: {exc}") from exc
    if "__header__" not in arrays:
        raise ParseError(f"{path} has no header entry")
    try:
        header = json.loads(arrays.pop("__header__").tobytes().decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: corrupt header: {exc}") from exc
    if header.get("format") != FORMAT:
        raise ParseError(f"{path}: not an {FORMAT} file")
    if header.get("version") != VERSION:
        raise ParseError(f"{path}: unsupported format version {header.get('version')}")
    model = _decode(header["model"], arrays)
    if not isinstance(model, FusionModel):
        raise ParseError(f"{path}: top-level object is not a fusion model")
    return model

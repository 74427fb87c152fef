"""Checkpoint serialization: one JSON file, parameters as base64 blobs.

Array bytes are little-endian IEEE-754 ("<f8" or "<f4") regardless of host
byte order, row-major element order.  Saving the same model twice yields
byte-identical files; load(save(p)) reproduces every parameter bitwise.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .data import FeatureSchema, Vocab
from .model import ModelConfig, ModelParams, param_spec

__all__ = [
    "CheckpointError",
    "CheckpointVersionError",
    "CheckpointShapeError",
    "CheckpointCorruptError",
    "Checkpoint",
    "save_checkpoint",
    "load_checkpoint",
    "FORMAT_NAME",
    "FORMAT_VERSION",
]

FORMAT_NAME = "pcgn.checkpoint"
FORMAT_VERSION = 1

_DTYPE_CODES = {"float64": "<f8", "float32": "<f4"}


class CheckpointError(ValueError):
    """Base class for unusable checkpoint files."""


class CheckpointVersionError(CheckpointError):
    """Unknown format name or unsupported version."""


class CheckpointShapeError(CheckpointError):
    """Parameter names/shapes disagree with the embedded config."""


class CheckpointCorruptError(CheckpointError):
    """File is not decodable as a checkpoint at all."""


@dataclass
class Checkpoint:
    params: ModelParams
    step: int = 0
    variant_name: str = ""
    vocab: Vocab | None = None
    schema: FeatureSchema | None = None
    extra: dict = field(default_factory=dict)

    @property
    def config(self) -> ModelConfig:
        return self.params.config


def _encode_array(arr: np.ndarray) -> dict:
    dtype = str(arr.dtype)
    if dtype not in _DTYPE_CODES:
        raise ValueError(f"unsupported parameter dtype {dtype}")
    blob = arr.astype(_DTYPE_CODES[dtype], copy=False).tobytes(order="C")
    return {
        "shape": list(arr.shape),
        "dtype": dtype,
        "data": base64.b64encode(blob).decode("ascii"),
    }


def _decode_array(obj: dict, name: str) -> np.ndarray:
    try:
        shape = tuple(int(d) for d in obj["shape"])
        dtype = obj["dtype"]
        blob = base64.b64decode(obj["data"], validate=True)
    except (KeyError, TypeError, ValueError) as err:
        raise CheckpointCorruptError(f"parameter {name!r}: {err}") from None
    if dtype not in _DTYPE_CODES:
        raise CheckpointCorruptError(f"parameter {name!r}: unsupported dtype {dtype!r}")
    try:
        arr = np.frombuffer(blob, dtype=_DTYPE_CODES[dtype])
    except ValueError as err:
        raise CheckpointCorruptError(f"parameter {name!r}: {err}") from None
    expected = int(np.prod(shape)) if shape else 1
    if arr.size != expected:
        raise CheckpointCorruptError(
            f"parameter {name!r}: payload holds {arr.size} elements, shape {shape} needs {expected}"
        )
    return np.ascontiguousarray(arr.reshape(shape).astype(dtype))


def save_checkpoint(path, checkpoint: Checkpoint) -> None:
    """Write a checkpoint; deterministic bytes for identical inputs."""
    params = checkpoint.params
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "step": int(checkpoint.step),
        "variant_name": checkpoint.variant_name,
        "model": params.config.to_dict(),
        "vocab": checkpoint.vocab.to_dict() if checkpoint.vocab is not None else None,
        "schema": checkpoint.schema.to_dict() if checkpoint.schema is not None else None,
        "extra": checkpoint.extra,
        "params": {name: _encode_array(t.array) for name, t in params.named_parameters()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path) -> Checkpoint:
    """Read and validate a checkpoint.

    Raises CheckpointCorruptError for undecodable files,
    CheckpointVersionError for foreign/newer formats, and
    CheckpointShapeError when parameters disagree with the config.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as err:
        raise CheckpointCorruptError(f"not a JSON document: {err.msg}") from None
    if not isinstance(doc, dict) or "format" not in doc:
        raise CheckpointCorruptError("missing format marker")
    if doc.get("format") != FORMAT_NAME:
        raise CheckpointVersionError(f"format {doc.get('format')!r} is not {FORMAT_NAME!r}")
    if doc.get("version") != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"version {doc.get('version')!r} unsupported; this build reads version {FORMAT_VERSION}"
        )
    try:
        config = ModelConfig.from_dict(doc["model"])
        raw_params = doc["params"]
        step = int(doc.get("step", 0))
        variant_name = str(doc.get("variant_name", ""))
        vocab_doc = doc.get("vocab")
        schema_doc = doc.get("schema")
        extra = doc.get("extra") or {}
    except (KeyError, TypeError, ValueError) as err:
        raise CheckpointCorruptError(f"bad checkpoint structure: {err}") from None

    expected = param_spec(config)
    expected_names = [n for n, _ in expected]
    if sorted(raw_params) != sorted(expected_names):
        missing = sorted(set(expected_names) - set(raw_params))
        extra_names = sorted(set(raw_params) - set(expected_names))
        raise CheckpointShapeError(f"parameter set mismatch: missing={missing} extra={extra_names}")
    tensors = {}
    for name, shape in expected:
        arr = _decode_array(raw_params[name], name)
        if arr.shape != shape:
            raise CheckpointShapeError(f"parameter {name!r} has shape {arr.shape}, config implies {shape}")
        tensors[name] = Tensor(arr)
    params = ModelParams(config, tensors)
    return Checkpoint(
        params=params,
        step=step,
        variant_name=variant_name,
        vocab=Vocab.from_dict(vocab_doc) if vocab_doc else None,
        schema=FeatureSchema.from_dict(schema_doc) if schema_doc else None,
        extra=extra,
    )

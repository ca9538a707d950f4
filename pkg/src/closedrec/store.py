"""Model persistence and structured report files.

Models are stored in a small binary container: an 8-byte magic, a
little-endian uint32 format version, a JSON metadata header, then each
dense factor as ``uint32 ndim, uint64 dims..., float64 little-endian
row-major payload``. Round trips are bit-exact.

Reports are JSON trees (metrics, axes, timings, seeds, config echo);
floats serialize with full round-trip precision, so reading a report
back reproduces every value exactly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import is_dataclass
from pathlib import Path

import numpy as np

from .evaluation import EvalReport
from .harness import Histogram, SweepResult
from .models import EaseModel, SvdAeModel

__all__ = [
    "PersistenceError",
    "save_model",
    "load_model",
    "write_report",
    "read_report",
    "MODEL_MAGIC",
    "MODEL_FORMAT_VERSION",
    "REPORT_FORMAT_VERSION",
]

MODEL_MAGIC = b"CRECMODL"
MODEL_FORMAT_VERSION = 1
REPORT_FORMAT_VERSION = 1


class PersistenceError(Exception):
    """A model file is corrupt, truncated, or from an unknown format version."""


def _pack_array(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr, dtype="<f8")
    header = struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + arr.tobytes(order="C")


def save_model(path, model) -> None:
    """Serialize a fitted model; see the module docstring for the layout."""
    if isinstance(model, SvdAeModel):
        meta = {"kind": "svd-ae", "num_users": model.num_users,
                "num_items": model.num_items, "rank": model.rank,
                "gamma": model.gamma, "seed": model.seed,
                "arrays": ["user_factors", "item_projection"]}
        arrays = [model.user_factors, model.item_projection]
    elif isinstance(model, EaseModel):
        meta = {"kind": "ease", "num_items": model.num_items,
                "lambda": model.lam, "arrays": ["item_weights"]}
        arrays = [model.item_weights]
    else:
        raise TypeError(f"cannot persist model type {type(model).__name__}")

    header = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(Path(path), "wb") as handle:
        handle.write(MODEL_MAGIC)
        handle.write(struct.pack("<I", MODEL_FORMAT_VERSION))
        handle.write(struct.pack("<I", len(header)))
        handle.write(header)
        for arr in arrays:
            handle.write(_pack_array(arr))


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise PersistenceError(f"{self.path}: truncated model file")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def array(self) -> np.ndarray:
        (ndim,) = struct.unpack("<I", self.take(4))
        if ndim > 8:
            raise PersistenceError(f"{self.path}: implausible array rank {ndim}")
        shape = struct.unpack(f"<{ndim}Q", self.take(8 * ndim))
        count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        data = self.take(8 * count)
        return np.frombuffer(data, dtype="<f8").reshape(shape).astype(np.float64)


def load_model(path):
    """Load a model saved by :func:`save_model`, validating every byte."""
    path = Path(path)
    reader = _Reader(path.read_bytes(), path)
    if reader.take(len(MODEL_MAGIC)) != MODEL_MAGIC:
        raise PersistenceError(f"{path}: not a model file (bad magic)")
    (version,) = struct.unpack("<I", reader.take(4))
    if version != MODEL_FORMAT_VERSION:
        raise PersistenceError(
            f"{path}: unsupported model format version {version} "
            f"(this build reads version {MODEL_FORMAT_VERSION})")
    (header_len,) = struct.unpack("<I", reader.take(4))
    try:
        meta = json.loads(reader.take(header_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise PersistenceError(f"{path}: corrupt metadata header ({exc})") from exc

    kind = meta.get("kind")
    arrays = [reader.array() for _ in meta.get("arrays", [])]
    if reader.pos != len(reader.blob):
        raise PersistenceError(f"{path}: trailing bytes after factor arrays")
    if kind == "svd-ae":
        if len(arrays) != 2:
            raise PersistenceError(f"{path}: expected two factor arrays, got {len(arrays)}")
        return SvdAeModel(arrays[0], arrays[1], rank=int(meta["rank"]),
                          gamma=meta.get("gamma"), seed=meta.get("seed"))
    if kind == "ease":
        if len(arrays) != 1:
            raise PersistenceError(f"{path}: expected one weight array, got {len(arrays)}")
        return EaseModel(arrays[0], float(meta["lambda"]))
    raise PersistenceError(f"{path}: unknown model kind {kind!r}")


def _jsonify(value):
    if isinstance(value, np.ndarray):
        return [_jsonify(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, dict):
        return {str(k): _jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    return value


def _tree(obj):
    if isinstance(obj, EvalReport):
        tree = {"type": "eval-report", "metrics": _jsonify(obj.metrics),
                "ks": list(obj.ks), "metadata": _jsonify(obj.metadata)}
        if obj.per_user:
            tree["per_user"] = _jsonify(obj.per_user)
        return tree
    if isinstance(obj, SweepResult):
        return {"type": "sweep", "axis": obj.axis, "label": obj.label,
                "values": _jsonify(list(obj.values)),
                "best_index": obj.best_index,
                "mse": _jsonify(list(obj.mse)),
                "timings": [{"pre_processing_seconds": t[0], "fit_seconds": t[1]}
                            for t in obj.timings],
                "reports": [_tree(r) for r in obj.reports],
                "metadata": _jsonify(obj.metadata)}
    if isinstance(obj, Histogram):
        return {"type": "histogram", **obj.as_dict()}
    if isinstance(obj, (list, tuple)):
        return {"type": "sweep-list", "sweeps": [_tree(o) for o in obj]}
    if isinstance(obj, dict):
        return _jsonify(obj)
    if is_dataclass(obj):
        raise TypeError(f"no report serialization for {type(obj).__name__}")
    raise TypeError(f"cannot serialize {type(obj).__name__} into a report")


def write_report(obj, path) -> None:
    """Write a report tree for an EvalReport, SweepResult, list, or dict."""
    document = {"format": "closedrec-report", "version": REPORT_FORMAT_VERSION,
                "payload": _tree(obj)}
    with open(Path(path), "w", encoding="utf-8") as handle:
        json.dump(document, handle, indent=2, sort_keys=True)
        handle.write("\n")


def read_report(path) -> dict:
    """Parse a report file back into its dict tree."""
    with open(Path(path), "r", encoding="utf-8") as handle:
        document = json.load(handle)
    if document.get("format") != "closedrec-report":
        raise ValueError(f"{path} is not a report file")
    return document

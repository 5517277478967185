"""Model files.

A model file is a UTF-8 JSON document::

    {
      "format": "setconv-model",
      "version": 1,
      "kind": "binary" | "one_vs_all",
      "labels": [...],                 # class labels, in head order for one_vs_all
      "metadata": {...},               # free-form, JSON-serialisable
      "heads": [
        {
          "class": <label> | null,     # one_vs_all: the label coded 1
          "majority_label": int, "minority_label": int, "seed": int,
          "dims": {"d": int, "d_out": int, "hidden": int},
          "anchor": <array>,
          "params": {"w": <array>, "w1": ..., "b1": ..., "w2": ..., "b2": ...},
          "representatives": {"majority": <array>, "minority": <array>}
        }, ...
      ]
    }

Every ``<array>`` is ``{"dtype": "<f8", "shape": [...], "data": <base64>}``:
the raw little-endian IEEE-754 float64 bytes in C order, so a save/load round
trip is bit-exact. Keys are written sorted, which makes files byte-identical
for identical models.
"""

from __future__ import annotations

import base64
import binascii
import json
from pathlib import Path

import numpy as np

from .classifier import BinaryClassifier, ClassRepresentatives, OneVsAllModel, TrainedModel
from .data import write_atomic
from .errors import DimensionError, MalformedModelError, ModelShapeError, ModelVersionError
from .layer import PARAM_NAMES, SetConvParams

FORMAT = "setconv-model"
VERSION = 1


def encode_array(a) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {
        "dtype": "<f8",
        "shape": list(a.shape),
        "data": base64.b64encode(a.tobytes()).decode("ascii"),
    }


def decode_array(obj, where: str) -> np.ndarray:
    try:
        if obj["dtype"] != "<f8":
            raise MalformedModelError(f"{where}: unsupported dtype {obj['dtype']!r}")
        shape = tuple(int(s) for s in obj["shape"])
        raw = base64.b64decode(obj["data"], validate=True)
    except (KeyError, TypeError, ValueError, binascii.Error) as exc:
        if isinstance(exc, MalformedModelError):
            raise
        raise MalformedModelError(f"{where}: bad array record ({exc})") from None
    n = int(np.prod(shape, dtype=np.int64))
    if len(raw) != 8 * n:
        raise ModelShapeError(f"{where}: {len(raw)} bytes for shape {shape}")
    a = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
    if not np.all(np.isfinite(a)):
        raise MalformedModelError(f"{where}: non-finite values")
    return a


def _head_record(head: BinaryClassifier, positive_class) -> dict:
    m = head.model
    return {
        "class": positive_class,
        "majority_label": int(m.majority_label),
        "minority_label": int(m.minority_label),
        "seed": int(m.seed),
        "dims": {"d": m.d, "d_out": m.d_out, "hidden": m.params.hidden},
        "anchor": encode_array(m.anchor),
        "params": {k: encode_array(v) for k, v in m.params.arrays().items()},
        "representatives": {
            "majority": encode_array(head.reps.majority),
            "minority": encode_array(head.reps.minority),
        },
    }


def _read_head(rec, where: str) -> BinaryClassifier:
    try:
        dims = rec["dims"]
        d, d_out, hidden = int(dims["d"]), int(dims["d_out"]), int(dims["hidden"])
        params = {k: decode_array(rec["params"][k], f"{where}.params.{k}") for k in PARAM_NAMES}
        anchor = decode_array(rec["anchor"], f"{where}.anchor")
        reps = {k: decode_array(rec["representatives"][k], f"{where}.representatives.{k}")
                for k in ("majority", "minority")}
        maj, mino, seed = int(rec["majority_label"]), int(rec["minority_label"]), int(rec["seed"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (MalformedModelError, ModelShapeError)):
            raise
        raise MalformedModelError(f"{where}: missing or invalid field ({exc})") from None

    expected = {"w": (d, d_out), "w1": (d, hidden), "b1": (hidden,),
                "w2": (hidden, d_out), "b2": (d_out,)}
    for k, shape in expected.items():
        if params[k].shape != shape:
            raise ModelShapeError(f"{where}.params.{k}: shape {params[k].shape}, expected {shape}")
    if anchor.shape != (d,):
        raise ModelShapeError(f"{where}.anchor: shape {anchor.shape}, expected {(d,)}")
    for k, v in reps.items():
        if v.shape != (d_out,):
            raise ModelShapeError(f"{where}.representatives.{k}: shape {v.shape}, expected {(d_out,)}")
    try:
        sp = SetConvParams(**params)
    except DimensionError as exc:
        raise ModelShapeError(f"{where}: {exc}") from None
    model = TrainedModel(sp, anchor, maj, mino, seed=seed)
    return BinaryClassifier(model, ClassRepresentatives(reps["majority"], reps["minority"]))


def model_to_json(obj: BinaryClassifier | OneVsAllModel) -> str:
    if isinstance(obj, BinaryClassifier):
        doc = {
            "kind": "binary",
            "labels": list(obj.model.labels),
            "metadata": obj.metadata,
            "heads": [_head_record(obj, None)],
        }
    elif isinstance(obj, OneVsAllModel):
        doc = {
            "kind": "one_vs_all",
            "labels": list(obj.labels),
            "metadata": obj.metadata,
            "heads": [_head_record(h, int(c)) for c, h in zip(obj.labels, obj.heads)],
        }
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")
    doc.update(format=FORMAT, version=VERSION)
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def model_from_json(text: str) -> BinaryClassifier | OneVsAllModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedModelError(f"not a valid model document: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise MalformedModelError("not a setconv model file")
    if doc.get("version") != VERSION:
        raise ModelVersionError(f"model file version {doc.get('version')!r}, this library reads {VERSION}")
    try:
        kind, heads, labels = doc["kind"], doc["heads"], [int(c) for c in doc["labels"]]
        metadata = doc.get("metadata") or {}
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedModelError(f"missing or invalid top-level field ({exc})") from None
    if not isinstance(heads, list) or not heads:
        raise MalformedModelError("model has no heads")
    parsed = [_read_head(h, f"heads[{i}]") for i, h in enumerate(heads)]
    d = {h.model.d for h in parsed}
    if len(d) != 1:
        raise ModelShapeError(f"heads disagree on input dimension: {sorted(d)}")

    if kind == "binary":
        if len(parsed) != 1:
            raise MalformedModelError("binary model must have exactly one head")
        parsed[0].metadata = metadata
        return parsed[0]
    if kind == "one_vs_all":
        if len(parsed) != len(labels):
            raise MalformedModelError(f"{len(parsed)} heads for {len(labels)} labels")
        try:
            return OneVsAllModel(tuple(labels), parsed, metadata)
        except ValueError as exc:
            raise MalformedModelError(str(exc)) from None
    raise MalformedModelError(f"unknown model kind {kind!r}")


def save_model(obj: BinaryClassifier | OneVsAllModel, path) -> None:
    write_atomic(path, model_to_json(obj))


def load_model(path) -> BinaryClassifier | OneVsAllModel:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise
    except UnicodeDecodeError as exc:
        raise MalformedModelError(f"{path}: not UTF-8 ({exc})") from None
    return model_from_json(text)

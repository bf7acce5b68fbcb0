"""JSON model container shared by both backends.

Layout::

    {"format": ..., "backend": "neural" | "exhaustive", "vocab": [...],
     "hyperparameters": {...}, "seed": int, "meta": {...},
     "tensors": {name: {"shape": [...], "dtype": "<f8", "data": base64}}   # neural
     "table": [{"x": [...], "xp": [...], "y": [[tokens, count], ...]}]}  # exhaustive

Tensors are row-major little-endian float64. Keys are written sorted so equal
models serialize to identical bytes.
"""

from __future__ import annotations

import base64
import dataclasses
import json
import os
from typing import Any

import numpy as np

from fragfix.models.exhaustive import ExhaustiveModel
from fragfix.models.neural import NeuralConfig, NeuralModel
from fragfix.tokenizer import Vocabulary

FORMAT = "fragfix-model/1"


def _encode_tensor(arr: np.ndarray) -> dict:
    data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    return {"shape": list(arr.shape), "dtype": "<f8", "data": base64.b64encode(data).decode()}


def _decode_tensor(rec: dict) -> np.ndarray:
    raw = base64.b64decode(rec["data"])
    return np.frombuffer(raw, dtype=rec["dtype"]).reshape(rec["shape"]).astype(np.float64)


def dumps(model: NeuralModel | ExhaustiveModel, meta: dict | None = None, seed: int = 0) -> str:
    doc: dict[str, Any] = {"format": FORMAT, "meta": meta or {}}
    if isinstance(model, NeuralModel):
        doc.update(
            backend="neural",
            vocab=model.vocab.tokens,
            hyperparameters=dataclasses.asdict(model.config) | {"max_len": model.max_len},
            seed=model.seed,
            tensors={k: _encode_tensor(v) for k, v in model.params.items()},
        )
    elif isinstance(model, ExhaustiveModel):
        doc.update(
            backend="exhaustive",
            vocab=[],
            hyperparameters={},
            seed=seed,
            table=model.records(),
        )
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def loads(text: str, mode: str = "exact") -> tuple[NeuralModel | ExhaustiveModel, dict]:
    doc = json.loads(text)
    if doc.get("format") != FORMAT:
        raise ValueError(f"unrecognized model format {doc.get('format')!r}")
    if doc["backend"] == "neural":
        hyper = dict(doc["hyperparameters"])
        max_len = hyper.pop("max_len", 32)
        model = NeuralModel(
            Vocabulary(doc["vocab"]),
            NeuralConfig.from_json(hyper),
            {k: _decode_tensor(v) for k, v in doc["tensors"].items()},
            doc["seed"],
            max_len,
        )
    elif doc["backend"] == "exhaustive":
        model = ExhaustiveModel.from_records(doc["table"], mode)
    else:
        raise ValueError(f"unknown backend {doc['backend']!r}")
    return model, doc["meta"]


def save(path: str | os.PathLike, model, meta: dict | None = None, seed: int = 0):
    with open(path, "w") as fh:
        fh.write(dumps(model, meta, seed))


def load(path: str | os.PathLike, mode: str = "exact"):
    with open(path) as fh:
        return loads(fh.read(), mode)

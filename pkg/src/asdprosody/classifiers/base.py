"""Shared model container, input checks and (de)serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import FormatError, SchemaError

MODEL_FORMAT = "asdprosody-model"
MODEL_VERSION = 1


@dataclass
class TrainedModel:
    """A fitted binary classifier.

    ``classes`` is sorted, and ``classes[0]`` is the positive class whose
    probability, margin or vote fraction is reported as the score.
    """

    kind: str
    feature_names: tuple
    classes: tuple
    params: dict
    seed: int = 0
    hyper: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @property
    def positive(self) -> str:
        return self.classes[0]

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": self.kind,
            "feature_names": list(self.feature_names),
            "classes": list(self.classes),
            "seed": int(self.seed),
            "hyper": _plain(self.hyper),
            "params": _plain(self.params),
            "info": _plain(self.info),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        if d.get("format") != MODEL_FORMAT:
            raise FormatError("not a model file")
        if d.get("version") != MODEL_VERSION:
            raise FormatError(f"unsupported model version {d.get('version')}")
        return cls(d["kind"], tuple(d["feature_names"]), tuple(d["classes"]), d["params"],
                   int(d["seed"]), d.get("hyper", {}), d.get("info", {}))


def _plain(obj):
    """Convert numpy containers to JSON-native values (floats keep full precision)."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def save_model(model: TrainedModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1, sort_keys=True) + "\n")


def load_model(path) -> TrainedModel:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return TrainedModel.from_dict(d)


def check_training(X, labels):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(labels):
        raise ValueError("X must be 2-D with one row per label")
    if not np.all(np.isfinite(X)):
        raise ValueError("training features must be finite")
    classes = tuple(sorted(set(labels)))
    if len(classes) != 2:
        raise ValueError(f"binary training needs exactly two classes, got {list(classes)}")
    y = np.where(np.asarray(labels) == classes[0], 1.0, -1.0)
    for c in classes:
        if list(labels).count(c) < 2:
            raise ValueError(f"class {c!r} needs at least two rows")
    return X, y, classes


def project(model: TrainedModel, x, names=None) -> np.ndarray:
    """Rows of ``x`` restricted to the model's features, in the model's order."""
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if names is None:
        if X.shape[1] != len(model.feature_names):
            raise SchemaError(f"expected {len(model.feature_names)} features, got {X.shape[1]}")
    else:
        names = tuple(names)
        if names != tuple(model.feature_names):
            missing = [n for n in model.feature_names if n not in names]
            if missing:
                raise SchemaError(f"input lacks model feature(s) {missing}")
            X = X[:, [names.index(n) for n in model.feature_names]]
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    return X

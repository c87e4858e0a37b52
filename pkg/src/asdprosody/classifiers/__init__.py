"""Binary classifiers: naive Bayes, logistic regression, SVM and random forest."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .base import TrainedModel, check_training, load_model, project, save_model
from .lr import fit_lr, score_lr
from .nb import fit_nb, score_nb
from .rf import fit_rf, score_rf
from .svm import fit_svm, kkt_residuals, score_svm

KINDS = ("nb", "lr", "svm", "rf")
# score above (or at) this value predicts the positive class
THRESHOLDS = {"nb": 0.5, "lr": 0.5, "svm": 0.0, "rf": 0.5}
DEFAULT_HYPER = {
    "nb": {"var_floor": 1e-9},
    "lr": {"C": 1.0, "tol": 1e-6, "max_iter": 10000},
    "svm": {"C": 1.0, "kernel": "linear", "tol": 1e-3, "max_iter": 100000},
    "rf": {"n_trees": 100, "min_leaf": 1},
}
_SCORERS = {"nb": score_nb, "lr": score_lr, "svm": score_svm, "rf": score_rf}

__all__ = ["KINDS", "DEFAULT_HYPER", "TrainedModel", "fit", "predict", "predict_batch",
           "decision_scores", "save_model", "load_model", "kkt_residuals"]


def parse_kinds(text: str) -> list:
    kinds = [k.strip().lower() for k in text.split(",") if k.strip()]
    bad = [k for k in kinds if k not in KINDS]
    if bad or not kinds:
        raise ValueError(f"unknown classifier(s) {bad or text!r}; choose from {','.join(KINDS)}")
    return kinds


def fit(kind: str, train, hyper: Optional[dict] = None, seed: int = 0, jobs: int = 1) -> TrainedModel:
    """Fit one classifier on a LabeledDataset (features already selected and scaled)."""
    kind = kind.lower()
    if kind not in KINDS:
        raise ValueError(f"unknown classifier {kind!r}")
    h = dict(DEFAULT_HYPER[kind])
    h.update(hyper or {})
    X, y, classes = check_training(train.X, train.labels)
    if kind == "rf":
        params = fit_rf(X, y, h, seed=seed, jobs=jobs)
    else:
        params = {"nb": fit_nb, "lr": fit_lr, "svm": fit_svm}[kind](X, y, h)
    return TrainedModel(kind, tuple(train.feature_names), classes, params, int(seed), h)


def decision_scores(model: TrainedModel, X, names=None) -> np.ndarray:
    X = project(model, X, names)
    return np.asarray(_SCORERS[model.kind](model.params, X), dtype=np.float64)


def labels_from_scores(model: TrainedModel, scores) -> list:
    thr = THRESHOLDS[model.kind]
    return [model.classes[0] if s >= thr else model.classes[1] for s in scores]


def predict_batch(model: TrainedModel, X, names=None):
    """Labels and scores for every row; ties go to the positive (first) class."""
    s = decision_scores(model, X, names)
    return labels_from_scores(model, s), s


def predict(model: TrainedModel, x, names=None):
    """(label, score) for one feature vector.

    ``x`` may be a FeatureVector, whose names are used to project onto the
    model's features, or a plain sequence already in the model's order.
    """
    if names is None and hasattr(x, "names") and hasattr(x, "values"):
        names, x = x.names, x.values
    labels, s = predict_batch(model, np.asarray(x, dtype=np.float64).reshape(1, -1), names)
    return labels[0], float(s[0])

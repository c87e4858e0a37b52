"""Stratified cross-validation with per-fold feature selection, metrics and reports."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Optional, Sequence

import numpy as np

from . import classifiers
from .features import LabeledDataset
from .stats import DEFAULT_SELECT, minmax_fit, rank_features, t_ppf

NORMALIZE_MODES = ("global", "fold", "none")
LEAKAGE_NOTE = ("min-max ranges were fitted on the whole dataset before splitting, "
                "so held-out rows influenced the scaling; use --strict-folds to refit per fold")


# ---------------------------------------------------------------- folds

@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: tuple  # fold index per row
    seed: int

    def test_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.assignments) == fold)

    def train_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.assignments) != fold)

    def sizes(self) -> list:
        a = np.asarray(self.assignments)
        return [int(np.sum(a == f)) for f in range(self.k)]


def make_folds(ds: LabeledDataset, k: int = 5, seed: int = 0) -> FoldPlan:
    """Stratified assignment: shuffle each class, lay classes end to end, deal rows round-robin."""
    n = len(ds)
    if k < 2:
        raise ValueError("k must be at least 2")
    if n < k:
        raise ValueError(f"cannot make {k} folds from {n} rows")
    counts = ds.class_counts()
    if k < n:
        small = {c: m for c, m in counts.items() if m < k}
        if small:
            raise ValueError(f"class(es) smaller than k={k}: {small}")
    rng = np.random.default_rng(seed)
    labels = np.asarray(ds.labels)
    order = []
    for c in sorted(counts):
        idx = np.flatnonzero(labels == c)
        order.extend(idx[rng.permutation(idx.size)])
    assign = np.empty(n, dtype=int)
    assign[np.asarray(order, dtype=int)] = np.arange(n) % k
    return FoldPlan(k, tuple(int(a) for a in assign), int(seed))


# ---------------------------------------------------------------- metrics

@dataclass(frozen=True)
class Confusion:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other):
        return Confusion(self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn)

    def flipped(self) -> "Confusion":
        """The same counts seen with the other class as positive."""
        return Confusion(self.tn, self.tp, self.fn, self.fp)


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f_measure: float
    flags: tuple = ()

    def as_dict(self) -> dict:
        return {"accuracy": self.accuracy, "precision": self.precision,
                "recall": self.recall, "f_measure": self.f_measure, "flags": list(self.flags)}


def confusion_from(true: Sequence[str], pred: Sequence[str], positive: str) -> Confusion:
    t = np.asarray(true) == positive
    p = np.asarray(pred) == positive
    return Confusion(int(np.sum(t & p)), int(np.sum(~t & ~p)), int(np.sum(~t & p)), int(np.sum(t & ~p)))


def compute_metrics(tp: int, tn: int, fp: int, fn: int) -> Metrics:
    """Accuracy, precision, recall and their harmonic mean.

    A zero denominator yields 0 and a flag naming the affected metric.
    """
    for v in (tp, tn, fp, fn):
        if v < 0:
            raise ValueError("confusion counts must be non-negative")
    total = tp + tn + fp + fn
    if total == 0:
        raise ValueError("confusion matrix is empty")
    flags = []
    accuracy = (tp + tn) / total
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision = 0.0
        flags.append("precision_undefined")
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        recall = 0.0
        flags.append("recall_undefined")
    if precision + recall > 0:
        f = 2.0 * precision * recall / (precision + recall)
    else:
        f = 0.0
        flags.append("f_measure_undefined")
    return Metrics(accuracy, precision, recall, f, tuple(flags))


def metrics_of(c: Confusion) -> Metrics:
    return compute_metrics(c.tp, c.tn, c.fp, c.fn)


def macro_metrics(c: Confusion) -> Metrics:
    """Average of the per-class metrics obtained with each class taken as positive."""
    a = metrics_of(c)
    b = metrics_of(c.flipped())
    return Metrics(a.accuracy, 0.5 * (a.precision + b.precision), 0.5 * (a.recall + b.recall),
                   0.5 * (a.f_measure + b.f_measure), tuple(sorted(set(a.flags) | set(b.flags))))


def confidence_interval(fold_accuracies: Sequence[float], level: float = 0.95):
    """Student-t interval of the mean fold accuracy, clipped to [0, 1]."""
    a = np.asarray(fold_accuracies, dtype=np.float64)
    k = a.size
    if k < 2:
        raise ValueError("need at least two folds for an interval")
    point = float(a.mean())
    half = t_ppf(0.5 + level / 2.0, k - 1) * float(a.std(ddof=1)) / math.sqrt(k)
    return max(0.0, point - half), point, min(1.0, point + half)


def binomial_interval(correct: int, n: int, level: float = 0.95):
    """Normal-approximation interval of a pooled proportion, clipped to [0, 1]."""
    if n <= 0:
        raise ValueError("n must be positive")
    z = NormalDist().inv_cdf(0.5 + level / 2.0)
    p = correct / n
    half = z * math.sqrt(p * (1.0 - p) / n)
    return max(0.0, p - half), p, min(1.0, p + half)


# ---------------------------------------------------------------- cross-validation

@dataclass
class FoldResult:
    fold: int
    test_ids: list
    selected: list
    confusion: dict      # kind -> Confusion
    predictions: dict    # kind -> list of labels
    scores: dict         # kind -> list of scores
    models: dict = field(default_factory=dict, repr=False)


@dataclass
class ClassifierSummary:
    kind: str
    fold_accuracy: list
    ci: tuple
    binomial_ci: tuple
    macro: Metrics
    micro: Metrics
    per_class: dict      # label -> Metrics with that label positive
    confusion: Confusion


@dataclass
class EvaluationReport:
    classes: tuple
    k: int
    select_k: int
    seed: int
    normalize: str
    fold_sizes: list
    folds: list
    summaries: dict
    hyper: dict
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        pos = self.classes[0]
        out = {
            "classes": list(self.classes),
            "positive_class": pos,
            "folds": self.k,
            "select": self.select_k,
            "seed": self.seed,
            "normalize": self.normalize,
            "fold_sizes": self.fold_sizes,
            "hyperparameters": self.hyper,
            "notes": self.notes,
            "selected_features": [f.selected for f in self.folds],
            "classifiers": {},
        }
        for kind, s in self.summaries.items():
            out["classifiers"][kind] = {
                "fold_accuracy": s.fold_accuracy,
                "ci_t": {"lower": s.ci[0], "mean": s.ci[1], "upper": s.ci[2]},
                "ci_binomial": {"lower": s.binomial_ci[0], "mean": s.binomial_ci[1],
                                "upper": s.binomial_ci[2]},
                "macro": s.macro.as_dict(),
                "micro": s.micro.as_dict(),
                "per_class": {c: m.as_dict() for c, m in s.per_class.items()},
                "confusion": {"TP": s.confusion.tp, "TN": s.confusion.tn,
                              "FP": s.confusion.fp, "FN": s.confusion.fn},
            }
        return out


def _fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(fold)]).generate_state(1)[0])


def run_fold(ds: LabeledDataset, plan: FoldPlan, fold: int, kinds: Sequence[str], select_k: int,
             seed: int, normalize: str, hyper: Optional[dict] = None, test: str = "welch",
             keep_models: bool = False) -> FoldResult:
    """Rank on the training rows, keep the top features, fit and score every classifier."""
    train = ds.rows(plan.train_index(fold))
    held = ds.rows(plan.test_index(fold))
    if normalize == "fold":
        params = minmax_fit(train)
        train, held = params.apply(train), params.apply(held)
    ranking = rank_features(train, select_k, test)
    selected = ranking.selected
    train = train.columns(selected)
    held = held.columns(selected)
    conf, preds, scores, models = {}, {}, {}, {}
    positive = ds.classes[0]
    for kind in kinds:
        try:
            model = classifiers.fit(kind, train, (hyper or {}).get(kind), seed=_fold_seed(seed, fold))
        except ValueError as exc:
            raise ValueError(f"fold {fold}, classifier {kind}: {exc}") from exc
        labels, s = classifiers.predict_batch(model, held.X)
        conf[kind] = confusion_from(held.labels, labels, positive)
        preds[kind] = labels
        scores[kind] = [float(v) for v in s]
        if keep_models:
            models[kind] = model
    return FoldResult(fold, list(held.ids), selected, conf, preds, scores, models)


def cross_validate(ds: LabeledDataset, kinds: Sequence[str] = classifiers.KINDS, k: int = 5,
                   select_k: int = DEFAULT_SELECT, seed: int = 0, normalize: str = "global",
                   hyper: Optional[dict] = None, jobs: int = 1, test: str = "welch",
                   keep_models: bool = False) -> EvaluationReport:
    """k-fold evaluation; ``normalize`` is "global" (scale once before splitting),
    "fold" (fit scaling on each training split) or "none" (input already scaled)."""
    if normalize not in NORMALIZE_MODES:
        raise ValueError(f"normalize must be one of {NORMALIZE_MODES}")
    kinds = list(kinds)
    for kind in kinds:
        if kind not in classifiers.KINDS:
            raise ValueError(f"unknown classifier {kind!r}")
    classes = tuple(ds.classes)
    if len(classes) != 2:
        raise ValueError(f"need exactly two classes, got {list(classes)}")
    notes = []
    work = ds
    if normalize == "global":
        work = minmax_fit(ds).apply(ds)
        notes.append(LEAKAGE_NOTE)
    plan = make_folds(work, k, seed)

    def task(f):
        return run_fold(work, plan, f, kinds, select_k, seed, normalize, hyper, test, keep_models)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            folds = list(pool.map(task, range(k)))
    else:
        folds = [task(f) for f in range(k)]

    summaries = {}
    for kind in kinds:
        confs = [fr.confusion[kind] for fr in folds]
        accs = [metrics_of(c).accuracy for c in confs]
        per_fold = [macro_metrics(c) for c in confs]
        macro = Metrics(float(np.mean([m.accuracy for m in per_fold])),
                        float(np.mean([m.precision for m in per_fold])),
                        float(np.mean([m.recall for m in per_fold])),
                        float(np.mean([m.f_measure for m in per_fold])),
                        tuple(sorted({fl for m in per_fold for fl in m.flags})))
        pooled = confs[0]
        for c in confs[1:]:
            pooled = pooled + c
        per_class = {classes[0]: metrics_of(pooled), classes[1]: metrics_of(pooled.flipped())}
        summaries[kind] = ClassifierSummary(
            kind, accs, confidence_interval(accs),
            binomial_interval(pooled.tp + pooled.tn, pooled.n),
            macro, metrics_of(pooled), per_class, pooled)
    used = {kind: dict(classifiers.DEFAULT_HYPER[kind], **((hyper or {}).get(kind) or {})) for kind in kinds}
    return EvaluationReport(classes, k, select_k, int(seed), normalize, plan.sizes(), folds,
                            summaries, used, notes)


# ---------------------------------------------------------------- report output

def format_report(rep: EvaluationReport) -> str:
    buf = io.StringIO()
    w = buf.write
    w(f"{rep.k}-fold stratified cross-validation, top {rep.select_k} features per fold, "
      f"seed {rep.seed}, scaling: {rep.normalize}\n")
    w(f"fold sizes: {rep.fold_sizes}\n")
    for note in rep.notes:
        w(f"note: {note}\n")
    w("\nConfidence intervals of the mean fold accuracy (95%, Student t)\n")
    w(f"{'Classifier':<10} {'Lower limit':>12} {'Estimated average accuracy':>27} {'Upper limit':>12}\n")
    for kind, s in rep.summaries.items():
        w(f"{kind.upper():<10} {s.ci[0]:>12.4f} {s.ci[1]:>27.4f} {s.ci[2]:>12.4f}\n")
    w("\nPer-class metrics (pooled over folds)\n")
    w(f"{'Classifier':<10} {'Class':<6} {'F-measure':>10} {'Precision':>10} {'Recall':>10}\n")
    for kind, s in rep.summaries.items():
        for c, m in s.per_class.items():
            w(f"{kind.upper():<10} {c:<6} {m.f_measure:>10.4f} {m.precision:>10.4f} {m.recall:>10.4f}\n")
    w("\nAveraged metrics\n")
    w(f"{'Classifier':<10} {'Average':<6} {'Accuracy':>10} {'Precision':>10} {'Recall':>10} {'F-measure':>10}\n")
    for kind, s in rep.summaries.items():
        for name, m in (("macro", s.macro), ("micro", s.micro)):
            w(f"{kind.upper():<10} {name:<6} {m.accuracy:>10.4f} {m.precision:>10.4f} "
              f"{m.recall:>10.4f} {m.f_measure:>10.4f}\n")
    w(f"\nConfusion counts ({rep.classes[0]} positive)\n")
    for kind, s in rep.summaries.items():
        c = s.confusion
        w(f"{kind.upper():<10} TP={c.tp} TN={c.tn} FP={c.fp} FN={c.fn}\n")
    w("\nSelected features per fold\n")
    for f in rep.folds:
        w(f"fold {f.fold}: {', '.join(f.selected)}\n")
    w("\nHyperparameters\n")
    for kind, h in rep.hyper.items():
        w(f"{kind.upper():<10} " + ", ".join(f"{k}={v}" for k, v in sorted(h.items())) + "\n")
    return buf.getvalue()


def plot_rows(rep: EvaluationReport) -> str:
    """Per-classifier metric summary as CSV text, one row per classifier."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["classifier", "accuracy", "precision", "recall", "f_measure", "ci_lower", "ci_upper"])
    for kind, s in rep.summaries.items():
        m = s.macro
        wr.writerow([kind] + [format(v, ".12g") for v in
                              (m.accuracy, m.precision, m.recall, m.f_measure, s.ci[0], s.ci[2])])
    return buf.getvalue()

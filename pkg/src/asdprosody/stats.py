"""Min-max scaling, two-sample t-tests and t-score feature ranking."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .features import LabeledDataset

ALPHA = 0.05
DEFAULT_SELECT = 8


# ---------------------------------------------------------------- scaling

@dataclass(frozen=True, eq=False)
class NormalizationParams:
    feature_names: tuple
    minimum: np.ndarray
    maximum: np.ndarray

    def apply(self, ds: LabeledDataset) -> LabeledDataset:
        """Map each column to [-1, 1] with the stored range; constant columns become 0.

        New data may fall outside [-1, 1].
        """
        if tuple(ds.feature_names) != tuple(self.feature_names):
            idx = [ds.feature_names.index(n) for n in self.feature_names]
            X = ds.X[:, idx]
        else:
            X = ds.X
        span = self.maximum - self.minimum
        safe = np.where(span > 0, span, 1.0)
        out = 2.0 * (X - self.minimum) / safe - 1.0
        out[:, span <= 0] = 0.0
        return LabeledDataset(out, ds.labels, ds.ids, self.feature_names)

    def to_dict(self) -> dict:
        return {"feature_names": list(self.feature_names),
                "min": [float(v) for v in self.minimum],
                "max": [float(v) for v in self.maximum]}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationParams":
        return cls(tuple(d["feature_names"]), np.array(d["min"], dtype=float),
                   np.array(d["max"], dtype=float))


def minmax_fit(ds: LabeledDataset) -> NormalizationParams:
    if len(ds) < 2:
        raise ValueError("min-max scaling needs at least two rows")
    return NormalizationParams(tuple(ds.feature_names), ds.X.min(axis=0), ds.X.max(axis=0))


def minmax_fit_apply(ds: LabeledDataset):
    params = minmax_fit(ds)
    return params.apply(ds), params


# ---------------------------------------------------------------- t distribution

def _betacf(a: float, b: float, x: float, eps: float = 1e-15, max_iter: int = 1000) -> float:
    """Continued fraction of the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float, y: Optional[float] = None) -> float:
    """Regularized incomplete beta I_x(a, b).

    ``y`` may carry 1 - x computed without cancellation.
    """
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    if y is None:
        y = 1.0 - x
    if x <= 0.0:
        return 0.0
    if y <= 0.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log(y))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, y) / b


def t_sf2(t: float, df: float) -> float:
    """Two-sided tail probability P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    return float(betainc(df / 2.0, 0.5, df / (df + t * t), t * t / (df + t * t)))


def t_cdf(t: float, df: float) -> float:
    tail = 0.5 * t_sf2(t, df)
    return 1.0 - tail if t >= 0 else tail


def t_ppf(q: float, df: float) -> float:
    """Quantile of Student's t by bisection on the CDF."""
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    if q == 0.5:
        return 0.0
    lo, hi = -1.0, 1.0
    while t_cdf(lo, df) > q:
        lo *= 2.0
    while t_cdf(hi, df) < q:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if t_cdf(mid, df) < q:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13 * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------- t-tests

@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: float


def _check_sample(x, name):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size < 2:
        raise ValueError(f"sample {name} needs at least two values")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"sample {name} contains non-finite values")
    return x


def welch_t_test(a, b) -> TTestResult:
    """Unequal-variance two-sample t-test with Welch-Satterthwaite df, two-sided p."""
    a = _check_sample(a, "a")
    b = _check_sample(b, "b")
    na, nb = a.size, b.size
    va, vb = a.var(ddof=1) / na, b.var(ddof=1) / nb
    diff = a.mean() - b.mean()
    se2 = va + vb
    if se2 == 0.0:
        df = float(na + nb - 2)
        if diff == 0.0:
            return TTestResult(0.0, 1.0, df)
        return TTestResult(math.copysign(math.inf, diff), 0.0, df)
    t = diff / math.sqrt(se2)
    # scale-free form: squaring tiny variances would underflow to 0 / 0
    ra, rb = va / max(va, vb), vb / max(va, vb)
    df = (ra + rb) ** 2 / (ra ** 2 / (na - 1) + rb ** 2 / (nb - 1))
    return TTestResult(float(t), t_sf2(t, df), float(df))


def pooled_t_test(a, b) -> TTestResult:
    """Equal-variance (Student) two-sample t-test."""
    a = _check_sample(a, "a")
    b = _check_sample(b, "b")
    na, nb = a.size, b.size
    df = na + nb - 2
    sp2 = ((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / df
    diff = a.mean() - b.mean()
    se2 = sp2 * (1.0 / na + 1.0 / nb)
    if se2 == 0.0:
        if diff == 0.0:
            return TTestResult(0.0, 1.0, float(df))
        return TTestResult(math.copysign(math.inf, diff), 0.0, float(df))
    t = diff / math.sqrt(se2)
    return TTestResult(float(t), t_sf2(t, df), float(df))


TESTS = {"welch": welch_t_test, "pooled": pooled_t_test}


# ---------------------------------------------------------------- ranking

@dataclass
class RankResult:
    feature_names: tuple
    t: np.ndarray
    p: np.ndarray
    order: np.ndarray  # column indices, best first
    k: int

    @property
    def ranked_names(self) -> list:
        return [self.feature_names[i] for i in self.order]

    @property
    def selected(self) -> list:
        return self.ranked_names[: self.k]


def _two_classes(ds: LabeledDataset):
    classes = ds.classes
    if len(classes) != 2:
        raise ValueError(f"need exactly two classes, got {classes}")
    labels = np.asarray(ds.labels)
    return classes, ds.X[labels == classes[0]], ds.X[labels == classes[1]]


def rank_features(train: LabeledDataset, k: int = DEFAULT_SELECT, test: str = "welch") -> RankResult:
    """Sort columns by |t| between the two classes; ties keep column order."""
    if not 1 <= k <= len(train.feature_names):
        raise ValueError(f"k must lie in [1, {len(train.feature_names)}]")
    _, xa, xb = _two_classes(train)
    fn = TESTS[test]
    res = [fn(xa[:, j], xb[:, j]) for j in range(train.X.shape[1])]
    t = np.array([r.t for r in res])
    p = np.array([r.p for r in res])
    score = np.abs(t)
    # stable sort on -score keeps the canonical order for ties
    order = np.argsort(-score, kind="stable")
    return RankResult(tuple(train.feature_names), t, p, order, k)


@dataclass(frozen=True)
class ClassStatRow:
    feature: str
    mean_a: float
    mean_b: float
    t: float
    p: float
    decision: str


def class_statistics(ds: LabeledDataset, alpha: float = ALPHA, test: str = "welch") -> list:
    """Per-feature class means, p-value and decision ("Accepted" iff p < alpha)."""
    _, xa, xb = _two_classes(ds)
    fn = TESTS[test]
    rows = []
    for j, name in enumerate(ds.feature_names):
        r = fn(xa[:, j], xb[:, j])
        rows.append(ClassStatRow(name, float(xa[:, j].mean()), float(xb[:, j].mean()),
                                 r.t, r.p, "Accepted" if r.p < alpha else "Rejected"))
    return rows


def format_class_statistics(rows: Sequence[ClassStatRow], classes: Sequence[str]) -> str:
    a, b = classes
    head = f"{'feature':<12} {a + ' mean':>14} {b + ' mean':>14} {'t':>10} {'p':>12}  decision"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r.feature:<12} {r.mean_a:>14.6g} {r.mean_b:>14.6g} {r.t:>10.4g} "
                     f"{r.p:>12.4g}  {r.decision}")
    return "\n".join(lines) + "\n"

"""Class-specific evaluation metrics.

All ratio metrics are total: when a denominator is zero the value is 0.0 and
the metric name is recorded in :attr:`MetricsReport.degenerate` instead of
returning NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, EmptyInputError, UndefinedMetricError


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts for one class ``c`` evaluated against the rest."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(labels, predictions, positive_class) -> ConfusionMatrix:
    y = np.asarray(labels)
    p = np.asarray(predictions)
    if y.shape != p.shape or y.ndim != 1:
        raise DimensionError(f"labels {y.shape} and predictions {p.shape} differ")
    if y.size == 0:
        raise EmptyInputError("no samples to evaluate")
    pos = y == positive_class
    hit = p == positive_class
    return ConfusionMatrix(
        tp=int(np.sum(pos & hit)),
        fp=int(np.sum(~pos & hit)),
        fn=int(np.sum(pos & ~hit)),
        tn=int(np.sum(~pos & ~hit)),
    )


def _ratio(num: float, den: float) -> tuple[float, bool]:
    if den == 0:
        return 0.0, True
    return num / den, False


def specificity(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tn, cm.tn + cm.fp)[0]


def sensitivity(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp, cm.tp + cm.fn)[0]


recall = sensitivity


def precision(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp, cm.tp + cm.fp)[0]


def f1(cm: ConfusionMatrix) -> float:
    p, r = precision(cm), recall(cm)
    return _ratio(2.0 * p * r, p + r)[0]


def g_mean(cm: ConfusionMatrix) -> float:
    return math.sqrt(specificity(cm) * sensitivity(cm))


def auc(labels, scores, positive_class=1) -> float:
    """Area under the ROC curve as the Mann-Whitney statistic.

    Equals ``(#(pos > neg) + 0.5 * #(pos == neg)) / (n_pos * n_neg)`` over all
    positive/negative pairs, computed from mid-ranks in O(n log n).
    """
    y = np.asarray(labels)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 1:
        raise DimensionError(f"labels {y.shape} and scores {s.shape} differ")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    pos = y == positive_class
    n_pos = int(pos.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both positive and negative samples")

    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    # mid-rank (1-based) of every tie group
    starts = np.flatnonzero(np.r_[True, sorted_s[1:] != sorted_s[:-1]])
    ends = np.r_[starts[1:], s.size]
    group_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(s.size)
    ranks[order] = np.repeat(group_rank, ends - starts)
    # rank sums are exact multiples of 0.5, so u is exact for moderate n
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class MetricsReport:
    label: int
    support: int
    confusion: ConfusionMatrix
    spec: float
    sens: float
    precision: float
    f1: float
    g_mean: float
    auc: float | None
    degenerate: tuple[str, ...] = field(default_factory=tuple)

    FIELDS = (
        "class", "support", "tp", "fp", "fn", "tn",
        "spec", "sens", "precision", "f1", "g_mean", "auc", "degenerate",
    )

    def as_row(self) -> dict[str, object]:
        cm = self.confusion
        return {
            "class": self.label,
            "support": self.support,
            "tp": cm.tp,
            "fp": cm.fp,
            "fn": cm.fn,
            "tn": cm.tn,
            "spec": self.spec,
            "sens": self.sens,
            "precision": self.precision,
            "f1": self.f1,
            "g_mean": self.g_mean,
            "auc": self.auc,
            "degenerate": ";".join(self.degenerate),
        }


def class_report(labels, predictions, scores, positive_class) -> MetricsReport:
    """All metrics for ``positive_class`` versus the rest.

    ``scores`` are the model's scores for ``positive_class`` (higher means more
    likely positive); pass ``None`` to skip AUC.
    """
    cm = confusion(labels, predictions, positive_class)
    spec, d_spec = _ratio(cm.tn, cm.tn + cm.fp)
    sens, d_sens = _ratio(cm.tp, cm.tp + cm.fn)
    prec, d_prec = _ratio(cm.tp, cm.tp + cm.fp)
    f, d_f1 = _ratio(2.0 * prec * sens, prec + sens)
    degenerate = [name for name, flag in
                  (("spec", d_spec), ("sens", d_sens), ("precision", d_prec), ("f1", d_f1)) if flag]
    a = None
    if scores is not None:
        try:
            a = auc(labels, scores, positive_class)
        except UndefinedMetricError:
            degenerate.append("auc")
    return MetricsReport(
        label=int(positive_class),
        support=cm.tp + cm.fn,
        confusion=cm,
        spec=spec,
        sens=sens,
        precision=prec,
        f1=f,
        g_mean=math.sqrt(spec * sens),
        auc=a,
        degenerate=tuple(degenerate),
    )

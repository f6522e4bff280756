"""Per-label and support-weighted classification metrics plus ROC-AUC."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import MetricError

LABELS = ("bioagressor", "disease")
LABEL_DISPLAY = {"bioagressor": "Bioagressor", "disease": "Disease"}


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def degenerate(self) -> set[str]:
        """Names of metrics whose denominator is zero for these counts."""
        out = set()
        if self.tp + self.fp == 0:
            out.add("precision")
        if self.tp + self.fn == 0:
            out.add("recall")
        if self.n == 0:
            out.add("accuracy")
        if precision(self) + recall(self) == 0:
            out.add("f1")
        return out


def confusion_counts(decisions: Iterable[tuple[bool, bool]]) -> ConfusionCounts:
    """Count (predicted, actual) pairs into the four confusion cells."""
    tp = fp = tn = fn = 0
    for pred, actual in decisions:
        if pred and actual:
            tp += 1
        elif pred:
            fp += 1
        elif actual:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, tn, fn)


def _div(num: float, den: float) -> float:
    # Zero denominators yield 0; ConfusionCounts.degenerate() reports them.
    return num / den if den else 0.0


def precision(c: ConfusionCounts) -> float:
    return _div(c.tp, c.tp + c.fp)


def recall(c: ConfusionCounts) -> float:
    return _div(c.tp, c.tp + c.fn)


def f1(c: ConfusionCounts) -> float:
    p, r = precision(c), recall(c)
    return _div(2 * p * r, p + r)


def accuracy(c: ConfusionCounts) -> float:
    return _div(c.tp + c.tn, c.n)


def roc_auc(scores: Sequence[float], actuals: Sequence[bool]) -> float:
    """Mann-Whitney form of ROC-AUC: average ranks, ties count one half."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(actuals, dtype=bool)
    if s.shape != y.shape or s.ndim != 1:
        raise MetricError("shape", "scores and actuals must be 1-d and of equal length")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("single-class", "ROC-AUC needs at least one positive and one negative")
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    ranks = np.empty(s.size, dtype=np.float64)
    # Average rank over each block of tied scores (1-based ranks).
    boundaries = np.flatnonzero(np.diff(sorted_s)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [s.size]))
    for a, b in zip(starts, ends):
        ranks[order[a:b]] = (a + 1 + b) / 2.0
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class MetricsReport:
    per_label: dict[str, dict[str, float]]
    weighted: dict[str, float]
    supports: dict[str, int]
    n_examples: int
    threshold: float
    roc_auc_per_label: dict[str, float | None] = field(default_factory=dict)
    auc_average: str = "weighted"
    degenerate: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "per_label": self.per_label,
            "weighted": self.weighted,
            "supports": self.supports,
            "n_examples": self.n_examples,
            "threshold": self.threshold,
            "roc_auc_per_label": self.roc_auc_per_label,
            "auc_average": self.auc_average,
            "degenerate": self.degenerate,
            "notes": self.notes,
        }

    def to_table(self) -> str:
        """Plain-text table: one row per label plus the weighted-average row."""
        cols = ["Accuracy", "Precision", "Recall", "F Score", "ROC_AUC"]
        rows = []
        for label, m in self.per_label.items():
            rows.append([LABEL_DISPLAY.get(label, label), m["accuracy"], m["precision"], m["recall"], m["f1"], None])
        w = self.weighted
        rows.append(["Weighted Average", None, w["precision"], w["recall"], w["f1"], w["roc_auc"]])
        head_w = max(len(r[0]) for r in rows)
        col_w = max(len(c) for c in cols)
        fmt = lambda v: ("" if v is None else f"{v:.4f}").rjust(col_w)  # noqa: E731
        lines = [" " * head_w + "  " + "  ".join(c.rjust(col_w) for c in cols)]
        lines += [r[0].ljust(head_w) + "  " + "  ".join(fmt(v) for v in r[1:]) for r in rows]
        lines.append(f"(n={self.n_examples}, threshold={self.threshold:g})")
        return "\n".join(lines) + "\n"


def compute_report(
    probabilities,
    actuals,
    threshold: float = 0.5,
    labels: Sequence[str] = LABELS,
    auc_average: str = "weighted",
) -> MetricsReport:
    """Metrics from an (n, k) probability matrix and (n, k) boolean ground truth.

    Decisions are ``probability >= threshold``. Weighted averages use each
    label's positive support as its weight. ``auc_average="micro"`` pools all
    (example, label) pairs into one ROC-AUC instead.
    """
    p = np.asarray(probabilities, dtype=np.float64).reshape(-1, len(labels))
    y = np.asarray(actuals, dtype=bool).reshape(-1, len(labels))
    if p.shape != y.shape:
        raise MetricError("shape", f"probabilities {p.shape} vs actuals {y.shape}")
    if p.shape[0] == 0:
        raise MetricError("empty", "no examples to evaluate")
    if auc_average not in ("weighted", "micro"):
        raise MetricError("config", f"unknown auc_average {auc_average!r}")
    decided = p >= threshold

    per_label, supports, aucs, degenerate, notes = {}, {}, {}, [], []
    for k, label in enumerate(labels):
        c = confusion_counts(zip(decided[:, k].tolist(), y[:, k].tolist()))
        per_label[label] = {"accuracy": accuracy(c), "precision": precision(c), "recall": recall(c), "f1": f1(c)}
        degenerate += [f"{label}.{m}" for m in sorted(c.degenerate())]
        supports[label] = int(y[:, k].sum())
        try:
            aucs[label] = roc_auc(p[:, k], y[:, k])
        except MetricError:
            aucs[label] = None
            degenerate.append(f"{label}.roc_auc")
            notes.append(f"{label}: single-class actuals, ROC-AUC excluded from the weighted average")

    total = sum(supports.values())
    weighted = {}
    for m in ("precision", "recall", "f1"):
        weighted[m] = _div(sum(supports[l] * per_label[l][m] for l in labels), total)
    if total == 0:
        degenerate.append("weighted")

    if auc_average == "micro":
        try:
            weighted["roc_auc"] = roc_auc(p.ravel(), y.ravel())
        except MetricError:
            weighted["roc_auc"] = 0.0
            degenerate.append("weighted.roc_auc")
    else:
        usable = [l for l in labels if aucs[l] is not None]
        den = sum(supports[l] for l in usable)
        weighted["roc_auc"] = _div(sum(supports[l] * aucs[l] for l in usable), den)
        if den == 0:
            degenerate.append("weighted.roc_auc")

    return MetricsReport(
        per_label=per_label,
        weighted=weighted,
        supports=supports,
        n_examples=int(p.shape[0]),
        threshold=float(threshold),
        roc_auc_per_label=aucs,
        auc_average=auc_average,
        degenerate=degenerate,
        notes=notes,
    )


def evaluate(artifact, test_examples, threshold: float | None = None, auc_average: str = "weighted") -> MetricsReport:
    """Score a trained artifact on labeled examples (objects with ``text`` and ``labels``)."""
    test_examples = list(test_examples)
    if not test_examples:
        raise MetricError("empty", "test set is empty")
    thr = artifact.config.threshold if threshold is None else threshold
    probs = artifact.predict_proba([e.text for e in test_examples])
    actual = [e.labels.as_tuple() for e in test_examples]
    return compute_report(probs, actual, thr, artifact.label_order, auc_average)

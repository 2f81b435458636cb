"""Classification metrics: confusion matrices, accuracy, micro/macro P/R/F1.

Micro-averaging pools true/false positives and negatives over categories
before dividing, which for single-label multiclass collapses to accuracy
(micro P = micro R = micro F1 = accuracy). Macro averages the per-category
values over every category in the label set, with the zero-denominator
convention P = R = F1 = 0, so absent categories drag the macro down rather
than being skipped.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import MetricsError


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # [C, C], rows = true, cols = predicted
    labels: tuple[str, ...]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def trace(self) -> int:
        return int(np.trace(self.counts))


@dataclass(frozen=True)
class CategoryMetrics:
    label: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    micro_precision: float
    micro_recall: float
    micro_f1: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_category: tuple[CategoryMetrics, ...]
    n_examples: int
    mean_loss: Optional[float] = None

    def to_dict(self) -> dict:
        d = {
            "accuracy": self.accuracy,
            "micro": {
                "precision": self.micro_precision,
                "recall": self.micro_recall,
                "f1": self.micro_f1,
            },
            "macro": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
            },
            "per_category": [
                {
                    "label": c.label,
                    "precision": c.precision,
                    "recall": c.recall,
                    "f1": c.f1,
                    "support": c.support,
                }
                for c in self.per_category
            ],
            "n_examples": self.n_examples,
        }
        if self.mean_loss is not None:
            d["mean_loss"] = self.mean_loss
        return d


def _to_indices(values: Sequence, labels: Sequence[str], what: str) -> np.ndarray:
    """Accept either label names or integer indices."""
    index = {lab: i for i, lab in enumerate(labels)}
    out = np.empty(len(values), dtype=np.int64)
    for i, v in enumerate(values):
        if isinstance(v, str):
            if v not in index:
                raise MetricsError(f"unknown {what} label {v!r}")
            out[i] = index[v]
        else:
            iv = int(v)
            if not 0 <= iv < len(labels):
                raise MetricsError(
                    f"{what} index {iv} outside label set of size {len(labels)}"
                )
            out[i] = iv
    return out


def confusion(truths: Sequence, preds: Sequence, labels: Sequence[str]) -> ConfusionMatrix:
    """counts[t][p] += 1 per example; truths/preds may be names or indices."""
    if len(truths) != len(preds):
        raise MetricsError(
            f"truths ({len(truths)}) and preds ({len(preds)}) differ in length"
        )
    if not labels:
        raise MetricsError("label set is empty")
    t = _to_indices(truths, labels, "true")
    p = _to_indices(preds, labels, "predicted")
    c = len(labels)
    counts = np.zeros((c, c), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts=counts, labels=tuple(labels))


def normalize_rows(cm: ConfusionMatrix) -> np.ndarray:
    """Divide each row by its example count; errors on empty categories."""
    row_sums = cm.counts.sum(axis=1)
    for i, s in enumerate(row_sums):
        if s == 0:
            raise MetricsError(
                f"cannot normalize: category {cm.labels[i]!r} has no examples"
            )
    return cm.counts.astype(np.float64) / row_sums[:, None]


def _ratio(num: float, denom: float) -> float:
    return num / denom if denom > 0 else 0.0


def metrics(cm: ConfusionMatrix, mean_loss: Optional[float] = None) -> EvalReport:
    if cm.total == 0:
        raise MetricsError("cannot compute metrics for an empty confusion matrix")
    counts = cm.counts.astype(np.float64)
    tp = np.diag(counts)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp

    per = []
    for i, label in enumerate(cm.labels):
        p = _ratio(tp[i], tp[i] + fp[i])
        r = _ratio(tp[i], tp[i] + fn[i])
        f1 = _ratio(2 * p * r, p + r)
        per.append(CategoryMetrics(label=label, precision=p, recall=r, f1=f1,
                                   support=int(cm.counts[i].sum())))

    micro_p = _ratio(tp.sum(), tp.sum() + fp.sum())
    micro_r = _ratio(tp.sum(), tp.sum() + fn.sum())
    micro_f1 = _ratio(2 * micro_p * micro_r, micro_p + micro_r)

    return EvalReport(
        accuracy=cm.trace / cm.total,
        micro_precision=micro_p,
        micro_recall=micro_r,
        micro_f1=micro_f1,
        macro_precision=float(np.mean([c.precision for c in per])),
        macro_recall=float(np.mean([c.recall for c in per])),
        macro_f1=float(np.mean([c.f1 for c in per])),
        per_category=tuple(per),
        n_examples=cm.total,
        mean_loss=mean_loss,
    )


def evaluate_predictions(truths: Sequence, preds: Sequence, labels: Sequence[str],
                         mean_loss: Optional[float] = None) -> EvalReport:
    return metrics(confusion(truths, preds, labels), mean_loss=mean_loss)


# ---------------------------------------------------------------------------
# artifact writers

def write_report_json(path, report: EvalReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_confusion_csv(path, cm: ConfusionMatrix, normalized: bool = False) -> None:
    """Counts CSV, or the row-normalized variant with 6-decimal cells."""
    rows = normalize_rows(cm) if normalized else cm.counts
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true\\pred", *cm.labels])
        for label, row in zip(cm.labels, rows):
            cells = [f"{v:.6f}" if normalized else str(int(v)) for v in row]
            writer.writerow([label, *cells])


def write_per_category_csv(path, report: EvalReport) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["category", "precision", "recall", "f1", "support"])
        for c in report.per_category:
            writer.writerow(
                [c.label, f"{c.precision:.6f}", f"{c.recall:.6f}", f"{c.f1:.6f}", c.support]
            )

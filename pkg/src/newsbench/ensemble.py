"""Majority-vote ensembling over independent member classifiers.

Votes are unweighted: each member contributes one label per example, the
histogram winner is returned, and ties are broken uniformly at random among
the tied maxima using a seedable stream so reports are reproducible.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import EnsembleError
from .evaluation import EvalReport, evaluate_predictions
from .model import ModelState
from .rng import named_rng
from .tokenizer import TokenBatch
from .trainer import predict_batched


def vote(votes: Sequence[int], rng: np.random.Generator) -> int:
    """Most-frequent label; ties resolved by a uniform draw among the tied
    maxima (draw consumed only when a tie exists)."""
    if len(votes) == 0:
        raise EnsembleError("cannot vote with an empty vote list")
    histogram = Counter(votes)
    top = max(histogram.values())
    tied = sorted(label for label, count in histogram.items() if count == top)
    if len(tied) == 1:
        return tied[0]
    return tied[int(rng.integers(len(tied)))]


@dataclass(frozen=True)
class EnsembleResult:
    member_reports: tuple[EvalReport, ...]
    ensemble_report: EvalReport
    member_names: tuple[str, ...]
    ensemble_preds: np.ndarray


def vote_matrix(member_preds: np.ndarray, seed: int) -> np.ndarray:
    """Per-example majority vote over a [k, n] member-prediction matrix."""
    preds = np.asarray(member_preds)
    if preds.ndim != 2 or preds.shape[0] < 1:
        raise EnsembleError(f"member predictions must be [k, n] with k >= 1, "
                            f"got shape {preds.shape}")
    rng = named_rng(seed, "vote")
    n = preds.shape[1]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = vote(preds[:, i].tolist(), rng)
    return out


def ensemble_eval(members: Sequence[ModelState], batch: TokenBatch,
                  labels: Sequence[str], seed: int, batch_size: int = 32,
                  member_names: Optional[Sequence[str]] = None) -> EnsembleResult:
    """Evaluate each member and their majority vote on the same split."""
    if len(members) < 1:
        raise EnsembleError("ensemble needs at least one member")
    if batch.labels is None:
        raise EnsembleError("ensemble evaluation needs true labels")
    if member_names is None:
        member_names = [f"M{i + 1}" for i in range(len(members))]
    n_labels = len(labels)
    for name, member in zip(member_names, members):
        if member.config.n_classes != n_labels:
            raise EnsembleError(
                f"member {name} predicts {member.config.n_classes} classes "
                f"but the shared label set has {n_labels}"
            )

    all_preds = np.empty((len(members), batch.size), dtype=np.int64)
    member_reports = []
    for k, member in enumerate(members):
        preds, mean_loss = predict_batched(member, batch, batch_size)
        all_preds[k] = preds
        member_reports.append(
            evaluate_predictions(batch.labels, preds, labels, mean_loss=mean_loss)
        )
    ensemble_preds = vote_matrix(all_preds, seed)
    ensemble_report = evaluate_predictions(batch.labels, ensemble_preds, labels)
    return EnsembleResult(
        member_reports=tuple(member_reports),
        ensemble_report=ensemble_report,
        member_names=tuple(member_names),
        ensemble_preds=ensemble_preds,
    )


def simulate_members(n_members: int, n_examples: int, n_classes: int,
                     accuracy: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Synthetic member predictions: each member is independently correct with
    probability `accuracy`, errors uniform over the remaining labels. Returns
    (truths [n], preds [k, n])."""
    if not 0.0 <= accuracy <= 1.0:
        raise EnsembleError(f"accuracy must be in [0, 1], got {accuracy}")
    if n_classes < 2:
        raise EnsembleError(f"need at least 2 classes, got {n_classes}")
    rng = named_rng(seed, "simulate")
    truths = rng.integers(0, n_classes, size=n_examples)
    preds = np.empty((n_members, n_examples), dtype=np.int64)
    for k in range(n_members):
        correct = rng.random(n_examples) < accuracy
        # uniform wrong label: draw an offset in [1, C) and add mod C
        offsets = rng.integers(1, n_classes, size=n_examples)
        preds[k] = np.where(correct, truths, (truths + offsets) % n_classes)
    return truths, preds


def repeated_vote_accuracy(truths: np.ndarray, preds: np.ndarray,
                           repeats: int, seed: int) -> tuple[float, float]:
    """Mean and std of the vote accuracy over `repeats` tie-break streams.

    Members stay fixed; only the tie-breaking randomness varies, matching the
    repeated-measurement reporting (mean ± std) of the evaluation harness."""
    if repeats < 1:
        raise EnsembleError(f"repeats must be >= 1, got {repeats}")
    accs = []
    for r in range(repeats):
        voted = vote_matrix(preds, seed=seed + r)
        accs.append(float(np.mean(voted == truths)))
    return float(np.mean(accs)), float(np.std(accs))


def write_ensemble_csv(path, result: EnsembleResult) -> None:
    """Table layout: one column per member plus Ensemble, one row per metric."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", *result.member_names, "Ensemble"])
        rows = [
            ("accuracy", lambda r: r.accuracy),
            ("f1_micro", lambda r: r.micro_f1),
            ("f1_macro", lambda r: r.macro_f1),
            ("precision_micro", lambda r: r.micro_precision),
            ("recall_micro", lambda r: r.micro_recall),
        ]
        for name, get in rows:
            writer.writerow([
                name,
                *(f"{get(r):.6f}" for r in result.member_reports),
                f"{get(result.ensemble_report):.6f}",
            ])

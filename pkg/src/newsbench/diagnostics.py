"""Prediction-certainty analysis via Monte Carlo dropout, and an exact t-SNE
projection of [CLS] hidden states.

MC dropout runs T stochastic forward passes with dropout left on, averages
the softmax outputs per example, and reports the mean probability of the
argmax class as the certainty. t-SNE is the exact O(n^2) algorithm: per-point
bandwidths found by bisection against the target perplexity, symmetrized
affinities, Student-t low-dimensional kernel, momentum gradient descent on
KL(P || Q) with early exaggeration. Hot loops live in `kernels` (numba or
numpy backend).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .autodiff import softmax_probs
from .errors import DiagnosticsError
from .model import ModelState, forward
from .rng import named_rng
from .tokenizer import TokenBatch

EVAL_CHUNK = 64


@dataclass(frozen=True)
class CertaintyRecord:
    article_id: str
    true_label: str
    predicted_label: str
    certainty: float
    correct: bool
    mean_probs: np.ndarray
    prob_std: float  # std of the predicted-class probability over the T samples


@dataclass(frozen=True)
class Projection2D:
    coordinates: np.ndarray  # [n, 2] float64
    labels: tuple[str, ...]
    kl_initial: float
    kl_final: float
    hyperparams: dict


# ---------------------------------------------------------------------------
# Monte Carlo dropout

def mc_dropout(state: ModelState, batch: TokenBatch, labels: Sequence[str],
               T: int = 50, seed: int = 0,
               article_ids: Optional[Sequence[str]] = None) -> list[CertaintyRecord]:
    """T dropout-active forward passes; per-example mean softmax probability.

    The model's recorded dropout_rate applies; with rate 0 all T passes are
    identical and the certainty equals the deterministic softmax maximum.
    """
    if T < 1:
        raise DiagnosticsError(f"sample count T must be >= 1, got {T}")
    if batch.size == 0:
        raise DiagnosticsError("mc_dropout needs a nonempty batch")
    if batch.labels is None:
        raise DiagnosticsError("mc_dropout needs true labels on the batch")
    if article_ids is None:
        article_ids = [str(i) for i in range(batch.size)]
    if len(article_ids) != batch.size:
        raise DiagnosticsError(
            f"{len(article_ids)} article ids for a batch of {batch.size}"
        )

    shape = (batch.size, state.config.n_classes)
    mean = np.zeros(shape, dtype=np.float64)
    sumsq = np.zeros(shape, dtype=np.float64)
    for t in range(T):
        rng = named_rng(seed, "mc", t)
        for start in range(0, batch.size, EVAL_CHUNK):
            sub = batch.slice(start, start + EVAL_CHUNK)
            logits, _ = forward(state, sub, mode="train", rng=rng)
            probs = softmax_probs(logits.data.astype(np.float64))
            mean[start : start + sub.size] += probs
            sumsq[start : start + sub.size] += probs * probs
    mean /= T
    variance = np.maximum(sumsq / T - mean * mean, 0.0)

    records = []
    for i in range(batch.size):
        pred = int(np.argmax(mean[i]))
        true = int(batch.labels[i])
        records.append(CertaintyRecord(
            article_id=str(article_ids[i]),
            true_label=labels[true],
            predicted_label=labels[pred],
            certainty=float(mean[i, pred]),
            correct=pred == true,
            mean_probs=mean[i],
            prob_std=float(np.sqrt(variance[i, pred])),
        ))
    return records


def group_by_correct(records: Sequence[CertaintyRecord]
                     ) -> tuple[list[CertaintyRecord], list[CertaintyRecord]]:
    """Split records for the correct-vs-incorrect certainty comparison."""
    correct = [r for r in records if r.correct]
    incorrect = [r for r in records if not r.correct]
    return correct, incorrect


# ---------------------------------------------------------------------------
# [CLS] extraction

def extract_cls(state: ModelState, batch: TokenBatch) -> np.ndarray:
    """Eval-mode [CLS] hidden states, one row per input, input order kept."""
    if batch.size == 0:
        raise DiagnosticsError("cannot extract [CLS] states from an empty split")
    rows = []
    for start in range(0, batch.size, EVAL_CHUNK):
        sub = batch.slice(start, start + EVAL_CHUNK)
        _, cls_hidden = forward(state, sub, mode="eval")
        rows.append(cls_hidden.data)
    return np.concatenate(rows, axis=0)


# ---------------------------------------------------------------------------
# t-SNE

def tsne(points: np.ndarray, labels: Sequence[str], seed: int,
         perplexity: float = 30.0, iterations: int = 1000, lr: float = 200.0,
         exaggeration: float = 12.0, exaggeration_iters: int = 250,
         momentum_start: float = 0.5, momentum_end: float = 0.8) -> Projection2D:
    """Exact t-SNE to 2-d. KL is reported on the un-exaggerated P: kl_initial
    at the first iteration after early exaggeration ends, kl_final at the
    last iteration."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] < 2:
        raise DiagnosticsError(
            f"points must be n x d with d >= 2, got shape {points.shape}"
        )
    n = points.shape[0]
    if len(labels) != n:
        raise DiagnosticsError(f"{len(labels)} labels for {n} points")
    if n <= 3 * perplexity:
        raise DiagnosticsError(
            f"need n > 3*perplexity points, got n={n} for perplexity {perplexity}"
        )
    distinct = np.unique(points, axis=0).shape[0]
    if distinct <= 3 * perplexity:
        raise DiagnosticsError(
            f"only {distinct} distinct points for perplexity {perplexity}; "
            "add small random jitter to duplicate inputs"
        )
    if iterations < 1:
        raise DiagnosticsError(f"iterations must be >= 1, got {iterations}")

    dists = kernels.pairwise_sq_dists(points)
    cond, _betas = kernels.conditional_probs(dists, perplexity, tol=1e-4)
    p = (cond + cond.T) / (2.0 * n)

    rng = named_rng(seed, "tsne-init")
    y = rng.normal(0.0, 1e-2, size=(n, 2))
    velocity = np.zeros_like(y)
    kl_initial: Optional[float] = None
    kl = float("nan")

    for it in range(iterations):
        exaggerated = it < exaggeration_iters
        p_used = p * exaggeration if exaggerated else p
        grad, kl = kernels.tsne_step(p_used, y)
        if not exaggerated and kl_initial is None:
            kl_initial = kl
        momentum = momentum_start if it < exaggeration_iters else momentum_end
        velocity = momentum * velocity - lr * grad
        y = y + velocity
        y = y - y.mean(axis=0)

    if kl_initial is None:
        # run never left the exaggeration phase; measure plain-P KL once
        _, kl = kernels.tsne_step(p, y)
        kl_initial = kl

    if not np.all(np.isfinite(y)):
        raise DiagnosticsError(
            "t-SNE diverged to non-finite coordinates; lower lr or exaggeration"
        )

    return Projection2D(
        coordinates=y,
        labels=tuple(labels),
        kl_initial=float(kl_initial),
        kl_final=float(kl),
        hyperparams={
            "perplexity": perplexity,
            "iterations": iterations,
            "lr": lr,
            "exaggeration": exaggeration,
            "exaggeration_iters": exaggeration_iters,
            "momentum_start": momentum_start,
            "momentum_end": momentum_end,
            "seed": seed,
            "backend": kernels.backend_name(),
        },
    )


# ---------------------------------------------------------------------------
# artifact writers

def write_certainty_csv(path, records: Sequence[CertaintyRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "true", "predicted", "certainty", "correct"])
        for r in records:
            writer.writerow([r.article_id, r.true_label, r.predicted_label,
                             f"{r.certainty:.6f}", str(r.correct).lower()])


def write_projection_csv(path, proj: Projection2D,
                         ids: Optional[Sequence[str]] = None) -> None:
    if ids is None:
        ids = [str(i) for i in range(len(proj.labels))]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "x", "y", "label"])
        for i, label in enumerate(proj.labels):
            writer.writerow([ids[i], f"{proj.coordinates[i, 0]:.6f}",
                             f"{proj.coordinates[i, 1]:.6f}", label])


def _require_matplotlib():
    try:
        import matplotlib

        matplotlib.use("svg", force=False)
        import matplotlib.pyplot as plt

        return plt
    except ImportError:
        raise DiagnosticsError(
            "SVG output needs matplotlib; install the [viz] extra"
        ) from None


def write_projection_svg(path, proj: Projection2D) -> None:
    """Scatter of the 2-d embedding colored by category."""
    plt = _require_matplotlib()
    fig, ax = plt.subplots(figsize=(7, 6))
    order = sorted(set(proj.labels))
    for label in order:
        idx = [i for i, lab in enumerate(proj.labels) if lab == label]
        ax.scatter(proj.coordinates[idx, 0], proj.coordinates[idx, 1],
                   s=12, label=label, alpha=0.8)
    ax.set_xlabel("t-SNE 1")
    ax.set_ylabel("t-SNE 2")
    ax.legend(fontsize=7, markerscale=1.5, loc="best")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def write_certainty_svg(path, records: Sequence[CertaintyRecord],
                        seed: int = 0) -> None:
    """Strip plot of certainties, correct vs incorrect predictions."""
    plt = _require_matplotlib()
    correct, incorrect = group_by_correct(records)
    fig, ax = plt.subplots(figsize=(5, 5))
    rng = named_rng(seed, "strip-jitter")
    for x, group, label in ((0, correct, "correct"), (1, incorrect, "incorrect")):
        ys = [r.certainty for r in group]
        xs = x + rng.uniform(-0.15, 0.15, size=len(ys))
        ax.scatter(xs, ys, s=10, alpha=0.6, label=f"{label} (n={len(ys)})")
    ax.set_xticks([0, 1], ["correct", "incorrect"])
    ax.set_ylabel("prediction certainty")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)

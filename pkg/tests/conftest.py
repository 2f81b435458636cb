"""Shared fixtures and the synthetic keyword-separable corpus generator."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from newsbench.corpus import Article, Dataset
from newsbench.rng import named_rng

# Five disjoint keyword pools plus shared filler words. Documents from class k
# draw their content words from pool k, which makes the task separable.
CLASS_KEYWORDS = {
    "markets": ["stocks", "bonds", "trading", "shares", "dividend", "portfolio", "hedge", "broker"],
    "science": ["enzyme", "protein", "genome", "molecule", "catalyst", "neuron", "isotope", "plasma"],
    "sports": ["goal", "tournament", "coach", "striker", "league", "stadium", "referee", "penalty"],
    "weather": ["storm", "rainfall", "humidity", "forecast", "drought", "blizzard", "monsoon", "thunder"],
    "culture": ["gallery", "orchestra", "novel", "sculpture", "ballet", "poetry", "festival", "cinema"],
}
FILLER = ["the", "a", "of", "and", "report", "today", "new", "update", "news", "on", "latest", "with"]


def make_synthetic_dataset(
    docs_per_class: int = 200,
    seed: int = 7,
    words_per_doc: int = 30,
    label_noise: float = 0.0,
) -> Dataset:
    """Keyword-separable corpus; with `label_noise` > 0 that fraction of
    labels is resampled uniformly (for early-stopping experiments)."""
    rng = named_rng(seed, "synthetic")
    labels = list(CLASS_KEYWORDS)
    articles = []
    for label in labels:
        pool = CLASS_KEYWORDS[label]
        for i in range(docs_per_class):
            n_body = max(4, words_per_doc - 4)
            title_words = [str(pool[int(rng.integers(len(pool)))]) for _ in range(2)]
            title = " ".join(title_words + [str(FILLER[int(rng.integers(len(FILLER)))])])
            body_words = []
            for _ in range(n_body):
                if rng.random() < 0.6:
                    body_words.append(pool[int(rng.integers(len(pool)))])
                else:
                    body_words.append(FILLER[int(rng.integers(len(FILLER)))])
            category = label
            if label_noise > 0 and rng.random() < label_noise:
                category = labels[int(rng.integers(len(labels)))]
            articles.append(Article(
                id=f"{label}-{i:04d}",
                title=title,
                body=" ".join(body_words),
                category=category,
            ))
    return Dataset(articles)


def write_jsonl(dataset: Dataset, path: Path) -> Path:
    with path.open("w", encoding="utf-8") as fh:
        for art in dataset.articles:
            fh.write(json.dumps({
                "id": art.id, "title": art.title, "body": art.body, "category": art.category,
            }) + "\n")
    return path


@pytest.fixture
def tiny_dataset() -> Dataset:
    return Dataset([
        Article(id="a1", title="Stocks rally on earnings", body="Shares of the fund rose.", category="markets"),
        Article(id="a2", title="Enzyme mechanism mapped", body="The protein folds quickly.", category="science"),
        Article(id="a3", title="Cup final tonight", body="", category="sports"),
        Article(id="a4", title="Bond yields dip", body="Trading was light today.", category="markets"),
        Article(id="a5", title="Storm nears coast", body="Heavy rainfall is expected.", category="weather"),
        Article(id="a6", title="Genome study released", body="", category="science"),
    ])


@pytest.fixture
def synthetic_small() -> Dataset:
    return make_synthetic_dataset(docs_per_class=20, seed=11, words_per_doc=20)


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    """Norm-based relative error between two gradient arrays.

    When both norms sit below 1e-7 the true gradient is structurally zero
    (e.g. a bias that cancels under a shift-invariant softmax) and the values
    are pure float cancellation noise, so the pair counts as agreeing.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if max(na, nb) <= 1e-7:
        return 0.0
    return float(np.linalg.norm(a - b) / (na + nb))


def finite_difference(f, tensors, h=1e-6):
    """Central-difference gradient of scalar f() w.r.t. each tensor's data.

    Pure forward-evaluation oracle, independent of the tape machinery.
    """
    grads = []
    for p in tensors:
        g = np.zeros_like(p.data)
        flat = p.data.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = f()
            flat[i] = orig - h
            down = f()
            flat[i] = orig
            gflat[i] = (up - down) / (2 * h)
        grads.append(g)
    return grads

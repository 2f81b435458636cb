"""Corpus ingestion, curation statistics, regex bootstrap labeling and
deterministic splitting.

Datasets are JSON Lines files, one object per article:
``{"id": "...", "title": "...", "body": "...", "category": "..."|null}``.
Articles everywhere downstream are represented by their combined text,
title plus a single space plus body (just the title when the body is empty).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DatasetError, RuleError
from .rng import fisher_yates, named_rng

# Largest tolerated max/min category-size ratio (strict: ratio must stay below).
BALANCE_BOUND = 4.0

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class Article:
    """One news item. The body may be empty (title-only articles exist)."""

    id: str
    title: str
    body: str = ""
    category: Optional[str] = None

    def text(self) -> str:
        """Combined text used downstream: title, a space, then the body."""
        if not self.body:
            return self.title
        return f"{self.title} {self.body}"


@dataclass(frozen=True)
class CategoryStats:
    category: str
    items: int
    nonstop_mean: float
    nonstop_std: float
    nonstop_min: int
    nonstop_max: int
    nonstop_median: float
    stop_mean: float
    stop_std: float
    stop_min: int
    stop_max: int
    stop_median: float
    char_min: int
    char_max: int
    char_mean: float
    char_median: float


@dataclass(frozen=True)
class BalanceReport:
    ratio: float
    max_category: str
    max_items: int
    min_category: str
    min_items: int
    within_bound: bool  # ratio strictly below BALANCE_BOUND


@dataclass(frozen=True)
class SplitSet:
    train: tuple[str, ...]
    validation: tuple[str, ...]
    test: tuple[str, ...]
    seed: int
    ratios: tuple[float, float, float]

    def partition(self, name: str) -> tuple[str, ...]:
        if name not in ("train", "validation", "test"):
            raise DatasetError(f"unknown partition {name!r}")
        return getattr(self, name)


@dataclass(frozen=True)
class LabelCandidate:
    """One regex hit: a candidate category for an article, not a final label."""

    category: str
    start: int
    end: int
    text: str


class Dataset:
    """A list of articles plus the label vocabulary in first-seen order."""

    def __init__(self, articles: Sequence[Article], labels: Optional[Sequence[str]] = None):
        self.articles = list(articles)
        self.by_id: dict[str, Article] = {}
        for art in self.articles:
            _validate_article(art)
            if art.id in self.by_id:
                raise DatasetError(f"duplicate article id {art.id!r}")
            self.by_id[art.id] = art
        if labels is None:
            seen: dict[str, None] = {}
            for art in self.articles:
                if art.category is not None:
                    seen.setdefault(art.category, None)
            self.labels = list(seen)
        else:
            self.labels = list(labels)
            declared = set(self.labels)
            for art in self.articles:
                if art.category is not None and art.category not in declared:
                    raise DatasetError(
                        f"article {art.id!r} has undeclared category {art.category!r}"
                    )

    def __len__(self) -> int:
        return len(self.articles)

    def label_index(self) -> dict[str, int]:
        return {label: i for i, label in enumerate(self.labels)}

    def subset(self, ids: Iterable[str]) -> list[Article]:
        out = []
        for art_id in ids:
            if art_id not in self.by_id:
                raise DatasetError(f"unknown article id {art_id!r}")
            out.append(self.by_id[art_id])
        return out


def _validate_article(art: Article) -> None:
    if not isinstance(art.id, str) or not art.id:
        raise DatasetError("article id must be a nonempty string")
    if not isinstance(art.title, str) or not art.title:
        raise DatasetError(f"article {art.id!r}: title must be a nonempty string")
    if not isinstance(art.body, str):
        raise DatasetError(f"article {art.id!r}: body must be a string")
    if art.category is not None and (not isinstance(art.category, str) or not art.category):
        raise DatasetError(f"article {art.id!r}: category must be null or a nonempty string")


def tokenize_words(text: str) -> list[str]:
    """Lowercase and split into maximal alphanumeric runs (underscore excluded)."""
    return _WORD_RE.findall(text.lower())


def load_stopwords(path: Optional[str | Path] = None) -> frozenset[str]:
    """Stopword set; defaults to the versioned list shipped with the package."""
    if path is None:
        raw = resources.files("newsbench.data").joinpath("stopwords_v1.txt").read_text("utf-8")
    else:
        raw = Path(path).read_text("utf-8")
    words = set()
    for line in raw.splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


def load_dataset(path: str | Path) -> Dataset:
    """Parse a JSON-Lines dataset file. Malformed lines and duplicate ids abort
    with the offending line number / id."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    articles: list[Article] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise DatasetError(f"{path}:{lineno}: expected a JSON object")
            try:
                art = Article(
                    id=obj.get("id"),
                    title=obj.get("title"),
                    body=obj.get("body") or "",
                    category=obj.get("category"),
                )
                _validate_article(art)
            except DatasetError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
            articles.append(art)
    return Dataset(articles)


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for art in dataset.articles:
            fh.write(json.dumps({
                "id": art.id, "title": art.title,
                "body": art.body, "category": art.category,
            }, ensure_ascii=False) + "\n")


def _stats_row(category: str, nonstop: list[int], stop: list[int], chars: list[int]) -> CategoryStats:
    ns = np.asarray(nonstop, dtype=np.float64)
    st = np.asarray(stop, dtype=np.float64)
    ch = np.asarray(chars, dtype=np.float64)
    return CategoryStats(
        category=category,
        items=len(nonstop),
        nonstop_mean=float(ns.mean()),
        nonstop_std=float(ns.std()),  # population std: one sample -> 0
        nonstop_min=int(ns.min()),
        nonstop_max=int(ns.max()),
        nonstop_median=float(np.median(ns)),
        stop_mean=float(st.mean()),
        stop_std=float(st.std()),
        stop_min=int(st.min()),
        stop_max=int(st.max()),
        stop_median=float(np.median(st)),
        char_min=int(ch.min()),
        char_max=int(ch.max()),
        char_mean=float(ch.mean()),
        char_median=float(np.median(ch)),
    )


def compute_stats(dataset: Dataset, stopwords: frozenset[str] | set[str]) -> list[CategoryStats]:
    """Per-category word/character statistics plus a final "Total" row.

    A word is a stopword iff it is in `stopwords`; character counts are raw
    lengths of the combined text. Every article must be labeled.
    """
    if len(dataset) == 0:
        raise DatasetError("cannot compute statistics of an empty dataset")
    per_cat: dict[str, tuple[list[int], list[int], list[int]]] = {
        label: ([], [], []) for label in dataset.labels
    }
    all_nonstop: list[int] = []
    all_stop: list[int] = []
    all_chars: list[int] = []
    for art in dataset.articles:
        if art.category is None:
            raise DatasetError(f"article {art.id!r} is unlabeled; statistics need labels")
        text = art.text()
        words = tokenize_words(text)
        n_stop = sum(1 for w in words if w in stopwords)
        n_nonstop = len(words) - n_stop
        n_chars = len(text)
        ns, st, ch = per_cat[art.category]
        ns.append(n_nonstop)
        st.append(n_stop)
        ch.append(n_chars)
        all_nonstop.append(n_nonstop)
        all_stop.append(n_stop)
        all_chars.append(n_chars)
    rows = []
    for label in dataset.labels:
        ns, st, ch = per_cat[label]
        if not ns:  # declared label with zero items is excluded from the report
            continue
        rows.append(_stats_row(label, ns, st, ch))
    rows.append(_stats_row("Total", all_nonstop, all_stop, all_chars))
    return rows


def balance_ratio(dataset: Dataset) -> BalanceReport:
    """Largest-to-smallest category size ratio, with the arg-max/arg-min
    categories and a flag against the strict upper bound of 4."""
    counts = {label: 0 for label in dataset.labels}
    for art in dataset.articles:
        if art.category is not None:
            counts[art.category] += 1
    if len(counts) < 2:
        raise DatasetError("balance ratio needs at least 2 categories")
    for label, n in counts.items():
        if n == 0:
            raise DatasetError(f"category {label!r} has no articles")
    max_cat = max(counts, key=lambda c: (counts[c], c))
    min_cat = min(counts, key=lambda c: (counts[c], c))
    ratio = counts[max_cat] / counts[min_cat]
    return BalanceReport(
        ratio=ratio,
        max_category=max_cat,
        max_items=counts[max_cat],
        min_category=min_cat,
        min_items=counts[min_cat],
        within_bound=ratio < BALANCE_BOUND,
    )


class RuleSet:
    """Map category -> list of regex patterns used to bootstrap labels."""

    def __init__(self, rules: dict[str, list[str]]):
        self.patterns: dict[str, list[re.Pattern]] = {}
        self.sources: dict[str, list[str]] = {}
        for category, pats in rules.items():
            compiled = []
            for pat in pats:
                try:
                    compiled.append(re.compile(pat))
                except re.error as exc:
                    raise RuleError(f"category {category!r}: bad pattern {pat!r}: {exc}") from exc
            self.patterns[category] = compiled
            self.sources[category] = list(pats)

    @classmethod
    def from_file(cls, path: str | Path) -> "RuleSet":
        try:
            obj = json.loads(Path(path).read_text("utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise RuleError(f"cannot read rule file {path}: {exc}") from exc
        if not isinstance(obj, dict) or not all(
            isinstance(v, list) and all(isinstance(p, str) for p in v) for v in obj.values()
        ):
            raise RuleError(f"{path}: expected an object mapping category -> [pattern, ...]")
        return cls(obj)

    def validate_labels(self, labels: Sequence[str]) -> None:
        declared = set(labels)
        for category in self.patterns:
            if category not in declared:
                raise RuleError(f"rule category {category!r} is not a declared label")


def bootstrap_label(rules: RuleSet, article: Article) -> list[LabelCandidate]:
    """All rule matches against the article's combined text. The output is
    sorted by (category, span) and de-duplicated, so it does not depend on the
    order of patterns within a category."""
    text = article.text()
    hits: set[tuple[str, int, int]] = set()
    for category, compiled in rules.patterns.items():
        for pattern in compiled:
            for m in pattern.finditer(text):
                if m.start() == m.end():  # ignore empty matches
                    continue
                hits.add((category, m.start(), m.end()))
    return [
        LabelCandidate(category=c, start=s, end=e, text=text[s:e])
        for c, s, e in sorted(hits)
    ]


def _floor_count(ratio: float, n: int) -> int:
    # tiny epsilon guards float fuzz like 0.1 * 30 = 2.9999...
    return int(math.floor(ratio * n + 1e-9))


def split(
    dataset: Dataset,
    seed: int,
    ratios: tuple[float, float, float] = (0.5, 0.25, 0.25),
    stratify: bool = False,
) -> SplitSet:
    """Seeded Fisher-Yates shuffle, then floor(train), floor(validation) and
    the remainder to test; with `stratify` the same rule is applied per
    category over the shuffled order."""
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise DatasetError(f"ratios must be three positive fractions, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DatasetError(f"ratios must sum to 1, got {ratios}")
    n = len(dataset)
    if n < 3:
        raise DatasetError(f"need at least 3 articles to split, got {n}")

    order = fisher_yates(n, named_rng(seed, "split"))
    shuffled = [dataset.articles[i] for i in order]

    def cut(ids: list[str]) -> tuple[list[str], list[str], list[str]]:
        m = len(ids)
        n_train = _floor_count(ratios[0], m)
        n_val = _floor_count(ratios[1], m)
        return ids[:n_train], ids[n_train:n_train + n_val], ids[n_train + n_val:]

    if not stratify:
        train, val, test = cut([a.id for a in shuffled])
    else:
        groups: dict[str, list[str]] = {label: [] for label in dataset.labels}
        for art in shuffled:
            if art.category is None:
                raise DatasetError(f"article {art.id!r} is unlabeled; stratified split needs labels")
            groups[art.category].append(art.id)
        train, val, test = [], [], []
        for label in dataset.labels:
            tr, va, te = cut(groups[label])
            train.extend(tr)
            val.extend(va)
            test.extend(te)

    return SplitSet(
        train=tuple(train),
        validation=tuple(val),
        test=tuple(test),
        seed=seed,
        ratios=tuple(ratios),
    )


# ---------------------------------------------------------------------------
# file interfaces

STATS_COLUMNS = [
    "category", "items",
    "nonstop_mean", "nonstop_std", "nonstop_min", "nonstop_max", "nonstop_median",
    "stop_mean", "stop_std", "stop_min", "stop_max", "stop_median",
    "char_min", "char_max", "char_mean", "char_median",
]


def write_stats_csv(rows: Sequence[CategoryStats], path: str | Path) -> None:
    import csv

    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STATS_COLUMNS)
        for row in rows:
            writer.writerow([
                row.category, row.items,
                f"{row.nonstop_mean:.2f}", f"{row.nonstop_std:.2f}",
                row.nonstop_min, row.nonstop_max, f"{row.nonstop_median:.2f}",
                f"{row.stop_mean:.2f}", f"{row.stop_std:.2f}",
                row.stop_min, row.stop_max, f"{row.stop_median:.2f}",
                row.char_min, row.char_max,
                f"{row.char_mean:.2f}", f"{row.char_median:.2f}",
            ])


def write_split_manifest(split_set: SplitSet, path: str | Path) -> None:
    payload = {
        "seed": split_set.seed,
        "ratios": list(split_set.ratios),
        "train": list(split_set.train),
        "validation": list(split_set.validation),
        "test": list(split_set.test),
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")


def load_split_manifest(path: str | Path) -> SplitSet:
    try:
        obj = json.loads(Path(path).read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot read split manifest {path}: {exc}") from exc
    try:
        return SplitSet(
            train=tuple(obj["train"]),
            validation=tuple(obj["validation"]),
            test=tuple(obj["test"]),
            seed=int(obj["seed"]),
            ratios=tuple(float(r) for r in obj["ratios"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"malformed split manifest {path}: {exc}") from exc

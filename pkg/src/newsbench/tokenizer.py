"""Word-level tokenizer: vocabulary built from the training split, encoding to
fixed-length id sequences with attention masks.

Every encoded row is exactly `max_len` ids: CLS, the word ids (UNK for
out-of-vocabulary words), SEP, then PAD. Overlong articles are truncated so
that SEP is always the final non-PAD token.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .corpus import Article, tokenize_words
from .errors import TokenizerError

PAD_ID, UNK_ID, CLS_ID, SEP_ID = 0, 1, 2, 3
PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
RESERVED_TOKENS = (PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN)

DEFAULT_MAX_SIZE = 8000
DEFAULT_MAX_LEN = 128

_VOCAB_HEADER_PREFIX = "# newsbench-vocab v1"


@dataclass(frozen=True)
class Vocabulary:
    """Immutable token -> id map with dense ids and fixed reserved slots."""

    id_to_token: tuple[str, ...]
    max_size: int
    token_to_id: dict[str, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.id_to_token[:4] != RESERVED_TOKENS:
            raise TokenizerError("vocabulary must start with the reserved tokens")
        mapping = {tok: i for i, tok in enumerate(self.id_to_token)}
        if len(mapping) != len(self.id_to_token):
            raise TokenizerError("vocabulary contains duplicate tokens")
        object.__setattr__(self, "token_to_id", mapping)

    def __len__(self) -> int:
        return len(self.id_to_token)

    def id_for(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def content_hash(self) -> str:
        payload = "\n".join(self.id_to_token).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()


def build_vocab(train_articles: Sequence[Article], max_size: int = DEFAULT_MAX_SIZE) -> Vocabulary:
    """Keep the `max_size - 4` most frequent word tokens of the training split;
    frequency ties break lexicographically."""
    if max_size < 5:
        raise TokenizerError(f"max_size must be at least 5, got {max_size}")
    if not train_articles:
        raise TokenizerError("cannot build a vocabulary from an empty training split")
    counts: dict[str, int] = {}
    for art in train_articles:
        for word in tokenize_words(art.text()):
            counts[word] = counts.get(word, 0) + 1
    ranked = sorted(counts, key=lambda w: (-counts[w], w))
    kept = ranked[: max_size - 4]
    return Vocabulary(id_to_token=RESERVED_TOKENS + tuple(kept), max_size=max_size)


@dataclass
class TokenBatch:
    """Fixed-length id matrix with an attention mask (1 on real tokens)."""

    ids: np.ndarray        # [B, L] int32
    mask: np.ndarray       # [B, L] float32, values 0/1
    labels: Optional[np.ndarray] = None  # [B] int64

    @property
    def size(self) -> int:
        return self.ids.shape[0]

    @property
    def seq_len(self) -> int:
        return self.ids.shape[1]

    def slice(self, start: int, stop: int) -> "TokenBatch":
        labels = None if self.labels is None else self.labels[start:stop]
        return TokenBatch(ids=self.ids[start:stop], mask=self.mask[start:stop], labels=labels)

    def take(self, order: Sequence[int]) -> "TokenBatch":
        idx = np.asarray(order, dtype=np.int64)
        labels = None if self.labels is None else self.labels[idx]
        return TokenBatch(ids=self.ids[idx], mask=self.mask[idx], labels=labels)


def encode(vocab: Vocabulary, article: Article, max_len: int = DEFAULT_MAX_LEN) -> tuple[np.ndarray, np.ndarray]:
    """One article -> (ids, mask) row of length exactly `max_len`."""
    if max_len < 2:
        raise TokenizerError(f"max_len must be at least 2, got {max_len}")
    words = tokenize_words(article.text())[: max_len - 2]
    ids = np.full(max_len, PAD_ID, dtype=np.int32)
    ids[0] = CLS_ID
    for pos, word in enumerate(words, start=1):
        ids[pos] = vocab.id_for(word)
    ids[len(words) + 1] = SEP_ID
    mask = np.zeros(max_len, dtype=np.float32)
    mask[: len(words) + 2] = 1.0
    return ids, mask


def encode_batch(
    vocab: Vocabulary,
    articles: Sequence[Article],
    max_len: int = DEFAULT_MAX_LEN,
    label_index: Optional[dict[str, int]] = None,
) -> TokenBatch:
    """Encode a list of articles; with `label_index`, labels are attached."""
    if not articles:
        raise TokenizerError("cannot encode an empty article list")
    ids = np.empty((len(articles), max_len), dtype=np.int32)
    mask = np.empty((len(articles), max_len), dtype=np.float32)
    for i, art in enumerate(articles):
        ids[i], mask[i] = encode(vocab, art, max_len)
    labels = None
    if label_index is not None:
        labels = np.empty(len(articles), dtype=np.int64)
        for i, art in enumerate(articles):
            if art.category is None:
                raise TokenizerError(f"article {art.id!r} is unlabeled")
            if art.category not in label_index:
                raise TokenizerError(f"article {art.id!r}: unknown category {art.category!r}")
            labels[i] = label_index[art.category]
    return TokenBatch(ids=ids, mask=mask, labels=labels)


def decode(vocab: Vocabulary, ids: Sequence[int]) -> list[str]:
    """Ids back to tokens, reserved ids dropped. UNK positions come back as
    the UNK marker and are not recoverable."""
    out = []
    for i in ids:
        i = int(i)
        if i in (PAD_ID, CLS_ID, SEP_ID):
            continue
        if i < 0 or i >= len(vocab.id_to_token):
            raise TokenizerError(f"id {i} outside vocabulary of size {len(vocab.id_to_token)}")
        out.append(vocab.id_to_token[i])
    return out


def save_vocab(vocab: Vocabulary, path: str | Path) -> None:
    """Text format: header line with max_size and content hash, then one token
    per line (line number minus the header = id)."""
    header = f"{_VOCAB_HEADER_PREFIX} max_size={vocab.max_size} sha256={vocab.content_hash()}"
    Path(path).write_text("\n".join([header, *vocab.id_to_token]) + "\n", "utf-8")


def load_vocab(path: str | Path) -> Vocabulary:
    try:
        lines = Path(path).read_text("utf-8").splitlines()
    except OSError as exc:
        raise TokenizerError(f"cannot read vocabulary file {path}: {exc}") from exc
    if not lines or not lines[0].startswith(_VOCAB_HEADER_PREFIX):
        raise TokenizerError(f"{path}: missing vocabulary header")
    fields = dict(
        part.split("=", 1) for part in lines[0][len(_VOCAB_HEADER_PREFIX):].split() if "=" in part
    )
    try:
        max_size = int(fields["max_size"])
        expected_hash = fields["sha256"]
    except (KeyError, ValueError) as exc:
        raise TokenizerError(f"{path}: malformed vocabulary header") from exc
    tokens = tuple(lines[1:])
    vocab = Vocabulary(id_to_token=tokens, max_size=max_size)
    if vocab.content_hash() != expected_hash:
        raise TokenizerError(f"{path}: content hash mismatch (file corrupted or edited)")
    return vocab

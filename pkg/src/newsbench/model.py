"""Transformer-encoder classifier over token batches.

Post-norm residual blocks in the order the architecture description gives:
x <- LayerNorm(x + MultiHeadAttention(x)); x <- LayerNorm(x + FFN(x)).
The [CLS] position's last-layer hidden state feeds a single affine head and is
also what the diagnostics project with t-SNE. PAD positions receive exactly
zero attention weight via the masked softmax.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ModelError
from .rng import named_rng
from .tokenizer import TokenBatch

INIT_STD = 0.02
ACTIVATIONS = ("relu", "gelu")


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    n_classes: int
    d_model: int = 128
    n_heads: int = 4
    n_layers: int = 4
    d_ff: int = 512
    dropout_rate: float = 0.1
    max_len: int = 128
    activation: str = "relu"

    def __post_init__(self):
        if self.vocab_size < 4:
            raise ModelError(f"vocab_size must cover the reserved tokens, got {self.vocab_size}")
        if self.n_classes < 2:
            raise ModelError(f"n_classes must be >= 2, got {self.n_classes}")
        if self.d_model <= 0 or self.n_heads <= 0 or self.n_layers <= 0 or self.d_ff <= 0:
            raise ModelError("model dimensions must be positive")
        if self.d_model % self.n_heads != 0:
            raise ModelError(
                f"d_model must be divisible by n_heads, got {self.d_model} / {self.n_heads}"
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ModelError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.max_len < 2:
            raise ModelError(f"max_len must fit [CLS] and [SEP], got {self.max_len}")
        if self.activation not in ACTIVATIONS:
            raise ModelError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "n_classes": self.n_classes,
            "d_model": self.d_model,
            "n_heads": self.n_heads,
            "n_layers": self.n_layers,
            "d_ff": self.d_ff,
            "dropout_rate": self.dropout_rate,
            "max_len": self.max_len,
            "activation": self.activation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def parameter_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Canonical name -> shape map; the single source of truth for state
    construction and checkpoint validation."""
    d, f = config.d_model, config.d_ff
    shapes: dict[str, tuple[int, ...]] = {
        "token_emb": (config.vocab_size, d),
        "pos_emb": (config.max_len, d),
    }
    for i in range(config.n_layers):
        p = f"layers.{i}"
        for proj in ("q", "k", "v", "o"):
            shapes[f"{p}.attn.{proj}_w"] = (d, d)
            shapes[f"{p}.attn.{proj}_b"] = (d,)
        shapes[f"{p}.ln1.gain"] = (d,)
        shapes[f"{p}.ln1.bias"] = (d,)
        shapes[f"{p}.ffn.w1"] = (d, f)
        shapes[f"{p}.ffn.b1"] = (f,)
        shapes[f"{p}.ffn.w2"] = (f, d)
        shapes[f"{p}.ffn.b2"] = (d,)
        shapes[f"{p}.ln2.gain"] = (d,)
        shapes[f"{p}.ln2.bias"] = (d,)
    shapes["head.w"] = (d, config.n_classes)
    shapes["head.b"] = (config.n_classes,)
    return shapes


def _init_param(name: str, shape: tuple[int, ...], seed: int, stream: str, dtype) -> Tensor:
    if name.endswith(".gain"):
        data = np.ones(shape, dtype=dtype)
    elif name.endswith(("_b", ".bias", ".b1", ".b2", "head.b")):
        data = np.zeros(shape, dtype=dtype)
    else:
        rng = named_rng(seed, stream, name)
        data = rng.normal(0.0, INIT_STD, size=shape).astype(dtype)
    return Tensor(data, requires_grad=True)


@dataclass
class ModelState:
    """Configuration plus the named parameter tensors.

    Treated as immutable during inference; the trainer updates parameter
    arrays in place between tapes.
    """

    config: ModelConfig
    params: dict[str, Tensor] = field(repr=False)

    def named_parameters(self) -> Iterator[tuple[str, Tensor]]:
        for name in sorted(self.params):
            yield name, self.params[name]

    def n_parameters(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def check_finite(self) -> None:
        for name, p in self.params.items():
            if not np.all(np.isfinite(p.data)):
                raise ModelError(f"parameter {name} contains non-finite values")


def init_state(config: ModelConfig, seed: int, dtype=ad.DEFAULT_DTYPE) -> ModelState:
    """Scaled-normal (std 0.02) weights, zero biases, unit layer-norm gains."""
    params = {
        name: _init_param(name, shape, seed, "init", dtype)
        for name, shape in parameter_shapes(config).items()
    }
    return ModelState(config=config, params=params)


def replace_head(state: ModelState, n_classes: int, seed: int) -> ModelState:
    """Fresh classifier head for transfer onto a new label set; every encoder
    parameter is shared with (not copied from) the input state."""
    if n_classes < 2:
        raise ModelError(f"n_classes must be >= 2, got {n_classes}")
    config = ModelConfig(**{**state.config.to_dict(), "n_classes": n_classes})
    dtype = state.params["head.w"].data.dtype
    params = dict(state.params)
    shapes = parameter_shapes(config)
    params["head.w"] = _init_param("head.w", shapes["head.w"], seed, "replace-head", dtype)
    params["head.b"] = _init_param("head.b", shapes["head.b"], seed, "replace-head", dtype)
    return ModelState(config=config, params=params)


def _dropout(x, state: ModelState, mode: str, rng) -> Tensor:
    return ad.dropout(x, state.config.dropout_rate, rng=rng, training=mode == "train")


def _attention(x: Tensor, state: ModelState, layer: int, key_mask: np.ndarray,
               mode: str, rng, collect_attention: Optional[list] = None) -> Tensor:
    cfg = state.config
    p = state.params
    b, l, _ = x.shape
    h, dh = cfg.n_heads, cfg.d_head

    def project(kind: str) -> Tensor:
        out = ad.add(ad.matmul(x, p[f"layers.{layer}.attn.{kind}_w"]),
                     p[f"layers.{layer}.attn.{kind}_b"])
        out = ad.reshape(out, (b, l, h, dh))
        return ad.transpose(out, (0, 2, 1, 3))  # [B, H, L, dh]

    q, k, v = project("q"), project("k"), project("v")
    scores = ad.mul(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(dh))
    # zero weight on PAD keys; every row has the [CLS] key unmasked
    probs = ad.softmax(scores, axis=-1, mask=key_mask[:, None, None, :])
    if collect_attention is not None:
        collect_attention.append(probs.data.copy())
    probs = _dropout(probs, state, mode, rng)
    ctx = ad.matmul(probs, v)  # [B, H, L, dh]
    ctx = ad.reshape(ad.transpose(ctx, (0, 2, 1, 3)), (b, l, cfg.d_model))
    out = ad.add(ad.matmul(ctx, p[f"layers.{layer}.attn.o_w"]),
                 p[f"layers.{layer}.attn.o_b"])
    return _dropout(out, state, mode, rng)


def _ffn(x: Tensor, state: ModelState, layer: int, mode: str, rng) -> Tensor:
    p = state.params
    act = ad.relu if state.config.activation == "relu" else ad.gelu
    inner = act(ad.add(ad.matmul(x, p[f"layers.{layer}.ffn.w1"]),
                       p[f"layers.{layer}.ffn.b1"]))
    inner = _dropout(inner, state, mode, rng)
    out = ad.add(ad.matmul(inner, p[f"layers.{layer}.ffn.w2"]),
                 p[f"layers.{layer}.ffn.b2"])
    return _dropout(out, state, mode, rng)


def forward(state: ModelState, batch: TokenBatch, mode: str = "eval",
            rng: Optional[np.random.Generator] = None,
            collect_attention: Optional[list] = None) -> tuple[Tensor, Tensor]:
    """Run the encoder; returns (logits [B, C], cls_hidden [B, d_model]).

    mode "train" activates dropout and requires an rng when dropout_rate > 0;
    mode "eval" is deterministic. Pass a list as `collect_attention` to receive
    each layer's pre-dropout attention weights [B, H, L, L].
    """
    cfg = state.config
    if mode not in ("train", "eval"):
        raise ModelError(f"mode must be 'train' or 'eval', got {mode!r}")
    ids = np.asarray(batch.ids)
    if ids.ndim != 2:
        raise ModelError(f"batch ids must be [B, L], got shape {ids.shape}")
    if ids.shape[1] > cfg.max_len:
        raise ModelError(
            f"sequence length {ids.shape[1]} exceeds model max_len {cfg.max_len}"
        )
    if ids.size and ids.max() >= cfg.vocab_size:
        raise ModelError(
            f"token id {int(ids.max())} out of range for vocab_size {cfg.vocab_size}"
        )
    if mode == "train" and cfg.dropout_rate > 0 and rng is None:
        raise ModelError("train-mode forward with dropout needs an rng")

    p = state.params
    l = ids.shape[1]
    x = ad.embedding_lookup(p["token_emb"], ids)
    pos = ad.embedding_lookup(p["pos_emb"], np.arange(l))
    x = ad.add(x, pos)
    x = _dropout(x, state, mode, rng)

    key_mask = np.asarray(batch.mask)
    for layer in range(cfg.n_layers):
        attn = _attention(x, state, layer, key_mask, mode, rng, collect_attention)
        x = ad.layer_norm(ad.add(x, attn),
                          p[f"layers.{layer}.ln1.gain"], p[f"layers.{layer}.ln1.bias"])
        ff = _ffn(x, state, layer, mode, rng)
        x = ad.layer_norm(ad.add(x, ff),
                          p[f"layers.{layer}.ln2.gain"], p[f"layers.{layer}.ln2.bias"])

    cls_hidden = ad.take(x, 0, axis=1)  # [B, d_model]
    logits = ad.add(ad.matmul(cls_hidden, p["head.w"]), p["head.b"])
    return logits, cls_hidden

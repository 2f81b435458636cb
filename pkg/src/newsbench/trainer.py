"""AdamW training loop with per-epoch checkpoints and validation-F1 early
stopping.

Weight decay is decoupled: the decay term lr*wd*theta is subtracted from the
parameter directly and never enters the moment estimates, so with zero
gradients every parameter contracts by exactly (1 - lr*wd) per step.
"Improvement" for early stopping means strictly greater monitored F1; ties
burn patience. The best checkpoint is the earliest epoch attaining the
maximum validation F1.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .errors import CheckpointError, TrainerError
from .evaluation import EvalReport, evaluate_predictions
from .model import ModelConfig, ModelState, forward, parameter_shapes
from .rng import fisher_yates, named_rng
from .tokenizer import TokenBatch

CHECKPOINT_FORMAT = "newsbench-checkpoint v1"
MONITORS = ("f1_micro", "f1_macro")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 2e-5
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    monitor: str = "f1_micro"

    def __post_init__(self):
        if self.lr <= 0:
            raise TrainerError(f"lr must be positive, got {self.lr}")
        if self.weight_decay < 0:
            raise TrainerError(f"weight_decay must be >= 0, got {self.weight_decay}")
        for name, b in (("beta1", self.beta1), ("beta2", self.beta2)):
            if not 0.0 < b < 1.0:
                raise TrainerError(f"{name} must be in (0, 1), got {b}")
        if self.eps <= 0:
            raise TrainerError(f"eps must be positive, got {self.eps}")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise TrainerError("batch_size and max_epochs must be >= 1")
        if self.patience < 1:
            raise TrainerError(f"patience must be >= 1, got {self.patience}")
        if self.monitor not in MONITORS:
            raise TrainerError(f"monitor must be one of {MONITORS}, got {self.monitor!r}")

    def to_dict(self) -> dict:
        return {
            "lr": self.lr,
            "weight_decay": self.weight_decay,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "seed": self.seed,
            "monitor": self.monitor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class OptimizerState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0


def init_optimizer(state: ModelState) -> OptimizerState:
    return OptimizerState(
        m={name: np.zeros_like(p.data) for name, p in state.named_parameters()},
        v={name: np.zeros_like(p.data) for name, p in state.named_parameters()},
    )


def adamw_step(state: ModelState, opt: OptimizerState, config: TrainConfig) -> None:
    """One in-place AdamW update from the gradients currently on the state."""
    opt.t += 1
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1 ** opt.t
    bc2 = 1.0 - b2 ** opt.t
    for name, p in state.named_parameters():
        g = p.grad
        if g is None:
            continue
        if not np.all(np.isfinite(g)):
            raise TrainerError(f"non-finite gradient for parameter {name}; aborting")
        m = opt.m[name]
        v = opt.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        mhat = m / bc1
        vhat = v / bc2
        p.data -= config.lr * (mhat / (np.sqrt(vhat) + config.eps))
        if config.weight_decay:
            p.data -= (config.lr * config.weight_decay) * p.data


# ---------------------------------------------------------------------------
# checkpoints

def _param_file(name: str) -> str:
    return f"params/{name}.bin"


def _moment_file(kind: str, name: str) -> str:
    return f"optim/{name}.{kind}.bin"


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def save_checkpoint(path, state: ModelState, opt: OptimizerState,
                    train_config: TrainConfig, epoch: int, val_f1: float,
                    labels: Sequence[str]) -> None:
    """Write a checkpoint directory: manifest.json plus one little-endian
    float32 flat file per parameter and per optimizer moment."""
    root = Path(path)
    (root / "params").mkdir(parents=True, exist_ok=True)
    (root / "optim").mkdir(parents=True, exist_ok=True)
    files: dict[str, str] = {}
    for name, p in state.named_parameters():
        blob = np.ascontiguousarray(p.data, dtype="<f4").tobytes()
        rel = _param_file(name)
        (root / rel).write_bytes(blob)
        files[rel] = _sha256(blob)
        for kind, store in (("m", opt.m), ("v", opt.v)):
            blob = np.ascontiguousarray(store[name], dtype="<f4").tobytes()
            rel = _moment_file(kind, name)
            (root / rel).write_bytes(blob)
            files[rel] = _sha256(blob)
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "model_config": state.config.to_dict(),
        "train_config": train_config.to_dict(),
        "epoch": int(epoch),
        "val_f1": float(val_f1),
        "labels": list(labels),
        "optimizer_t": int(opt.t),
        "files": files,
    }
    (root / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


@dataclass
class CheckpointBundle:
    state: ModelState
    optimizer: OptimizerState
    train_config: TrainConfig
    epoch: int
    val_f1: float
    labels: tuple[str, ...]
    path: Path


def _read_array(root: Path, rel: str, expect_hash: str, shape: tuple[int, ...],
                what: str) -> np.ndarray:
    full = root / rel
    if not full.exists():
        raise CheckpointError(f"checkpoint file missing: {rel}")
    blob = full.read_bytes()
    if _sha256(blob) != expect_hash:
        raise CheckpointError(f"checkpoint corruption: hash mismatch for {rel}")
    expected_bytes = int(np.prod(shape)) * 4
    if len(blob) != expected_bytes:
        raise CheckpointError(
            f"shape mismatch for {what}: expected {shape} "
            f"({expected_bytes} bytes), file has {len(blob)} bytes"
        )
    return np.frombuffer(blob, dtype="<f4").reshape(shape).copy()


def load_checkpoint(path) -> CheckpointBundle:
    """Verify hashes and shapes, then rebuild model + optimizer state.

    Raises CheckpointError before returning any partial state."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise CheckpointError(f"no manifest.json under {root}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"unreadable manifest: {exc}") from None
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(
            f"unsupported checkpoint format {manifest.get('format')!r}"
        )
    config = ModelConfig.from_dict(manifest["model_config"])
    train_config = TrainConfig.from_dict(manifest["train_config"])
    files = manifest["files"]
    shapes = parameter_shapes(config)
    params: dict[str, Tensor] = {}
    m: dict[str, np.ndarray] = {}
    v: dict[str, np.ndarray] = {}
    for name, shape in shapes.items():
        rel = _param_file(name)
        if rel not in files:
            raise CheckpointError(f"manifest lists no file for parameter {name}")
        params[name] = Tensor(
            _read_array(root, rel, files[rel], shape, f"parameter {name}"),
            requires_grad=True,
        )
        m[name] = _read_array(root, _moment_file("m", name),
                              files[_moment_file("m", name)], shape,
                              f"optimizer m for {name}")
        v[name] = _read_array(root, _moment_file("v", name),
                              files[_moment_file("v", name)], shape,
                              f"optimizer v for {name}")
    return CheckpointBundle(
        state=ModelState(config=config, params=params),
        optimizer=OptimizerState(m=m, v=v, t=int(manifest["optimizer_t"])),
        train_config=train_config,
        epoch=int(manifest["epoch"]),
        val_f1=float(manifest["val_f1"]),
        labels=tuple(manifest["labels"]),
        path=root,
    )


# ---------------------------------------------------------------------------
# evaluation helpers shared by the loop and the CLI

def predict_batched(state: ModelState, batch: TokenBatch,
                    batch_size: int) -> tuple[np.ndarray, float]:
    """Eval-mode predictions and mean loss over a full split, in chunks."""
    preds = []
    loss_sum = 0.0
    for start in range(0, batch.size, batch_size):
        sub = batch.slice(start, start + batch_size)
        logits, _ = forward(state, sub, mode="eval")
        preds.append(np.argmax(logits.data, axis=1))
        if sub.labels is not None:
            loss_sum += ad.cross_entropy(logits, sub.labels).item() * sub.size
    return np.concatenate(preds), loss_sum / batch.size


def validate(state: ModelState, batch: TokenBatch, labels: Sequence[str],
             batch_size: int) -> EvalReport:
    if batch.labels is None:
        raise TrainerError("validation batch has no labels")
    preds, mean_loss = predict_batched(state, batch, batch_size)
    return evaluate_predictions(batch.labels, preds, labels, mean_loss=mean_loss)


# ---------------------------------------------------------------------------
# history

@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float
    val_f1_micro: float
    val_f1_macro: float
    val_precision_micro: float
    val_recall_micro: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0

    def monitored(self, monitor: str) -> list[float]:
        key = "val_f1_micro" if monitor == "f1_micro" else "val_f1_macro"
        return [getattr(r, key) for r in self.records]


HISTORY_COLUMNS = ["epoch", "train_loss", "val_loss", "val_accuracy",
                   "val_f1_micro", "val_f1_macro", "val_precision_micro",
                   "val_recall_micro"]


def write_history_csv(path, history: TrainHistory) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        for r in history.records:
            writer.writerow([
                r.epoch, f"{r.train_loss:.6f}", f"{r.val_loss:.6f}",
                f"{r.val_accuracy:.6f}", f"{r.val_f1_micro:.6f}",
                f"{r.val_f1_macro:.6f}", f"{r.val_precision_micro:.6f}",
                f"{r.val_recall_micro:.6f}",
            ])


# ---------------------------------------------------------------------------
# the loop

def train(state: ModelState, train_batch: TokenBatch, val_batch: TokenBatch,
          config: TrainConfig, out_dir, labels: Sequence[str],
          validate_fn: Optional[Callable[[ModelState, int], EvalReport]] = None,
          log: Optional[Callable[[str], None]] = None,
          opt: Optional[OptimizerState] = None,
          ) -> tuple[CheckpointBundle, TrainHistory]:
    """Run up to max_epochs of AdamW, checkpointing every epoch, stopping
    after `patience` epochs without strict improvement of the monitored
    validation F1. Returns the best checkpoint (reloaded from disk, so it is
    exactly what a later `evaluate` run would read) and the full history.

    `validate_fn(state, epoch) -> EvalReport` may be injected for testing;
    the default evaluates `val_batch`. Passing `opt` warm-starts the Adam
    moments (the epoch counter and early-stopping state still start fresh).
    """
    if train_batch.size == 0:
        raise TrainerError("training split is empty")
    if val_batch.size == 0:
        raise TrainerError("validation split is empty")
    if train_batch.labels is None:
        raise TrainerError("training batch has no labels")
    if validate_fn is None:
        def validate_fn(s, _epoch):
            return validate(s, val_batch, labels, config.batch_size)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if opt is None:
        opt = init_optimizer(state)
    history = TrainHistory()
    best_f1 = -math.inf
    epochs_since_best = 0

    for epoch in range(1, config.max_epochs + 1):
        order = fisher_yates(train_batch.size, named_rng(config.seed, "shuffle", epoch))
        shuffled = train_batch.take(order)
        drop_rng = named_rng(config.seed, "dropout", epoch)
        loss_sum = 0.0
        for start in range(0, shuffled.size, config.batch_size):
            sub = shuffled.slice(start, start + config.batch_size)
            with Tape() as tape:
                logits, _ = forward(state, sub, mode="train", rng=drop_rng)
                loss = ad.cross_entropy(logits, sub.labels)
            tape.backward(loss)
            adamw_step(state, opt, config)
            state.zero_grads()
            loss_sum += loss.item() * sub.size
        train_loss = loss_sum / shuffled.size

        report = validate_fn(state, epoch)
        monitored = report.micro_f1 if config.monitor == "f1_micro" else report.macro_f1
        history.records.append(EpochRecord(
            epoch=epoch,
            train_loss=train_loss,
            val_loss=report.mean_loss if report.mean_loss is not None else float("nan"),
            val_accuracy=report.accuracy,
            val_f1_micro=report.micro_f1,
            val_f1_macro=report.macro_f1,
            val_precision_micro=report.micro_precision,
            val_recall_micro=report.micro_recall,
        ))

        try:
            save_checkpoint(out / f"epoch_{epoch:03d}", state, opt, config,
                            epoch, monitored, labels)
        except OSError as exc:
            history.stopped_epoch = epoch
            raise TrainerError(f"checkpoint write failed at epoch {epoch}: {exc}")

        if monitored > best_f1:
            best_f1 = monitored
            history.best_epoch = epoch
            epochs_since_best = 0
        else:
            epochs_since_best += 1
        if log is not None:
            log(f"epoch {epoch}: train_loss {train_loss:.4f} "
                f"val_f1 {monitored:.4f} best_epoch {history.best_epoch}")
        if epochs_since_best >= config.patience:
            history.stopped_epoch = epoch
            break
    else:
        history.stopped_epoch = config.max_epochs

    write_history_csv(out / "history.csv", history)
    best = load_checkpoint(out / f"epoch_{history.best_epoch:03d}")
    # leave the in-memory state at the best epoch, not the last one
    for name, p in state.named_parameters():
        p.data = best.state.params[name].data
    return best, history

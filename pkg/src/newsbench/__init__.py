"""newsbench: a desk-scale news-classification pipeline.

A word-level tokenizer, a from-scratch transformer encoder on a minimal
reverse-mode autodiff tape, AdamW training with early stopping and
checkpointing, micro/macro evaluation, MC-dropout certainty, exact t-SNE,
and majority-vote ensembling — all exposed through the ``newsbench`` CLI.

Submodules are imported lazily: the CLI must be importable before numpy so
that ``--threads`` can still cap the BLAS thread pools via the environment.
"""
from __future__ import annotations

import importlib

__version__ = "0.1.0"

# public name -> owning submodule
_EXPORTS = {
    # corpus
    "Article": "corpus",
    "Dataset": "corpus",
    "RuleSet": "corpus",
    "SplitSet": "corpus",
    "BalanceReport": "corpus",
    "CategoryStats": "corpus",
    "load_dataset": "corpus",
    "save_dataset": "corpus",
    "load_stopwords": "corpus",
    "compute_stats": "corpus",
    "balance_ratio": "corpus",
    "bootstrap_label": "corpus",
    "split": "corpus",
    "write_split_manifest": "corpus",
    "load_split_manifest": "corpus",
    # tokenizer
    "Vocabulary": "tokenizer",
    "TokenBatch": "tokenizer",
    "build_vocab": "tokenizer",
    "encode": "tokenizer",
    "encode_batch": "tokenizer",
    "decode": "tokenizer",
    "save_vocab": "tokenizer",
    "load_vocab": "tokenizer",
    # autodiff
    "Tensor": "autodiff",
    "Tape": "autodiff",
    # model
    "ModelConfig": "model",
    "ModelState": "model",
    "init_state": "model",
    "replace_head": "model",
    "forward": "model",
    # trainer
    "TrainConfig": "trainer",
    "TrainHistory": "trainer",
    "CheckpointBundle": "trainer",
    "train": "trainer",
    "validate": "trainer",
    "predict_batched": "trainer",
    "save_checkpoint": "trainer",
    "load_checkpoint": "trainer",
    # evaluation
    "ConfusionMatrix": "evaluation",
    "EvalReport": "evaluation",
    "confusion": "evaluation",
    "metrics": "evaluation",
    "evaluate_predictions": "evaluation",
    # diagnostics
    "CertaintyRecord": "diagnostics",
    "Projection2D": "diagnostics",
    "mc_dropout": "diagnostics",
    "extract_cls": "diagnostics",
    "tsne": "diagnostics",
    # ensemble
    "EnsembleResult": "ensemble",
    "vote": "ensemble",
    "vote_matrix": "ensemble",
    "ensemble_eval": "ensemble",
    "simulate_members": "ensemble",
    # rng
    "named_rng": "rng",
    "fisher_yates": "rng",
    # errors
    "NewsbenchError": "errors",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name: str):
    try:
        module_name = _EXPORTS[name]
    except KeyError:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}") from None
    module = importlib.import_module(f".{module_name}", __name__)
    value = getattr(module, name)
    globals()[name] = value  # cache for the next lookup
    return value


def __dir__():
    return sorted(set(globals()) | set(__all__))

"""Command-line entry point: the full pipeline as subcommands.

    newsbench stats       --dataset corpus.jsonl --out runs/stats
    newsbench bootstrap   --dataset corpus.jsonl --rules rules.json --out runs/boot
    newsbench split       --dataset corpus.jsonl --seed 17 --out runs/split
    newsbench build-vocab --dataset corpus.jsonl --split runs/split/split.json --out runs/vocab
    newsbench train       --dataset ... --split ... --vocab ... --seed 0 --out runs/train
    newsbench evaluate    --checkpoint runs/train/epoch_007 --dataset ... --out runs/eval
    newsbench mc-dropout  --checkpoint ... --seed 0 --out runs/mc
    newsbench tsne        --checkpoint ... --seed 0 --out runs/tsne
    newsbench ensemble    --member ckpt1 --member ckpt2 --seed 0 --out runs/ens

Configuration comes from an optional JSON file (``--config``) mirroring the
defaults below; command-line flags override file values.  Exit codes: 0 on
success, 1 on a runtime failure, 2 on a usage error.  Errors are printed to
stderr as a single line ``error [module]: message``.

Only the standard library is imported at module level: ``--threads`` must cap
the BLAS/numba thread pools through environment variables, and those are read
once when numpy is first imported.  The pipeline modules are therefore
imported inside the command handlers.
"""
from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from pathlib import Path

from .errors import ConfigError, NewsbenchError

# Defaults mirror the reference pipeline where it pins a value: lr 2e-5,
# batch 32, max 50 epochs, patience 5, max_len 128, split ratios .5/.25/.25,
# 23 categories.  "model.n_classes" is only a documented default; `train`
# always derives the class count from the dataset's labels.
DEFAULTS = {
    "dataset": None,
    "rules": None,
    "vocab": None,
    "checkpoint": None,
    "members": [],
    "split": None,
    "stopwords": None,
    "out": None,
    "seed": None,
    "partition": "test",
    "ratios": [0.5, 0.25, 0.25],
    "stratify": False,
    "max_vocab": 8000,
    "eval_batch_size": 64,
    "model": {
        "n_classes": 23,
        "d_model": 128,
        "n_heads": 4,
        "n_layers": 4,
        "d_ff": 512,
        "dropout_rate": 0.1,
        "max_len": 128,
        "activation": "relu",
    },
    "train": {
        "lr": 2e-5,
        "weight_decay": 0.01,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
        "batch_size": 32,
        "max_epochs": 50,
        "patience": 5,
        "monitor": "f1_micro",
    },
    "diagnostics": {
        "mc_samples": 50,
        "perplexity": 30.0,
        "iterations": 1000,
        "learning_rate": 200.0,
        "exaggeration": 12.0,
        "exaggeration_iters": 250,
    },
}

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "NUMBA_NUM_THREADS",
)

PARTITIONS = ("train", "validation", "test", "all")


def _oneline(exc: BaseException) -> str:
    return " ".join(str(exc).split())


class _Parser(argparse.ArgumentParser):
    """argparse with single-line machine-parsable usage errors."""

    def error(self, message):
        print(f"error [cli]: {message}", file=sys.stderr)
        self.exit(2)


# ---------------------------------------------------------------------------
# run config

def _merge_section(base: dict, override: dict, context: str) -> None:
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {context}{key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {context}{key!r} must be an object")
            _merge_section(base[key], value, context=f"{key}.")
        else:
            base[key] = value


def load_run_config(path) -> dict:
    """Read a JSON run config and merge it over the documented defaults."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            obj = json.loads(Path(path).read_text("utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {_oneline(exc)}") from exc
        if not isinstance(obj, dict):
            raise ConfigError(f"config {path}: expected a JSON object")
        _merge_section(cfg, obj, context="")
    return cfg


def _pick(flag_value, cfg_value):
    return cfg_value if flag_value is None else flag_value


def _require(value, what: str):
    if value is None:
        raise ConfigError(f"missing required {what}")
    return value


def _require_seed(args, cfg) -> int:
    seed = _pick(getattr(args, "seed", None), cfg["seed"])
    if seed is None:
        raise ConfigError("this command is stochastic; --seed (or config seed) is required")
    return int(seed)


def _input_path(value, what: str) -> Path:
    path = Path(_require(value, what))
    if not path.exists():
        raise ConfigError(f"{what} {str(path)!r} does not exist")
    return path


def _out_dir(args, cfg) -> Path:
    out = Path(_require(_pick(args.out, cfg["out"]), "--out directory"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _ratios(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated fractions")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


# ---------------------------------------------------------------------------
# shared loading steps

def _load_dataset(args, cfg):
    from . import corpus

    path = _input_path(_pick(args.dataset, cfg["dataset"]), "dataset")
    return corpus.load_dataset(path)


def _select_articles(args, cfg, dataset):
    """Apply the split manifest and partition choice, if any."""
    from . import corpus

    split_path = _pick(getattr(args, "split", None), cfg["split"])
    partition = _pick(getattr(args, "partition", None), cfg["partition"])
    if partition not in PARTITIONS:
        raise ConfigError(f"unknown partition {partition!r}")
    if split_path is None:
        return dataset.articles, "all"
    manifest = corpus.load_split_manifest(_input_path(split_path, "split manifest"))
    if partition == "all":
        ids = manifest.train + manifest.validation + manifest.test
    else:
        ids = manifest.partition(partition)
    return dataset.subset(ids), partition


def _load_checkpoint_and_vocab(args, cfg):
    from . import tokenizer, trainer

    ckpt = _pick(getattr(args, "checkpoint", None), cfg["checkpoint"])
    if ckpt is None:
        raise ConfigError("a checkpoint path is required (--checkpoint or config)")
    bundle = trainer.load_checkpoint(_input_path(ckpt, "checkpoint"))
    vocab = tokenizer.load_vocab(_input_path(_pick(args.vocab, cfg["vocab"]), "vocab"))
    if len(vocab) != bundle.state.config.vocab_size:
        raise ConfigError(
            f"vocab has {len(vocab)} entries but the checkpoint expects "
            f"{bundle.state.config.vocab_size}"
        )
    return bundle, vocab


def _encode_articles(vocab, articles, max_len, labels=None):
    from . import tokenizer

    index = None if labels is None else {name: i for i, name in enumerate(labels)}
    return tokenizer.encode_batch(vocab, articles, max_len=max_len, label_index=index)


# ---------------------------------------------------------------------------
# subcommands

def cmd_stats(args, cfg) -> int:
    from . import corpus

    dataset = _load_dataset(args, cfg)
    out = _out_dir(args, cfg)
    stopwords = corpus.load_stopwords(_pick(args.stopwords, cfg["stopwords"]))

    rows = corpus.compute_stats(dataset, stopwords)
    corpus.write_stats_csv(rows, out / "stats.csv")
    print(f"articles {len(dataset)}  categories {len(dataset.labels)}")

    if len(dataset.labels) >= 2:
        report = corpus.balance_ratio(dataset)
        payload = {
            "ratio": report.ratio,
            "max_category": report.max_category,
            "max_items": report.max_items,
            "min_category": report.min_category,
            "min_items": report.min_items,
            "bound": corpus.BALANCE_BOUND,
            "within_bound": report.within_bound,
        }
        (out / "balance.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")
        flag = "yes" if report.within_bound else "NO"
        print(f"balance ratio {report.ratio:.2f} "
              f"({report.max_items} {report.max_category} / "
              f"{report.min_items} {report.min_category}); within 1:4 bound: {flag}")
    else:
        print("balance ratio: n/a (fewer than 2 labeled categories)")
    return 0


def cmd_bootstrap(args, cfg) -> int:
    from . import corpus

    dataset = _load_dataset(args, cfg)
    rules = corpus.RuleSet.from_file(
        _input_path(_pick(args.rules, cfg["rules"]), "rule file"))
    out = _out_dir(args, cfg)

    matched = 0
    per_category: dict[str, int] = {c: 0 for c in rules.patterns}
    with open(out / "candidates.jsonl", "w", encoding="utf-8") as fh:
        for art in dataset.articles:
            candidates = corpus.bootstrap_label(rules, art)
            if candidates:
                matched += 1
            for cand in candidates:
                per_category[cand.category] += 1
            fh.write(json.dumps({
                "id": art.id,
                "candidates": [
                    {"category": c.category, "start": c.start,
                     "end": c.end, "text": c.text}
                    for c in candidates
                ],
            }, sort_keys=True) + "\n")

    (out / "bootstrap_summary.json").write_text(
        json.dumps({"articles": len(dataset), "matched": matched,
                    "hits_per_category": per_category},
                   indent=2, sort_keys=True) + "\n", "utf-8")
    print(f"matched {matched}/{len(dataset)} articles")
    for category in sorted(per_category):
        print(f"category {category}: {per_category[category]} hits")
    return 0


def cmd_split(args, cfg) -> int:
    from . import corpus

    dataset = _load_dataset(args, cfg)
    seed = _require_seed(args, cfg)
    ratios = tuple(_pick(args.ratios, cfg["ratios"]))
    stratify = bool(_pick(args.stratify, cfg["stratify"]))
    out = _out_dir(args, cfg)

    split_set = corpus.split(dataset, seed=seed, ratios=ratios, stratify=stratify)
    corpus.write_split_manifest(split_set, out / "split.json")
    print(f"train {len(split_set.train)}  validation {len(split_set.validation)}  "
          f"test {len(split_set.test)}  (seed {seed})")
    return 0


def cmd_build_vocab(args, cfg) -> int:
    from . import corpus, tokenizer

    dataset = _load_dataset(args, cfg)
    out = _out_dir(args, cfg)
    max_vocab = int(_pick(args.max_vocab, cfg["max_vocab"]))

    split_path = _pick(args.split, cfg["split"])
    if split_path is not None:
        manifest = corpus.load_split_manifest(_input_path(split_path, "split manifest"))
        articles = dataset.subset(manifest.train)
        source = f"train partition ({len(articles)} articles)"
    else:
        articles = dataset.articles
        source = f"whole dataset ({len(articles)} articles)"

    vocab = tokenizer.build_vocab(articles, max_size=max_vocab)
    tokenizer.save_vocab(vocab, out / "vocab.txt")
    print(f"vocab {len(vocab)} tokens from {source}")
    return 0


def cmd_train(args, cfg) -> int:
    from . import corpus, model, tokenizer, trainer

    dataset = _load_dataset(args, cfg)
    split_path = _input_path(_pick(args.split, cfg["split"]), "split manifest")
    manifest = corpus.load_split_manifest(split_path)
    vocab = tokenizer.load_vocab(_input_path(_pick(args.vocab, cfg["vocab"]), "vocab"))
    seed = _require_seed(args, cfg)
    out = _out_dir(args, cfg)

    labels = list(dataset.labels)
    if len(labels) < 2:
        raise ConfigError(f"training needs at least 2 labeled categories, got {len(labels)}")
    if args.n_classes is not None and args.n_classes != len(labels):
        raise ConfigError(
            f"--n-classes {args.n_classes} contradicts the dataset's "
            f"{len(labels)} labels")

    m = cfg["model"]
    model_config = model.ModelConfig(
        vocab_size=len(vocab),
        n_classes=len(labels),
        d_model=int(_pick(args.d_model, m["d_model"])),
        n_heads=int(_pick(args.n_heads, m["n_heads"])),
        n_layers=int(_pick(args.n_layers, m["n_layers"])),
        d_ff=int(_pick(args.d_ff, m["d_ff"])),
        dropout_rate=float(_pick(args.dropout, m["dropout_rate"])),
        max_len=int(_pick(args.max_len, m["max_len"])),
        activation=_pick(args.activation, m["activation"]),
    )
    t = cfg["train"]
    train_config = trainer.TrainConfig(
        lr=float(_pick(args.lr, t["lr"])),
        weight_decay=float(_pick(args.weight_decay, t["weight_decay"])),
        beta1=float(t["beta1"]),
        beta2=float(t["beta2"]),
        eps=float(t["eps"]),
        batch_size=int(_pick(args.batch_size, t["batch_size"])),
        max_epochs=int(_pick(args.max_epochs, t["max_epochs"])),
        patience=int(_pick(args.patience, t["patience"])),
        seed=seed,
        monitor=_pick(args.monitor, t["monitor"]),
    )

    index = {name: i for i, name in enumerate(labels)}
    train_batch = _encode_batch_of(vocab, dataset, manifest.train,
                                   model_config.max_len, index)
    val_batch = _encode_batch_of(vocab, dataset, manifest.validation,
                                 model_config.max_len, index)

    opt = None
    if args.resume is not None:
        resumed = trainer.load_checkpoint(_input_path(args.resume, "resume checkpoint"))
        if resumed.state.config != model_config:
            raise ConfigError(
                "resume checkpoint model config does not match this run "
                f"({resumed.state.config.to_dict()} vs {model_config.to_dict()})")
        state, opt = resumed.state, resumed.optimizer
        print(f"resumed from {args.resume} (epoch {resumed.epoch})")
    else:
        state = model.init_state(model_config, seed=seed)

    print(f"model {state.n_parameters()} parameters, {len(labels)} classes, "
          f"{train_batch.size} train / {val_batch.size} validation articles")
    bundle, history = trainer.train(
        state, train_batch, val_batch, train_config, out, labels,
        log=print, opt=opt)

    summary = {
        "best_epoch": history.best_epoch,
        "stopped_epoch": history.stopped_epoch,
        "best_val_f1": bundle.val_f1,
        "monitor": train_config.monitor,
        "checkpoint": str(bundle.path),
    }
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", "utf-8")
    print(f"best epoch {history.best_epoch} "
          f"val_{train_config.monitor} {bundle.val_f1:.4f}; "
          f"stopped after epoch {history.stopped_epoch}")
    return 0


def _encode_batch_of(vocab, dataset, ids, max_len, index):
    from . import tokenizer

    return tokenizer.encode_batch(vocab, dataset.subset(ids),
                                  max_len=max_len, label_index=index)


def cmd_evaluate(args, cfg) -> int:
    from . import evaluation, trainer

    bundle, vocab = _load_checkpoint_and_vocab(args, cfg)
    dataset = _load_dataset(args, cfg)
    articles, partition = _select_articles(args, cfg, dataset)
    out = _out_dir(args, cfg)
    batch_size = int(_pick(args.eval_batch_size, cfg["eval_batch_size"]))

    labels = list(bundle.labels)
    batch = _encode_articles(vocab, articles, bundle.state.config.max_len, labels)
    preds, mean_loss = trainer.predict_batched(bundle.state, batch, batch_size)
    cm = evaluation.confusion(batch.labels, preds, labels)
    report = evaluation.metrics(cm, mean_loss=mean_loss)

    evaluation.write_report_json(out / "report.json", report)
    evaluation.write_confusion_csv(out / "confusion.csv", cm)
    evaluation.write_confusion_csv(out / "confusion_normalized.csv", cm, normalized=True)
    evaluation.write_per_category_csv(out / "per_category.csv", report)
    print(f"{partition} n {report.n_examples}  accuracy {report.accuracy:.4f}  "
          f"f1_micro {report.micro_f1:.4f}  f1_macro {report.macro_f1:.4f}")
    return 0


def cmd_mc_dropout(args, cfg) -> int:
    from . import diagnostics

    bundle, vocab = _load_checkpoint_and_vocab(args, cfg)
    dataset = _load_dataset(args, cfg)
    articles, partition = _select_articles(args, cfg, dataset)
    seed = _require_seed(args, cfg)
    out = _out_dir(args, cfg)
    samples = int(_pick(args.samples, cfg["diagnostics"]["mc_samples"]))

    labels = list(bundle.labels)
    batch = _encode_articles(vocab, articles, bundle.state.config.max_len, labels)
    records = diagnostics.mc_dropout(bundle.state, batch, labels,
                                     T=samples, seed=seed,
                                     article_ids=[a.id for a in articles])
    diagnostics.write_certainty_csv(out / "certainty.csv", records)
    if args.svg:
        diagnostics.write_certainty_svg(out / "certainty.svg", records, seed=seed)

    correct, incorrect = diagnostics.group_by_correct(records)
    print(f"{partition} n {len(records)}  T {samples}")
    for name, group in (("correct", correct), ("incorrect", incorrect)):
        if group:
            mean = sum(r.certainty for r in group) / len(group)
            print(f"{name} n {len(group)}  mean certainty {mean:.4f}")
        else:
            print(f"{name} n 0")
    return 0


def cmd_tsne(args, cfg) -> int:
    from . import diagnostics

    bundle, vocab = _load_checkpoint_and_vocab(args, cfg)
    dataset = _load_dataset(args, cfg)
    articles, partition = _select_articles(args, cfg, dataset)
    seed = _require_seed(args, cfg)
    out = _out_dir(args, cfg)
    d = cfg["diagnostics"]

    batch = _encode_articles(vocab, articles, bundle.state.config.max_len)
    points = diagnostics.extract_cls(bundle.state, batch)
    labels = [a.category if a.category is not None else "unlabeled"
              for a in articles]
    projection = diagnostics.tsne(
        points, labels, seed=seed,
        perplexity=float(_pick(args.perplexity, d["perplexity"])),
        iterations=int(_pick(args.iterations, d["iterations"])),
        lr=float(_pick(args.tsne_lr, d["learning_rate"])),
        exaggeration=float(_pick(args.exaggeration, d["exaggeration"])),
        exaggeration_iters=int(_pick(args.exaggeration_iters, d["exaggeration_iters"])),
    )
    diagnostics.write_projection_csv(out / "projection.csv", projection,
                                     ids=[a.id for a in articles])
    if args.svg:
        diagnostics.write_projection_svg(out / "projection.svg", projection)
    print(f"{partition} n {len(articles)}  "
          f"kl {projection.kl_initial:.4f} -> {projection.kl_final:.4f}  "
          f"backend {projection.hyperparams['backend']}")
    return 0


def cmd_ensemble(args, cfg) -> int:
    from . import ensemble, evaluation, tokenizer, trainer
    from .errors import EnsembleError

    member_paths = list(args.member or [])
    if args.members is not None:
        listing = _input_path(args.members, "member list")
        try:
            entries = json.loads(listing.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot read member list {listing}: {_oneline(exc)}")
        if not isinstance(entries, list) or not all(isinstance(e, str) for e in entries):
            raise ConfigError(f"member list {listing}: expected a JSON array of paths")
        member_paths.extend(entries)
    if not member_paths:
        member_paths = list(cfg["members"])
    if not member_paths:
        raise ConfigError("ensemble needs at least one --member checkpoint")

    seed = _require_seed(args, cfg)
    out = _out_dir(args, cfg)
    batch_size = int(_pick(args.eval_batch_size, cfg["eval_batch_size"]))

    bundles = [trainer.load_checkpoint(_input_path(p, f"member M{i + 1}"))
               for i, p in enumerate(member_paths)]
    labels = list(bundles[0].labels)
    for i, b in enumerate(bundles[1:], start=2):
        if list(b.labels) != labels:
            raise EnsembleError(
                f"member M{i} ({member_paths[i - 1]}) was trained on different labels")

    vocab = tokenizer.load_vocab(_input_path(_pick(args.vocab, cfg["vocab"]), "vocab"))
    for i, b in enumerate(bundles, start=1):
        if len(vocab) != b.state.config.vocab_size:
            raise EnsembleError(
                f"member M{i} ({member_paths[i - 1]}) expects a vocab of "
                f"{b.state.config.vocab_size} entries, got {len(vocab)}")

    dataset = _load_dataset(args, cfg)
    articles, partition = _select_articles(args, cfg, dataset)
    batch = _encode_articles(vocab, articles, bundles[0].state.config.max_len, labels)

    result = ensemble.ensemble_eval([b.state for b in bundles], batch, labels,
                                    seed=seed, batch_size=batch_size)
    ensemble.write_ensemble_csv(out / "ensemble.csv", result)
    evaluation.write_report_json(out / "report.json", result.ensemble_report)

    for name, path in zip(result.member_names, member_paths):
        print(f"{name} = {path}")
    members = "  ".join(f"{n} {r.micro_f1:.4f}"
                        for n, r in zip(result.member_names, result.member_reports))
    print(f"{partition} n {batch.size}  {members}")
    print(f"ensemble f1_micro {result.ensemble_report.micro_f1:.4f}  "
          f"accuracy {result.ensemble_report.accuracy:.4f}")
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="FILE",
                        help="JSON run config; flags override file values")
    common.add_argument("--out", metavar="DIR",
                        help="output directory (created if missing)")
    common.add_argument("--threads", type=int, metavar="N",
                        help="cap BLAS/numba thread pools")

    data = _Parser(add_help=False)
    data.add_argument("--dataset", metavar="JSONL", help="dataset file")

    seeded = _Parser(add_help=False)
    seeded.add_argument("--seed", type=int, help="RNG seed (required)")

    enc = _Parser(add_help=False)
    enc.add_argument("--vocab", metavar="FILE", help="vocabulary file")
    enc.add_argument("--split", metavar="FILE", help="split manifest")
    enc.add_argument("--partition", choices=PARTITIONS,
                     help="which partition to use (default test; 'all' without a manifest)")
    enc.add_argument("--checkpoint", metavar="DIR", help="checkpoint directory")
    enc.add_argument("--eval-batch-size", type=int, dest="eval_batch_size",
                     help="forward-pass chunk size")

    parser = _Parser(prog="newsbench",
                     description="Pharma-news classification pipeline.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("stats", parents=[common, data],
                       help="per-category corpus statistics and balance audit")
    p.add_argument("--stopwords", metavar="FILE", help="one stopword per line")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("bootstrap", parents=[common, data],
                       help="regex rule matching for label bootstrapping")
    p.add_argument("--rules", metavar="FILE", help="JSON category -> [pattern, ...]")
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("split", parents=[common, data, seeded],
                       help="seeded train/validation/test split")
    p.add_argument("--ratios", type=_ratios, metavar="A,B,C",
                   help="three fractions summing to 1 (default 0.5,0.25,0.25)")
    p.add_argument("--stratify", action=argparse.BooleanOptionalAction,
                   default=None, help="split each category separately")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("build-vocab", parents=[common, data],
                       help="frequency vocabulary from the training split")
    p.add_argument("--split", metavar="FILE",
                   help="split manifest; restricts counting to the train partition")
    p.add_argument("--max-vocab", type=int, dest="max_vocab",
                   help="vocabulary size cap including reserved tokens")
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("train", parents=[common, data, seeded],
                       help="train the encoder classifier")
    p.add_argument("--split", metavar="FILE", help="split manifest")
    p.add_argument("--vocab", metavar="FILE", help="vocabulary file")
    p.add_argument("--resume", metavar="DIR",
                   help="warm-start weights and optimizer from a checkpoint")
    p.add_argument("--n-classes", type=int, dest="n_classes")
    p.add_argument("--d-model", type=int, dest="d_model")
    p.add_argument("--n-heads", type=int, dest="n_heads")
    p.add_argument("--n-layers", type=int, dest="n_layers")
    p.add_argument("--d-ff", type=int, dest="d_ff")
    p.add_argument("--dropout", type=float)
    p.add_argument("--max-len", type=int, dest="max_len")
    p.add_argument("--activation", choices=("relu", "gelu"))
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", type=float, dest="weight_decay")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--max-epochs", type=int, dest="max_epochs")
    p.add_argument("--patience", type=int)
    p.add_argument("--monitor", choices=("f1_micro", "f1_macro"))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common, data, enc],
                       help="metrics and confusion matrix for a checkpoint")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("mc-dropout", parents=[common, data, enc, seeded],
                       help="Monte Carlo dropout certainty estimates")
    p.add_argument("--samples", type=int, metavar="T",
                   help="number of stochastic forward passes (default 50)")
    p.add_argument("--svg", action="store_true", help="also write a strip plot")
    p.set_defaults(func=cmd_mc_dropout)

    p = sub.add_parser("tsne", parents=[common, data, enc, seeded],
                       help="t-SNE projection of [CLS] embeddings")
    p.add_argument("--perplexity", type=float)
    p.add_argument("--iterations", type=int)
    p.add_argument("--tsne-lr", type=float, dest="tsne_lr")
    p.add_argument("--exaggeration", type=float)
    p.add_argument("--exaggeration-iters", type=int, dest="exaggeration_iters")
    p.add_argument("--svg", action="store_true", help="also write a scatter plot")
    p.set_defaults(func=cmd_tsne)

    p = sub.add_parser("ensemble", parents=[common, data, enc, seeded],
                       help="majority-vote ensemble of member checkpoints")
    p.add_argument("--member", action="append", metavar="DIR",
                   help="member checkpoint (repeatable)")
    p.add_argument("--members", metavar="FILE",
                   help="JSON array of member checkpoint paths")
    p.set_defaults(func=cmd_ensemble)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error [cli]: --threads must be at least 1", file=sys.stderr)
            return 2
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)
    try:
        cfg = load_run_config(args.config)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"error [cli]: {_oneline(exc)}", file=sys.stderr)
        return 2
    except NewsbenchError as exc:
        print(f"error [{exc.module}]: {_oneline(exc)}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

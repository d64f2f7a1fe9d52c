"""Command-line entry points.

Subcommands: `kb-train` (KB embeddings), `train` (episodic meta-training),
`eval` (fixed-support evaluation), `synth` (synthetic benchmark).

Exit codes are a stable contract: 0 success, 2 I/O or parse errors,
3 configuration errors, 4 ineligible data, 5 protocol violations.
"""

from __future__ import annotations

import argparse
import os
import sys

from .encoding import Vocabulary
from .episodes import load_corpus, read_splits, read_support, split_task_sets
from .errors import (
    CannotCorruptError,
    ConfigError,
    CorpusParseError,
    DataError,
    DimensionError,
    EncodingError,
    EvaluationError,
    KgmetaError,
    OverlapError,
    SamplingError,
    UnknownIdError,
)
from .kb_embedding import (
    DistMultEmbedder,
    load_embeddings,
    load_triples,
    save_embeddings,
)
from .manifest import RunManifest, parse_config_file, resolve_config
from .model import load_checkpoint, relation_param_counts, save_checkpoint
from .retrieval import build_surface_index
from .synth import SynthConfig, generate_benchmark
from .training import TrainConfig, evaluate, train_meta

EXIT_OK = 0
EXIT_IO = 2
EXIT_CONFIG = 3
EXIT_DATA = 4
EXIT_PROTOCOL = 5

_EXIT_BY_ERROR: list[tuple[type, int]] = [
    (OverlapError, EXIT_PROTOCOL),
    (CorpusParseError, EXIT_IO),
    (SamplingError, EXIT_DATA),
    (DataError, EXIT_DATA),
    (CannotCorruptError, EXIT_DATA),
    (EncodingError, EXIT_DATA),
    (DimensionError, EXIT_CONFIG),
    (UnknownIdError, EXIT_CONFIG),
    (EvaluationError, EXIT_CONFIG),
    (ConfigError, EXIT_CONFIG),
    (KgmetaError, EXIT_CONFIG),
]


def _exit_code(exc: Exception) -> int:
    for err_type, code in _EXIT_BY_ERROR:
        if isinstance(exc, err_type):
            return code
    return EXIT_IO if isinstance(exc, OSError) else EXIT_CONFIG


def _env_seed() -> int | None:
    raw = os.environ.get("KGMETA_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"KGMETA_SEED must be an integer, got {raw!r}") from exc


def _require_file(path: str) -> None:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such file: {path}")


def _loss_csv(losses: list[float], unit: str) -> str:
    lines = [f"{unit},loss"]
    lines += [f"{i},{v:.17g}" for i, v in enumerate(losses)]
    return "\n".join(lines) + "\n"


def cmd_kb_train(args: argparse.Namespace) -> int:
    _require_file(args.triples)
    defaults = {"d2": 100, "gamma": 1.0, "epochs": 200, "lr": 0.05,
                "negatives": 1, "seed": 0}
    flags = {k: getattr(args, k) for k in defaults}
    values, provenance = resolve_config(defaults, {}, flags,
                                        env_values={"seed": _env_seed()})
    out = args.out
    loss_path = out + ".loss.csv"
    # artifact paths are recorded relative to the manifest's directory so
    # identical runs into different directories stay byte-identical
    manifest = RunManifest.build(
        command="kb-train", seed=values["seed"], values=values,
        provenance=provenance, inputs={"triples": args.triples},
        artifacts={"embeddings": os.path.basename(out),
                   "loss_csv": os.path.basename(loss_path)})
    manifest.save(out + ".manifest.json")

    store = load_triples(args.triples)
    est = DistMultEmbedder(d2=values["d2"], gamma=values["gamma"],
                           epochs=values["epochs"], lr=values["lr"],
                           negatives_per_positive=values["negatives"],
                           seed=values["seed"])
    est.fit(store)
    save_embeddings(est.embeddings_, out)
    with open(loss_path, "w", encoding="utf-8") as fh:
        fh.write(_loss_csv(est.loss_history_, "epoch"))
    print(f"trained {store.n_entities} entities / {store.n_relations} relations "
          f"for {values['epochs']} epochs; final loss "
          f"{est.loss_history_[-1] if est.loss_history_ else 0.0:.6g}")
    return EXIT_OK


_TRAIN_DEFAULTS = {
    "C": 2, "N": 5, "n": 10, "episodes": 500, "lr": 0.01, "d1": 16,
    "d2": None, "H": 8, "seed": 0, "variant": "full", "freeze_kb": True,
    "generator_bias": False, "balanced_queries": False,
}


def cmd_train(args: argparse.Namespace) -> int:
    for path in (args.corpus, args.kb, args.triple_store):
        _require_file(path)
    if args.config:
        _require_file(args.config)
    file_values = parse_config_file(args.config) if args.config else {}
    flags = {k: getattr(args, k) for k in _TRAIN_DEFAULTS}
    values, provenance = resolve_config(_TRAIN_DEFAULTS, file_values, flags,
                                        env_values={"seed": _env_seed()})
    if values["variant"] not in ("full", "ablation", "replacement"):
        raise ConfigError(f"unknown variant {values['variant']!r}")

    os.makedirs(args.out_dir, exist_ok=True)
    inputs = {"corpus": args.corpus, "kb": args.kb}
    if args.config:
        inputs["config"] = args.config
    if args.splits:
        _require_file(args.splits)
        inputs["splits"] = args.splits
    artifacts = {"checkpoint": "checkpoint.txt", "vocab": "vocab.txt",
                 "loss_csv": "loss.csv"}
    paths = {k: os.path.join(args.out_dir, v) for k, v in artifacts.items()}
    kb = load_embeddings(args.kb)
    store = load_triples(args.triple_store)
    inputs["triple_store"] = args.triple_store

    cfg = TrainConfig(C=values["C"], N=values["N"], n=values["n"],
                      episodes=values["episodes"], lr=values["lr"],
                      d1=values["d1"], d2=values["d2"], H=values["H"],
                      seed=values["seed"], variant=values["variant"],
                      freeze_kb=values["freeze_kb"],
                      generator_bias=values["generator_bias"],
                      balanced_queries=values["balanced_queries"])
    cfg.validate()
    if not cfg.freeze_kb:
        artifacts["kb_trained"] = "kb_trained.txt"
        paths["kb_trained"] = os.path.join(args.out_dir, "kb_trained.txt")
    manifest = RunManifest.build(command="train", seed=values["seed"],
                                 values=values, provenance=provenance,
                                 inputs=inputs, artifacts=artifacts)
    manifest.save(os.path.join(args.out_dir, "manifest.json"))

    corpus = load_corpus(args.corpus)
    counts_by_task = corpus.class_counts()
    print(f"loaded {len(counts_by_task)} task(s): "
          + " ".join(f"{tid}={'/'.join(str(c) for _, c in sorted(sizes.items()))}"
                     for tid, sizes in sorted(counts_by_task.items())))
    index = build_surface_index(store)
    train_tasks = None
    if args.splits:
        memberships = read_splits(args.splits)
        train_set, test_set = split_task_sets(memberships)
        overlap = sorted(train_set & test_set)
        if overlap:
            raise OverlapError(
                f"task(s) {overlap} appear in both train and test splits")
        train_tasks = sorted(train_set)

    result = train_meta(corpus, kb, index, store, cfg, task_ids=train_tasks)
    counts = relation_param_counts(cfg.d1, result.model.d2, cfg.H)
    save_checkpoint(result.model, paths["checkpoint"])
    result.model.vocab.save(paths["vocab"])
    with open(paths["loss_csv"], "w", encoding="utf-8") as fh:
        fh.write(_loss_csv(result.loss_history, "episode"))
    if not cfg.freeze_kb:
        save_embeddings(result.kb, paths["kb_trained"])
    print(f"variant={cfg.variant} episodes={cfg.episodes} "
          f"final_loss={result.loss_history[-1] if result.loss_history else 0.0:.6g}")
    print("relation-stage parameters: "
          + " ".join(f"{k}={v}" for k, v in counts["score_time"].items())
          + " (score-time); "
          + " ".join(f"{k}={v}" for k, v in counts["trainable"].items())
          + " (trainable)")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    for path in (args.checkpoint, args.corpus, args.kb, args.splits,
                 args.support, args.triple_store):
        _require_file(path)
    vocab_path = args.vocab or os.path.join(os.path.dirname(args.checkpoint) or ".",
                                            "vocab.txt")
    _require_file(vocab_path)
    out_dir = args.out_dir or (os.path.dirname(args.checkpoint) or ".")
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, "report.csv")

    memberships = read_splits(args.splits)
    train_set, test_set = split_task_sets(memberships)
    overlap = sorted(train_set & test_set)
    if overlap:
        raise OverlapError(f"task(s) {overlap} appear in both train and test splits")

    vocab = Vocabulary.load(vocab_path)
    model = load_checkpoint(args.checkpoint, vocab)
    kb = load_embeddings(args.kb)
    store = load_triples(args.triple_store)
    index = build_surface_index(store)
    corpus = load_corpus(args.corpus)
    supports = read_support(args.support)
    test_supports = {tid: lines for tid, lines in supports.items()
                     if tid in test_set}
    missing = sorted(test_set - set(test_supports))
    if missing:
        raise DataError(f"test task(s) {missing} have no fixed support designated")

    report = evaluate(model, kb, index, store, corpus, test_supports,
                      train_tasks=train_set)
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_csv())
    print(f"mean_acc={report.mean_acc:.6f}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    defaults = {"tasks": 12, "classes": 2, "examples": 30, "vocab": 30,
                "kb_size": 30, "seed": 0}
    flags = {k: getattr(args, k) for k in defaults}
    values, provenance = resolve_config(defaults, {}, flags,
                                        env_values={"seed": _env_seed()})
    cfg = SynthConfig(tasks=values["tasks"], classes=values["classes"],
                      examples=values["examples"], vocab=values["vocab"],
                      kb_size=values["kb_size"], seed=values["seed"])
    cfg.validate()
    os.makedirs(args.out_dir, exist_ok=True)
    paths = generate_benchmark(args.out_dir, cfg)
    manifest = RunManifest.build(
        command="synth", seed=values["seed"], values=values,
        provenance=provenance, inputs={},
        artifacts={label: os.path.basename(getattr(paths, label))
                   for label in ("corpus", "triples", "splits", "support")})
    manifest.save(os.path.join(args.out_dir, "manifest.json"))
    print(f"wrote benchmark with {values['tasks']} tasks to {args.out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgmeta",
        description="Knowledge-guided metric meta-learning for few-shot "
                    "text classification")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kb-train", help="train KB embeddings on a triple file")
    p.add_argument("triples", help="tab-separated subject/relation/object file")
    p.add_argument("--out", required=True, help="embedding output file")
    p.add_argument("--d2", type=int, default=None, help="embedding size (default 100)")
    p.add_argument("--gamma", type=float, default=None, help="ranking margin")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--negatives", type=int, default=None,
                   help="negatives sampled per positive triple")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_kb_train)

    p = sub.add_parser("train", help="meta-train on an episodic corpus")
    p.add_argument("corpus", help="task/label/text corpus file")
    p.add_argument("kb", help="trained KB embedding file")
    p.add_argument("--triple-store", required=True,
                   help="triple file backing entity retrieval")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--splits", help="task membership file (train/test)")
    p.add_argument("--C", type=int, default=None)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--n", type=int, default=None, help="queries per episode")
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--d1", type=int, default=None)
    p.add_argument("--d2", type=int, default=None,
                   help="expected KB dimension (defaults to the file's)")
    p.add_argument("--H", type=int, default=None, help="relation hidden width")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--variant", choices=("full", "ablation", "replacement"),
                   default=None)
    p.add_argument("--freeze-kb", dest="freeze_kb", action="store_true",
                   default=None)
    p.add_argument("--unfreeze-kb", dest="freeze_kb", action="store_false")
    p.add_argument("--generator-bias", dest="generator_bias",
                   action="store_true", default=None)
    p.add_argument("--balanced-queries", dest="balanced_queries",
                   action="store_true", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on test tasks")
    p.add_argument("checkpoint")
    p.add_argument("corpus")
    p.add_argument("kb")
    p.add_argument("splits", help="task membership file (train/test)")
    p.add_argument("--support", required=True,
                   help="fixed support designation file")
    p.add_argument("--triple-store", required=True)
    p.add_argument("--vocab", help="vocabulary file (default: next to checkpoint)")
    p.add_argument("--out-dir", help="report directory (default: checkpoint's)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate the synthetic benchmark")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--tasks", type=int, default=None,
                   help="total tasks; the last third become the test split")
    p.add_argument("--classes", type=int, default=None)
    p.add_argument("--examples", type=int, default=None, help="per class per task")
    p.add_argument("--vocab", type=int, default=None, help="background pool size")
    p.add_argument("--kb-size", dest="kb_size", type=int, default=None,
                   help="extra filler triples")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KgmetaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

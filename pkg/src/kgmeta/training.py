"""Episodic meta-training, fixed-support evaluation, and the ablation /
replacement variant studies.

One Adam step is applied per episode. Identical configs (seed included)
reproduce bit-identical loss histories and reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .encoding import Vocabulary, class_prototype, encode_sentence, pair_representation
from .episodes import Corpus, LabeledExample, sample_episode
from .errors import ConfigError, DataError, DimensionError, KgmetaError, OverlapError
from .kb_embedding import KbEmbeddings, TripleStore
from .model import (
    ModelParams,
    VARIANTS,
    backward_episode,
    forward_episode,
    init_model,
    relation_param_counts,
)
from .numerics import AdamState, adam_step
from .rand import STREAM_EPISODE, STREAM_MODEL_INIT, substream
from .relation import generate_params, score_with_cache
from .retrieval import SurfaceIndex, build_knowledge_context


@dataclass
class TrainConfig:
    """Episode shape, dimensions, and optimization knobs.

    The desk-scale learning-rate default (1e-2) suits the synthetic
    benchmarks; full-scale text configs historically use 1e-5.
    """

    C: int = 2
    N: int = 5
    n: int = 10
    episodes: int = 500
    lr: float = 0.01
    d1: int = 16
    d2: int | None = None  # None: take the KB embedding dimension
    H: int = 8
    seed: int = 0
    variant: str = "full"
    freeze_kb: bool = True
    generator_bias: bool = False
    balanced_queries: bool = False
    pin_generator: bool = False  # freeze the generator matrix at zero (diagnostic)

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; "
                              f"expected one of {VARIANTS}")
        for name in ("C", "N", "n", "d1", "H"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.d2 is not None and self.d2 < 1:
            raise ConfigError(f"d2 must be positive, got {self.d2}")
        if self.episodes < 0:
            raise ConfigError(f"episodes must be >= 0, got {self.episodes}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")


def resolve_d2(cfg: TrainConfig, kb: KbEmbeddings) -> int:
    if cfg.d2 is not None and cfg.d2 != kb.d2:
        raise DimensionError(
            f"configured d2={cfg.d2} does not match KB embedding d2={kb.d2}")
    return kb.d2


@dataclass
class TrainResult:
    model: ModelParams
    loss_history: list[float]
    kb: KbEmbeddings  # identical to the input KB unless unfrozen


def train_meta(corpus: Corpus, kb: KbEmbeddings, index: SurfaceIndex,
               store: TripleStore, cfg: TrainConfig,
               task_ids: Iterable[str] | None = None) -> TrainResult:
    """Meta-train on episodes sampled from `corpus` (optionally restricted
    to `task_ids`). Returns final parameters, per-episode losses, and the
    KB (updated only when cfg.freeze_kb is False)."""
    cfg.validate()
    d2 = resolve_d2(cfg, kb)
    train_corpus = corpus.subset(task_ids) if task_ids is not None else corpus
    if not train_corpus.tasks:
        raise DataError("no training tasks available")
    vocab = Vocabulary.from_texts(
        ex.text for tid in train_corpus.task_ids
        for ex in train_corpus.examples_of(tid))
    model = init_model(vocab, cfg.d1, d2, cfg.H, cfg.variant,
                       substream(cfg.seed, STREAM_MODEL_INIT),
                       generator_bias=cfg.generator_bias,
                       pin_generator=cfg.pin_generator, c_max=cfg.C)
    kb = kb if cfg.freeze_kb else kb.copy()

    states: dict[str, AdamState] = {
        "token_table": AdamState.init(model.encoder.token_table.shape, cfg.lr),
        "theta_agn": AdamState.init(model.theta_agn.shape, cfg.lr),
    }
    if model.M is not None and not cfg.pin_generator:
        states["M"] = AdamState.init(model.M.shape, cfg.lr)
    if model.gen_bias is not None:
        states["gen_bias"] = AdamState.init(model.gen_bias.shape, cfg.lr)
    if model.theta_agn2 is not None:
        states["theta_agn2"] = AdamState.init(model.theta_agn2.shape, cfg.lr)
    if not cfg.freeze_kb:
        states["entity_vecs"] = AdamState.init(kb.entity_vecs.shape, cfg.lr)

    losses: list[float] = []
    for i in range(cfg.episodes):
        rng = substream(cfg.seed, STREAM_EPISODE, i)
        try:
            episode = sample_episode(train_corpus, cfg.C, cfg.N, cfg.n, rng,
                                     balanced_queries=cfg.balanced_queries)
            fwd = forward_episode(model, episode, kb, index, store)
        except KgmetaError as exc:
            raise type(exc)(f"episode {i}: {exc}") from exc
        losses.append(fwd.loss)
        grads = backward_episode(model, fwd, freeze_kb=cfg.freeze_kb)

        model.encoder.token_table, states["token_table"] = adam_step(
            model.encoder.token_table, grads["token_table"], states["token_table"])
        model.theta_agn, states["theta_agn"] = adam_step(
            model.theta_agn, grads["theta_agn"], states["theta_agn"])
        if "M" in states:
            model.M, states["M"] = adam_step(model.M, grads["M"], states["M"])
        if "gen_bias" in states and "gen_bias" in grads:
            model.gen_bias, states["gen_bias"] = adam_step(
                model.gen_bias, grads["gen_bias"], states["gen_bias"])
        if "theta_agn2" in states:
            model.theta_agn2, states["theta_agn2"] = adam_step(
                model.theta_agn2, grads["theta_agn2"], states["theta_agn2"])
        if "entity_vecs" in states:
            d_ent = np.zeros_like(kb.entity_vecs)
            if "k_s" in grads:
                share = grads["k_s"] / len(fwd.context.concepts)
                for c in sorted(fwd.context.concepts):
                    d_ent[c] += share
            kb.entity_vecs, states["entity_vecs"] = adam_step(
                kb.entity_vecs, d_ent, states["entity_vecs"])
    return TrainResult(model=model, loss_history=losses, kb=kb)


@dataclass
class EvalReport:
    """Per-task accuracies and their unweighted mean."""

    per_task: dict[str, float] = field(default_factory=dict)

    @property
    def mean_acc(self) -> float:
        if not self.per_task:
            return 0.0
        return float(np.mean(sorted(self.per_task.values())))

    def to_csv(self) -> str:
        lines = ["task_id,accuracy"]
        for tid in sorted(self.per_task):
            lines.append(f"{tid},{self.per_task[tid]:.17g}")
        lines.append(f"mean,{self.mean_acc:.17g}")
        return "\n".join(lines) + "\n"


def predict_task(model: ModelParams, kb: KbEmbeddings, index: SurfaceIndex,
                 store: TripleStore, support: Sequence[LabeledExample],
                 query_texts: Sequence[str]) -> list[int]:
    """Classify query texts against a fixed support set.

    Prediction is argmax over classes of the pre-sigmoid sum (the sigmoid
    is monotone, so this matches ranking fused scores); ties resolve to
    the lowest class id.
    """
    if not support:
        raise DataError("support set is empty")
    classes = sorted({ex.label for ex in support})
    by_class = {z: [ex for ex in support if ex.label == z] for z in classes}
    encodings = {z: [encode_sentence(model.encoder, model.vocab.sentence(ex.text))
                     for ex in by_class[z]] for z in classes}
    prototypes = {z: class_prototype(encodings[z]) for z in classes}
    theta_agn = model.agnostic_params()
    theta_rel = None
    if model.variant == "full":
        context = build_knowledge_context(index, store, kb,
                                          [ex.text for ex in support])
        theta_rel = generate_params(model.generator(), context.k_s)
    theta_agn2 = (model.second_agnostic_params()
                  if model.variant == "replacement" else None)

    predictions: list[int] = []
    for text in query_texts:
        h = encode_sentence(model.encoder, model.vocab.sentence(text))
        pre = np.zeros(len(classes))
        for zi, z in enumerate(classes):
            p = pair_representation(prototypes[z], h)
            u = score_with_cache(theta_agn, p)[0]
            if theta_rel is not None:
                u += score_with_cache(theta_rel, p)[0]
            if theta_agn2 is not None:
                u += score_with_cache(theta_agn2, p)[0]
            pre[zi] = u
        predictions.append(classes[int(np.argmax(pre))])
    return predictions


def evaluate(model: ModelParams, kb: KbEmbeddings, index: SurfaceIndex,
             store: TripleStore, corpus: Corpus,
             supports: dict[str, list[int]],
             train_tasks: Iterable[str] = ()) -> EvalReport:
    """Accuracy per test task using its designated fixed support lines;
    every other example of the task is a query."""
    train_set = set(train_tasks)
    overlap = sorted(train_set & set(supports))
    if overlap:
        raise OverlapError(f"task(s) {overlap} appear in both train and test splits")
    report = EvalReport()
    for tid in sorted(supports):
        if tid not in corpus.tasks:
            raise DataError(f"test task '{tid}' not present in corpus")
        examples = corpus.examples_of(tid)
        by_line = {ex.line_no: ex for ex in examples}
        support: list[LabeledExample] = []
        for line_no in supports[tid]:
            if line_no not in by_line:
                raise DataError(
                    f"support line {line_no} does not belong to task '{tid}'")
            support.append(by_line[line_no])
        support_lines = set(supports[tid])
        classes = sorted(corpus.tasks[tid])
        covered = {ex.label for ex in support}
        if set(classes) - covered:
            raise DataError(f"support for task '{tid}' misses class(es) "
                            f"{sorted(set(classes) - covered)}")
        queries = [ex for ex in examples if ex.line_no not in support_lines]
        if not queries:
            raise DataError(f"task '{tid}' has no query examples outside the support")
        predicted = predict_task(model, kb, index, store, support,
                                 [ex.text for ex in queries])
        correct = sum(1 for ex, pred in zip(queries, predicted) if ex.label == pred)
        report.per_task[tid] = correct / len(queries)
    return report


@dataclass
class VariantResult:
    report: EvalReport
    loss_history: list[float]
    model: ModelParams
    param_counts: dict[str, dict[str, int]]


def run_variant(corpus: Corpus, kb: KbEmbeddings, index: SurfaceIndex,
                store: TripleStore, train_tasks: Iterable[str],
                supports: dict[str, list[int]], cfg: TrainConfig) -> VariantResult:
    """Train one variant and evaluate it on the fixed-support test tasks."""
    result = train_meta(corpus, kb, index, store, cfg, task_ids=train_tasks)
    report = evaluate(result.model, result.kb, index, store, corpus, supports,
                      train_tasks=train_tasks)
    counts = relation_param_counts(cfg.d1, result.model.d2, cfg.H)
    return VariantResult(report=report, loss_history=result.loss_history,
                         model=result.model, param_counts=counts)


class FewShotRelationClassifier(BaseEstimator):
    """Scikit-learn style wrapper around the episodic trainer.

    fit() consumes a Corpus plus the KB artifacts and learns the encoder,
    relation networks, and generator; predict() classifies query texts for
    one task given its support examples.
    """

    def __init__(self, C: int = 2, N: int = 5, n_queries: int = 10,
                 episodes: int = 500, lr: float = 0.01, d1: int = 16,
                 hidden_dim: int = 8, variant: str = "full",
                 freeze_kb: bool = True, generator_bias: bool = False,
                 balanced_queries: bool = False, seed: int = 0):
        self.C = C
        self.N = N
        self.n_queries = n_queries
        self.episodes = episodes
        self.lr = lr
        self.d1 = d1
        self.hidden_dim = hidden_dim
        self.variant = variant
        self.freeze_kb = freeze_kb
        self.generator_bias = generator_bias
        self.balanced_queries = balanced_queries
        self.seed = seed

    def _config(self) -> TrainConfig:
        return TrainConfig(C=self.C, N=self.N, n=self.n_queries,
                           episodes=self.episodes, lr=self.lr, d1=self.d1,
                           H=self.hidden_dim, seed=self.seed, variant=self.variant,
                           freeze_kb=self.freeze_kb,
                           generator_bias=self.generator_bias,
                           balanced_queries=self.balanced_queries)

    def fit(self, corpus: Corpus, kb: KbEmbeddings, index: SurfaceIndex,
            store: TripleStore, task_ids: Iterable[str] | None = None,
            ) -> "FewShotRelationClassifier":
        result = train_meta(corpus, kb, index, store, self._config(),
                            task_ids=task_ids)
        self.model_ = result.model
        self.loss_history_ = result.loss_history
        self.kb_ = result.kb
        self.index_ = index
        self.store_ = store
        self.train_tasks_ = (set(task_ids) if task_ids is not None
                             else set(corpus.task_ids))
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "model_"):
            raise NotFittedError("FewShotRelationClassifier is not fitted")

    def predict(self, query_texts: Sequence[str],
                support: Sequence[LabeledExample]) -> list[int]:
        self._check_fitted()
        return predict_task(self.model_, self.kb_, self.index_, self.store_,
                            support, query_texts)

    def score_tasks(self, corpus: Corpus, supports: dict[str, list[int]],
                    ) -> EvalReport:
        self._check_fitted()
        return evaluate(self.model_, self.kb_, self.index_, self.store_, corpus,
                        supports, train_tasks=self.train_tasks_)

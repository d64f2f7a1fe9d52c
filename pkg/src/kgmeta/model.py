"""Model parameter container, the episode forward/backward pass, and
text-checkpoint persistence.

Trainable groups: the encoder token table, the flattened task-agnostic
relation parameters, the generator matrix (full variant), an optional
generator bias, a second independent relation network (replacement
variant), and optionally the KB entity vectors when unfrozen.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoding import (
    EncoderParams,
    Sentence,
    Vocabulary,
    accumulate_encoder_grad,
    class_prototype,
    encode_sentence,
    init_encoder,
    pair_representation,
)
from .episodes import Episode
from .errors import ConfigError, CorpusParseError, DataError, DimensionError
from .kb_embedding import KbEmbeddings, TripleStore
from .numerics import mlp2_backward, sigmoid
from .relation import (
    GeneratorParams,
    RelationNetParams,
    episode_loss,
    generate_params,
    param_count,
    score_with_cache,
)
from .retrieval import KnowledgeContext, SurfaceIndex, build_knowledge_context

VARIANTS = ("full", "ablation", "replacement")
CHECKPOINT_VERSION = 1


@dataclass
class ModelParams:
    """All trainable parameters plus the vocabulary they are bound to."""

    vocab: Vocabulary
    encoder: EncoderParams
    theta_agn: np.ndarray            # flattened, length d3
    d2: int
    hidden_dim: int
    variant: str = "full"
    M: np.ndarray | None = None      # (d3, d2), full variant only
    gen_bias: np.ndarray | None = None
    theta_agn2: np.ndarray | None = None  # flattened, replacement variant only
    c_max: int = 2

    @property
    def d1(self) -> int:
        return self.encoder.d1

    @property
    def pair_dim(self) -> int:
        return 2 * self.d1

    @property
    def d3(self) -> int:
        return param_count(self.pair_dim, self.hidden_dim)

    def agnostic_params(self) -> RelationNetParams:
        return RelationNetParams.from_flat(self.theta_agn, self.pair_dim, self.hidden_dim)

    def second_agnostic_params(self) -> RelationNetParams:
        if self.theta_agn2 is None:
            raise ConfigError("model has no second relation network")
        return RelationNetParams.from_flat(self.theta_agn2, self.pair_dim, self.hidden_dim)

    def generator(self) -> GeneratorParams:
        if self.M is None:
            raise ConfigError("model has no generator matrix")
        return GeneratorParams(M=self.M, input_dim=self.pair_dim,
                               hidden_dim=self.hidden_dim, bias=self.gen_bias)


def relation_param_counts(d1: int, d2: int, hidden_dim: int) -> dict[str, dict[str, int]]:
    """Score-time and trainable parameter counts of the relation stage,
    per variant. Replacement matches full at score time by construction."""
    d3 = param_count(2 * d1, hidden_dim)
    return {
        "score_time": {"ablation": d3, "replacement": 2 * d3, "full": 2 * d3},
        "trainable": {"ablation": d3, "replacement": 2 * d3, "full": d3 + d3 * d2},
    }


def init_model(vocab: Vocabulary, d1: int, d2: int, hidden_dim: int, variant: str,
               rng: np.random.Generator, generator_bias: bool = False,
               pin_generator: bool = False, c_max: int = 2) -> ModelParams:
    """Draw order is fixed (encoder, theta_agn, M, theta_agn2) so variants
    sharing a seed share the parameters they have in common."""
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    encoder = init_encoder(len(vocab), d1, rng)
    d3 = param_count(2 * d1, hidden_dim)
    theta_agn = rng.normal(0.0, 0.1, size=d3)
    M = None
    gen_bias = None
    theta_agn2 = None
    if variant == "full":
        if pin_generator:
            M = np.zeros((d3, d2))
        else:
            M = rng.normal(0.0, 0.1, size=(d3, d2))
        if generator_bias:
            gen_bias = np.zeros(d3)
    elif variant == "replacement":
        theta_agn2 = rng.normal(0.0, 0.1, size=d3)
    return ModelParams(vocab=vocab, encoder=encoder, theta_agn=theta_agn, d2=d2,
                       hidden_dim=hidden_dim, variant=variant, M=M,
                       gen_bias=gen_bias, theta_agn2=theta_agn2, c_max=c_max)


@dataclass
class EpisodeForward:
    """Everything the backward pass needs from one scored episode."""

    episode: Episode
    support_sentences: list[Sentence]
    query_sentences: list[Sentence]
    support_encodings: list[np.ndarray]
    query_encodings: list[np.ndarray]
    support_class_members: dict[int, list[int]]  # class -> indices into support lists
    prototypes: list[np.ndarray]                 # aligned with episode.classes
    context: KnowledgeContext | None
    theta_rel: RelationNetParams | None
    agn_pre: np.ndarray                          # (C, |Q|) task-agnostic scores
    rel_pre: np.ndarray | None                   # task-relevant (or second-net) scores
    pre_sigmoid: np.ndarray                      # (C, |Q|) fused pre-sigmoid sums
    scores: np.ndarray                           # (C, |Q|) in (0, 1)
    agn_caches: list[list]
    rel_caches: list[list] | None
    agn2_caches: list[list] | None

    @property
    def loss(self) -> float:
        labels = [ex.label for ex in self.episode.query_set]
        return episode_loss(self.scores, labels, self.episode.classes)


def forward_episode(model: ModelParams, episode: Episode, kb: KbEmbeddings,
                    index: SurfaceIndex, store: TripleStore) -> EpisodeForward:
    """Encode, build prototypes, retrieve knowledge from the sample set
    only, generate task-relevant parameters, and score every pair."""
    if model.variant == "full" and kb.d2 != model.d2:
        raise DimensionError(
            f"model expects KB dimension {model.d2} but embeddings have {kb.d2}")
    support_sentences = [model.vocab.sentence(ex.text) for ex in episode.sample_set]
    query_sentences = [model.vocab.sentence(ex.text) for ex in episode.query_set]
    support_encodings = [encode_sentence(model.encoder, s) for s in support_sentences]
    query_encodings = [encode_sentence(model.encoder, s) for s in query_sentences]

    members: dict[int, list[int]] = {z: [] for z in episode.classes}
    for i, ex in enumerate(episode.sample_set):
        if ex.label not in members:
            raise DataError(f"sample-set label {ex.label} not among episode classes")
        members[ex.label].append(i)
    prototypes = [class_prototype([support_encodings[i] for i in members[z]])
                  for z in episode.classes]

    context = None
    theta_rel = None
    if model.variant == "full":
        context = build_knowledge_context(
            index, store, kb, [ex.text for ex in episode.sample_set])
        theta_rel = generate_params(model.generator(), context.k_s)

    theta_agn = model.agnostic_params()
    theta_agn2 = (model.second_agnostic_params()
                  if model.variant == "replacement" else None)

    n_classes, n_queries = len(episode.classes), len(episode.query_set)
    agn_pre = np.zeros((n_classes, n_queries))
    second_branch = theta_rel is not None or theta_agn2 is not None
    rel_pre = np.zeros((n_classes, n_queries)) if second_branch else None
    agn_caches = [[None] * n_queries for _ in range(n_classes)]
    rel_caches = [[None] * n_queries for _ in range(n_classes)] if theta_rel else None
    agn2_caches = [[None] * n_queries for _ in range(n_classes)] if theta_agn2 else None
    for zi in range(n_classes):
        for j in range(n_queries):
            p = pair_representation(prototypes[zi], query_encodings[j])
            r_agn, agn_caches[zi][j] = score_with_cache(theta_agn, p)
            agn_pre[zi, j] = r_agn
            if theta_rel is not None:
                rel_pre[zi, j], rel_caches[zi][j] = score_with_cache(theta_rel, p)
            elif theta_agn2 is not None:
                rel_pre[zi, j], agn2_caches[zi][j] = score_with_cache(theta_agn2, p)
    pre = agn_pre if rel_pre is None else agn_pre + rel_pre
    scores = sigmoid(pre)
    return EpisodeForward(
        episode=episode, support_sentences=support_sentences,
        query_sentences=query_sentences, support_encodings=support_encodings,
        query_encodings=query_encodings, support_class_members=members,
        prototypes=prototypes, context=context, theta_rel=theta_rel,
        agn_pre=agn_pre, rel_pre=rel_pre, pre_sigmoid=pre, scores=scores,
        agn_caches=agn_caches, rel_caches=rel_caches, agn2_caches=agn2_caches)


def backward_episode(model: ModelParams, fwd: EpisodeForward,
                     freeze_kb: bool = True) -> dict[str, np.ndarray]:
    """Analytic gradients of the episode loss for every trainable group."""
    episode = fwd.episode
    classes = episode.classes
    labels = [ex.label for ex in episode.query_set]
    targets = np.array([[1.0 if y == z else 0.0 for y in labels] for z in classes])
    d_pre = 2.0 * (fwd.scores - targets) * fwd.scores * (1.0 - fwd.scores)

    theta_agn = model.agnostic_params()
    dW1a = np.zeros_like(theta_agn.W1)
    db1a = np.zeros_like(theta_agn.b1)
    dw2a = np.zeros_like(theta_agn.w2)
    db2a = 0.0
    d_prototypes = [np.zeros(model.d1) for _ in classes]
    d_queries = [np.zeros(model.d1) for _ in episode.query_set]

    theta_rel = fwd.theta_rel
    if theta_rel is not None:
        dW1r = np.zeros_like(theta_rel.W1)
        db1r = np.zeros_like(theta_rel.b1)
        dw2r = np.zeros_like(theta_rel.w2)
        db2r = 0.0
    theta_agn2 = (model.second_agnostic_params()
                  if model.variant == "replacement" else None)
    if theta_agn2 is not None:
        dW1a2 = np.zeros_like(theta_agn2.W1)
        db1a2 = np.zeros_like(theta_agn2.b1)
        dw2a2 = np.zeros_like(theta_agn2.w2)
        db2a2 = 0.0

    d1 = model.d1
    for zi in range(len(classes)):
        for j in range(len(episode.query_set)):
            du = d_pre[zi, j]
            if du == 0.0:
                continue
            gW1, gb1, gw2, gb2, dp = mlp2_backward(
                theta_agn.W1, theta_agn.w2, fwd.agn_caches[zi][j], du)
            dW1a += gW1
            db1a += gb1
            dw2a += gw2
            db2a += gb2
            if theta_rel is not None:
                gW1, gb1, gw2, gb2, dp_rel = mlp2_backward(
                    theta_rel.W1, theta_rel.w2, fwd.rel_caches[zi][j], du)
                dW1r += gW1
                db1r += gb1
                dw2r += gw2
                db2r += gb2
                dp = dp + dp_rel
            if theta_agn2 is not None:
                gW1, gb1, gw2, gb2, dp_a2 = mlp2_backward(
                    theta_agn2.W1, theta_agn2.w2, fwd.agn2_caches[zi][j], du)
                dW1a2 += gW1
                db1a2 += gb1
                dw2a2 += gw2
                db2a2 += gb2
                dp = dp + dp_a2
            d_prototypes[zi] += dp[:d1]
            d_queries[j] += dp[d1:]

    grads: dict[str, np.ndarray] = {}
    grads["theta_agn"] = RelationNetParams(dW1a, db1a, dw2a, db2a).flatten()
    if theta_rel is not None:
        g_rel = RelationNetParams(dW1r, db1r, dw2r, db2r).flatten()
        grads["M"] = np.outer(g_rel, fwd.context.k_s)
        if model.gen_bias is not None:
            grads["gen_bias"] = g_rel
        if not freeze_kb and fwd.context.concepts:
            # dL/dk_S; the trainer spreads it evenly over the concept
            # entity vectors (k_S is their mean)
            grads["k_s"] = model.M.T @ g_rel
    if theta_agn2 is not None:
        grads["theta_agn2"] = RelationNetParams(dW1a2, db1a2, dw2a2, db2a2).flatten()

    d_table = np.zeros_like(model.encoder.token_table)
    for zi, z in enumerate(classes):
        member_idx = fwd.support_class_members[z]
        share = d_prototypes[zi] / len(member_idx)
        for i in member_idx:
            accumulate_encoder_grad(d_table, fwd.support_sentences[i], share)
    for j, dq in enumerate(d_queries):
        accumulate_encoder_grad(d_table, fwd.query_sentences[j], dq)
    grads["token_table"] = d_table
    return grads


def save_checkpoint(model: ModelParams, path: str) -> None:
    """Versioned text checkpoint; 17 significant digits per value."""

    def write_block(fh, name: str, arr: np.ndarray) -> None:
        mat = np.atleast_2d(arr)
        fh.write(f"block {name} {mat.shape[0]} {mat.shape[1]}\n")
        for row in mat:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("d1,d2,H,C_max,version\n")
        fh.write(f"{model.d1},{model.d2},{model.hidden_dim},{model.c_max},"
                 f"{CHECKPOINT_VERSION}\n")
        fh.write(f"variant={model.variant}\n")
        write_block(fh, "token_table", model.encoder.token_table)
        write_block(fh, "theta_agn", model.theta_agn)
        if model.M is not None:
            write_block(fh, "generator_m", model.M)
        if model.gen_bias is not None:
            write_block(fh, "generator_bias", model.gen_bias)
        if model.theta_agn2 is not None:
            write_block(fh, "theta_agn2", model.theta_agn2)


def load_checkpoint(path: str, vocab: Vocabulary) -> ModelParams:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines or lines[0] != "d1,d2,H,C_max,version":
        raise CorpusParseError("missing checkpoint header", path=path, line=1)
    try:
        d1, d2, hidden_dim, c_max, version = (int(v) for v in lines[1].split(","))
    except (ValueError, IndexError) as exc:
        raise CorpusParseError("bad checkpoint header values", path=path, line=2) from exc
    if version != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {version}, "
                          f"expected {CHECKPOINT_VERSION}")
    pos = 2
    meta: dict[str, str] = {}
    while pos < len(lines) and not lines[pos].startswith("block ") and lines[pos]:
        key, _, value = lines[pos].partition("=")
        meta[key] = value
        pos += 1
    variant = meta.get("variant", "full")
    if variant not in VARIANTS:
        raise ConfigError(f"unknown checkpoint variant {variant!r}")

    blocks: dict[str, np.ndarray] = {}
    while pos < len(lines):
        line = lines[pos]
        if not line:
            pos += 1
            continue
        parts = line.split(" ")
        if len(parts) != 4 or parts[0] != "block":
            raise CorpusParseError(f"expected a block header, got {line!r}",
                                   path=path, line=pos + 1)
        name, rows, cols = parts[1], int(parts[2]), int(parts[3])
        data = np.zeros((rows, cols))
        for r in range(rows):
            pos += 1
            data[r] = [float(v) for v in lines[pos].split(",")]
        blocks[name] = data
        pos += 1

    if len(vocab) != blocks["token_table"].shape[0]:
        raise DimensionError(
            f"vocabulary size {len(vocab)} does not match token_table rows "
            f"{blocks['token_table'].shape[0]}")
    model = ModelParams(
        vocab=vocab,
        encoder=EncoderParams(token_table=blocks["token_table"]),
        theta_agn=blocks["theta_agn"].ravel(),
        d2=d2, hidden_dim=hidden_dim, variant=variant,
        M=blocks.get("generator_m"),
        gen_bias=(blocks["generator_bias"].ravel()
                  if "generator_bias" in blocks else None),
        theta_agn2=(blocks["theta_agn2"].ravel()
                    if "theta_agn2" in blocks else None),
        c_max=c_max)
    if model.d1 != d1:
        raise DimensionError(f"checkpoint d1={d1} but token_table has {model.d1} columns")
    return model

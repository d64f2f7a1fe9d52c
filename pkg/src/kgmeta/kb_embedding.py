"""Knowledge-base triple store and bilinear (DistMult) embeddings.

A triple (s, r, o) is scored as sum_i s_i * r_i * o_i. Embeddings are
trained with a margin ranking loss against corrupted negatives and
evaluated with hits@k object ranking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .errors import (
    CannotCorruptError,
    ConfigError,
    CorpusParseError,
    UnknownIdError,
)
from .numerics import AdamState, adam_step, as_f64
from .rand import STREAM_KB_INIT, STREAM_NEGATIVE, substream


class Triple(NamedTuple):
    subject: int
    relation: int
    object: int


@dataclass
class TripleStore:
    """Unique (s, r, o) triples over integer entity/relation ids."""

    entity_names: list[str] = field(default_factory=list)
    relation_names: list[str] = field(default_factory=list)
    triples: list[Triple] = field(default_factory=list)

    def __post_init__(self):
        self._entity_ids = {n: i for i, n in enumerate(self.entity_names)}
        self._relation_ids = {n: i for i, n in enumerate(self.relation_names)}
        self._seen = set(self.triples)
        # objects per subject, for retrieval
        self._objects_by_subject: dict[int, set[int]] = {}
        for t in self.triples:
            self._objects_by_subject.setdefault(t.subject, set()).add(t.object)

    @property
    def n_entities(self) -> int:
        return len(self.entity_names)

    @property
    def n_relations(self) -> int:
        return len(self.relation_names)

    def entity_id(self, name: str, create: bool = False) -> int:
        if name not in self._entity_ids:
            if not create:
                raise UnknownIdError(f"unknown entity '{name}'")
            self._entity_ids[name] = len(self.entity_names)
            self.entity_names.append(name)
        return self._entity_ids[name]

    def relation_id(self, name: str, create: bool = False) -> int:
        if name not in self._relation_ids:
            if not create:
                raise UnknownIdError(f"unknown relation '{name}'")
            self._relation_ids[name] = len(self.relation_names)
            self.relation_names.append(name)
        return self._relation_ids[name]

    def add(self, subject: str, relation: str, object_: str) -> None:
        t = Triple(
            self.entity_id(subject, create=True),
            self.relation_id(relation, create=True),
            self.entity_id(object_, create=True),
        )
        if t in self._seen:
            return
        self._seen.add(t)
        self.triples.append(t)
        self._objects_by_subject.setdefault(t.subject, set()).add(t.object)

    def objects_of(self, subject_id: int) -> set[int]:
        return set(self._objects_by_subject.get(subject_id, set()))

    def find(self, subject: str, relation: str, object_: str) -> Triple:
        return Triple(self.entity_id(subject), self.relation_id(relation),
                      self.entity_id(object_))


def load_triples(path: str) -> TripleStore:
    """Read tab-separated `subject<TAB>relation<TAB>object` lines."""
    store = TripleStore()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not all(parts):
                raise CorpusParseError(
                    f"expected subject<TAB>relation<TAB>object, got {line!r}",
                    path=path, line=lineno)
            store.add(parts[0], parts[1], parts[2])
    return store


def save_triples(store: TripleStore, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in store.triples:
            fh.write(f"{store.entity_names[t.subject]}\t"
                     f"{store.relation_names[t.relation]}\t"
                     f"{store.entity_names[t.object]}\n")


@dataclass
class KbEmbeddings:
    """Learned entity/relation vectors of one shared dimension d2."""

    entity_names: list[str]
    relation_names: list[str]
    entity_vecs: np.ndarray    # (n_entities, d2)
    relation_vecs: np.ndarray  # (n_relations, d2)

    @property
    def d2(self) -> int:
        return int(self.entity_vecs.shape[1])

    def entity_vector(self, entity_id: int) -> np.ndarray:
        if not 0 <= entity_id < len(self.entity_names):
            raise UnknownIdError(f"unknown entity id {entity_id}")
        return self.entity_vecs[entity_id]

    def copy(self) -> "KbEmbeddings":
        return KbEmbeddings(list(self.entity_names), list(self.relation_names),
                            self.entity_vecs.copy(), self.relation_vecs.copy())


def init_embeddings(store: TripleStore, d2: int, rng: np.random.Generator) -> KbEmbeddings:
    """Uniform init on [-0.5/sqrt(d2), +0.5/sqrt(d2)]."""
    if d2 <= 0:
        raise ConfigError(f"embedding dimension must be positive, got {d2}")
    bound = 0.5 / np.sqrt(d2)
    ent = rng.uniform(-bound, bound, size=(store.n_entities, d2))
    rel = rng.uniform(-bound, bound, size=(store.n_relations, d2))
    return KbEmbeddings(list(store.entity_names), list(store.relation_names), ent, rel)


def score_triple(emb: KbEmbeddings, t: Triple) -> float:
    """Bilinear validity score: s^T diag(r) o."""
    if not 0 <= t.subject < len(emb.entity_names):
        raise UnknownIdError(f"unknown entity id {t.subject}")
    if not 0 <= t.object < len(emb.entity_names):
        raise UnknownIdError(f"unknown entity id {t.object}")
    if not 0 <= t.relation < len(emb.relation_names):
        raise UnknownIdError(f"unknown relation id {t.relation}")
    s = emb.entity_vecs[t.subject]
    r = emb.relation_vecs[t.relation]
    o = emb.entity_vecs[t.object]
    return float(np.sum(s * r * o))


def score_triple_grads(emb: KbEmbeddings, t: Triple):
    """d score / d (s, r, o) for one triple."""
    s = emb.entity_vecs[t.subject]
    r = emb.relation_vecs[t.relation]
    o = emb.entity_vecs[t.object]
    return r * o, s * o, s * r


def sample_negative(t: Triple, entities: Sequence[int], rng: np.random.Generator) -> Triple:
    """Corrupt the subject or the object (uniform choice) with a uniform
    replacement drawn from `entities` minus the replaced id."""
    entities = sorted(set(int(e) for e in entities))
    if len(entities) < 2:
        raise CannotCorruptError(
            f"need at least 2 entities to corrupt a triple, got {len(entities)}")
    corrupt_subject = bool(rng.integers(0, 2) == 0)
    replaced = t.subject if corrupt_subject else t.object
    candidates = [e for e in entities if e != replaced]
    replacement = int(candidates[int(rng.integers(0, len(candidates)))])
    if corrupt_subject:
        return Triple(replacement, t.relation, t.object)
    return Triple(t.subject, t.relation, replacement)


def margin_loss(f_pos: float, f_neg: float, gamma: float) -> float:
    """Hinge ranking loss: max(0, gamma - f_pos + f_neg)."""
    if gamma <= 0:
        raise ConfigError(f"margin gamma must be positive, got {gamma}")
    return max(0.0, gamma - f_pos + f_neg)


class DistMultEmbedder(BaseEstimator):
    """Learns bilinear KB embeddings with a margin ranking loss.

    Parameters mirror the training knobs; `fit` consumes a TripleStore
    and exposes `embeddings_` and per-epoch `loss_history_`.
    """

    def __init__(self, d2: int = 100, gamma: float = 1.0, epochs: int = 200,
                 lr: float = 0.05, negatives_per_positive: int = 1, seed: int = 0):
        self.d2 = d2
        self.gamma = gamma
        self.epochs = epochs
        self.lr = lr
        self.negatives_per_positive = negatives_per_positive
        self.seed = seed

    def fit(self, store: TripleStore, y=None) -> "DistMultEmbedder":
        if not store.triples:
            raise ConfigError("cannot train embeddings on an empty triple store")
        if self.negatives_per_positive < 1:
            raise ConfigError("negatives_per_positive must be >= 1")
        init_rng = substream(self.seed, STREAM_KB_INIT)
        neg_rng = substream(self.seed, STREAM_NEGATIVE)
        emb = init_embeddings(store, self.d2, init_rng)
        entity_ids = list(range(store.n_entities))

        ent_state = AdamState.init(emb.entity_vecs.shape, lr=self.lr)
        rel_state = AdamState.init(emb.relation_vecs.shape, lr=self.lr)
        losses: list[float] = []
        for _ in range(self.epochs):
            total = 0.0
            dent = np.zeros_like(emb.entity_vecs)
            drel = np.zeros_like(emb.relation_vecs)
            for pos in store.triples:
                f_pos = score_triple(emb, pos)
                for _k in range(self.negatives_per_positive):
                    neg = sample_negative(pos, entity_ids, neg_rng)
                    f_neg = score_triple(emb, neg)
                    loss = margin_loss(f_pos, f_neg, self.gamma)
                    total += loss
                    if loss <= 0.0:
                        continue  # hinge subgradient at the kink is zero
                    ds, dr, do = score_triple_grads(emb, pos)
                    dent[pos.subject] -= ds
                    drel[pos.relation] -= dr
                    dent[pos.object] -= do
                    ds, dr, do = score_triple_grads(emb, neg)
                    dent[neg.subject] += ds
                    drel[neg.relation] += dr
                    dent[neg.object] += do
            losses.append(total)
            new_ent, ent_state = adam_step(emb.entity_vecs, dent, ent_state)
            new_rel, rel_state = adam_step(emb.relation_vecs, drel, rel_state)
            emb = KbEmbeddings(emb.entity_names, emb.relation_names, new_ent, new_rel)
        self.embeddings_ = emb
        self.loss_history_ = losses
        return self

    def score_triples(self, triples: Iterable[Triple]) -> np.ndarray:
        if not hasattr(self, "embeddings_"):
            raise NotFittedError("DistMultEmbedder is not fitted")
        return np.array([score_triple(self.embeddings_, t) for t in triples])


def train_kb(store: TripleStore, d2: int = 100, gamma: float = 1.0,
             epochs: int = 200, lr: float = 0.05,
             negatives_per_positive: int = 1, seed: int = 0,
             ) -> tuple[KbEmbeddings, list[float]]:
    """Functional wrapper around DistMultEmbedder.fit."""
    est = DistMultEmbedder(d2=d2, gamma=gamma, epochs=epochs, lr=lr,
                           negatives_per_positive=negatives_per_positive, seed=seed)
    est.fit(store)
    return est.embeddings_, est.loss_history_


def hits_at_k(emb: KbEmbeddings, triples: Iterable[Triple], k: int) -> float:
    """Fraction of triples whose object ranks in the top k among all
    entities scored as candidate objects. Ties break by entity id."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    triples = list(triples)
    if not triples:
        return 1.0
    n_entities = emb.entity_vecs.shape[0]
    hits = 0
    for t in triples:
        s = emb.entity_vecs[t.subject]
        r = emb.relation_vecs[t.relation]
        scores = emb.entity_vecs @ (s * r)
        true_score = scores[t.object]
        better = int(np.sum(scores > true_score))
        tied_earlier = int(np.sum((scores == true_score)[: t.object]))
        rank = 1 + better + tied_earlier
        if rank <= k:
            hits += 1
    return hits / len(triples)


def save_embeddings(emb: KbEmbeddings, path: str) -> None:
    """Text persistence; 17 significant digits round-trip float64 exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"d2={emb.d2}\n")
        for name, vec in zip(emb.entity_names, emb.entity_vecs):
            fh.write(f"E\t{name}\t" + ",".join(f"{v:.17g}" for v in vec) + "\n")
        for name, vec in zip(emb.relation_names, emb.relation_vecs):
            fh.write(f"R\t{name}\t" + ",".join(f"{v:.17g}" for v in vec) + "\n")


def load_embeddings(path: str) -> KbEmbeddings:
    entity_names: list[str] = []
    relation_names: list[str] = []
    entity_rows: list[np.ndarray] = []
    relation_rows: list[np.ndarray] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("d2="):
            raise CorpusParseError(f"expected 'd2=<int>' header, got {header!r}",
                                   path=path, line=1)
        try:
            d2 = int(header[3:])
        except ValueError as exc:
            raise CorpusParseError(f"bad d2 header {header!r}", path=path, line=1) from exc
        for lineno, raw in enumerate(fh, start=2):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3 or parts[0] not in ("E", "R"):
                raise CorpusParseError(f"bad embedding line {line!r}", path=path,
                                       line=lineno)
            try:
                vec = np.array([float(v) for v in parts[2].split(",")], dtype=np.float64)
            except ValueError as exc:
                raise CorpusParseError(f"bad vector on line {line!r}", path=path,
                                       line=lineno) from exc
            if vec.size != d2:
                raise CorpusParseError(
                    f"vector for '{parts[1]}' has size {vec.size}, expected {d2}",
                    path=path, line=lineno)
            if parts[0] == "E":
                entity_names.append(parts[1])
                entity_rows.append(vec)
            else:
                relation_names.append(parts[1])
                relation_rows.append(vec)
    ent = np.vstack(entity_rows) if entity_rows else np.zeros((0, d2))
    rel = np.vstack(relation_rows) if relation_rows else np.zeros((0, d2))
    as_f64(ent, "entity vectors")
    as_f64(rel, "relation vectors")
    return KbEmbeddings(entity_names, relation_names, ent, rel)

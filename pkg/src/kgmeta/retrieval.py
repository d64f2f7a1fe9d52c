"""Entity mention matching and sample-set knowledge representations.

Mentions are found by exact case-insensitive n-gram lookup (up to three
tokens, longest match first, overlaps suppressed left-to-right) against
the KB's subject surface forms; the objects of matched subjects form the
concept set, and its element-wise mean embedding summarizes the task.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import UnknownIdError
from .kb_embedding import KbEmbeddings, TripleStore
from .text import tokenize

MAX_MENTION_TOKENS = 3


@dataclass
class SurfaceIndex:
    """Lowercased token n-gram -> subject entity id."""

    entries: dict[tuple[str, ...], int] = field(default_factory=dict)
    collisions: list[tuple[tuple[str, ...], int, int]] = field(default_factory=list)

    def __contains__(self, key: tuple[str, ...]) -> bool:
        return key in self.entries

    def lookup(self, key: tuple[str, ...]) -> int | None:
        return self.entries.get(key)


def build_surface_index(store: TripleStore) -> SurfaceIndex:
    """Index every triple subject by its tokenized surface form.

    Names longer than three tokens (or with no alphanumeric content)
    cannot be matched by the n-gram scan and are skipped. When two
    subjects share a surface form the first one seen wins and the
    collision is recorded.
    """
    index = SurfaceIndex()
    subject_ids: list[int] = []
    seen = set()
    for t in store.triples:
        if t.subject not in seen:
            seen.add(t.subject)
            subject_ids.append(t.subject)
    for entity_id in subject_ids:
        key = tuple(tokenize(store.entity_names[entity_id]))
        if not key or len(key) > MAX_MENTION_TOKENS:
            continue
        if key in index.entries:
            if index.entries[key] != entity_id:
                index.collisions.append((key, index.entries[key], entity_id))
                warnings.warn(
                    f"surface form {' '.join(key)!r} maps to entities "
                    f"{index.entries[key]} and {entity_id}; keeping the first",
                    stacklevel=2)
            continue
        index.entries[key] = entity_id
    return index


def match_mentions(index: SurfaceIndex, sentence: str) -> list[int]:
    """Subject ids mentioned in one sentence, longest-first, no overlaps."""
    tokens = tokenize(sentence)
    found: list[int] = []
    i = 0
    while i < len(tokens):
        matched = False
        for length in range(min(MAX_MENTION_TOKENS, len(tokens) - i), 0, -1):
            entity_id = index.lookup(tuple(tokens[i:i + length]))
            if entity_id is not None:
                found.append(entity_id)
                i += length
                matched = True
                break
        if not matched:
            i += 1
    return found


def retrieve_concepts(index: SurfaceIndex, store: TripleStore,
                      sentences: Iterable[str]) -> set[int]:
    """Objects of every KB subject mentioned in the sample-set sentences."""
    concepts: set[int] = set()
    for sentence in sentences:
        for subject_id in match_mentions(index, sentence):
            concepts |= store.objects_of(subject_id)
    return concepts


def knowledge_representation(concepts: Iterable[int], emb: KbEmbeddings) -> np.ndarray:
    """Element-wise mean of the concept embeddings; zero vector when the
    concept set is empty (degrades scoring to the task-agnostic path)."""
    ids = sorted(set(int(c) for c in concepts))
    if not ids:
        return np.zeros(emb.d2, dtype=np.float64)
    for c in ids:
        if not 0 <= c < emb.entity_vecs.shape[0]:
            raise UnknownIdError(f"unknown entity id {c}")
    return emb.entity_vecs[ids].mean(axis=0)


@dataclass(frozen=True)
class KnowledgeContext:
    """Retrieved concept set and its mean embedding for one sample set."""

    concepts: frozenset[int]
    k_s: np.ndarray


def build_knowledge_context(index: SurfaceIndex, store: TripleStore,
                            emb: KbEmbeddings, sentences: Iterable[str],
                            ) -> KnowledgeContext:
    concepts = retrieve_concepts(index, store, sentences)
    return KnowledgeContext(concepts=frozenset(concepts),
                            k_s=knowledge_representation(concepts, emb))

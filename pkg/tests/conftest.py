"""Shared builders for small deterministic model instances."""

from __future__ import annotations

import numpy as np
import pytest

from kgmeta.encoding import Vocabulary
from kgmeta.episodes import Corpus, LabeledExample, sample_episode
from kgmeta.kb_embedding import TripleStore, init_embeddings
from kgmeta.model import init_model
from kgmeta.rand import STREAM_KB_INIT, STREAM_MODEL_INIT, substream
from kgmeta.retrieval import build_surface_index


def tiny_kb() -> TripleStore:
    """Three facts whose subjects ('intel', 'nvidia') appear in corpus text."""
    store = TripleStore()
    store.add("Intel", "competes with", "Nvidia")
    store.add("Nvidia", "makes", "GPUs")
    store.add("Intel", "makes", "CPUs")
    return store


def toy_kb(seed: int = 0) -> TripleStore:
    """20 entities, 3 relations, 60 triples: two deterministic rings plus
    20 seeded random links."""
    rng = np.random.default_rng(seed)
    store = TripleStore()
    ents = [f"e{i:02d}" for i in range(20)]
    for i in range(20):
        store.add(ents[i], "r0", ents[(i + 1) % 20])
        store.add(ents[i], "r1", ents[(i + 5) % 20])
    count = 0
    while count < 20:
        s, o = rng.integers(0, 20, size=2)
        if s != o:
            before = len(store.triples)
            store.add(ents[s], "r2", ents[o])
            count += len(store.triples) - before
    return store


def worked_example_kb() -> TripleStore:
    """Small hand-written KB of technology facts used for ranking checks."""
    store = TripleStore()
    for fact in [
        ("Intel", "competes with", "Nvidia"),
        ("AMD", "competes with", "Intel"),
        ("Samsung", "competes with", "Micron"),
        ("Intel", "makes", "CPUs"),
        ("Nvidia", "makes", "GPUs"),
        ("AMD", "makes", "CPUs"),
        ("Micron", "makes", "memory"),
        ("Samsung", "makes", "memory"),
        ("Nvidia", "headquartered in", "SantaClara"),
        ("Intel", "headquartered in", "SantaClara"),
        ("AMD", "headquartered in", "SantaClara"),
        ("Samsung", "headquartered in", "Suwon"),
    ]:
        store.add(*fact)
    return store


def tiny_corpus(seed: int = 0, n_per_class: int = 6) -> Corpus:
    """One binary task whose class-1 texts mention 'intel'."""
    rng = np.random.default_rng(seed)
    fillers = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta"]
    corpus = Corpus()
    line = 0
    for z in (1, 2):
        for _ in range(n_per_class):
            words = [str(w) for w in rng.choice(fillers, size=3)]
            if z == 1:
                words.insert(1, "intel")
            line += 1
            corpus.add(LabeledExample(" ".join(words), z, "toy", line_no=line))
    return corpus


@pytest.fixture
def tiny_instance():
    """Fully wired tiny model: d1=4, d2=5, H=3, C=2, N=2, |Q|=2, vocab <= 12."""

    def build(variant: str = "full", seed: int = 0, freeze_kb: bool = True):
        store = tiny_kb()
        kb = init_embeddings(store, 5, substream(seed, STREAM_KB_INIT))
        corpus = tiny_corpus(seed)
        vocab = Vocabulary.from_texts(ex.text for ex in corpus.examples_of("toy"))
        assert len(vocab) <= 12
        model = init_model(vocab, 4, 5, 3, variant,
                           substream(seed, STREAM_MODEL_INIT))
        episode = sample_episode(corpus, C=2, N=2, n=2,
                                 rng=np.random.default_rng(seed + 7))
        index = build_surface_index(store)
        return model, episode, kb, index, store

    return build

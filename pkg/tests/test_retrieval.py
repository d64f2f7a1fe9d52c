"""Tests for surface-form indexing, mention matching, and the sample-set
knowledge representation."""

import numpy as np
import pytest

import kgmeta.model as model_module
from conftest import tiny_kb
from kgmeta.errors import UnknownIdError
from kgmeta.kb_embedding import KbEmbeddings, TripleStore
from kgmeta.retrieval import (
    build_knowledge_context,
    build_surface_index,
    knowledge_representation,
    match_mentions,
    retrieve_concepts,
)
from kgmeta.text import tokenize


def embeddings_for(store: TripleStore, rows) -> KbEmbeddings:
    ent = np.asarray(rows, dtype=np.float64)
    rel = np.zeros((store.n_relations, ent.shape[1]))
    return KbEmbeddings(list(store.entity_names), list(store.relation_names), ent, rel)


class TestTokenizer:
    def test_lowercase_and_punctuation_split(self):
        assert tokenize("I bought an Intel CPU!") == ["i", "bought", "an", "intel", "cpu"]

    def test_non_alphanumeric_separators(self):
        assert tokenize("state-of-the-art, really?") == \
            ["state", "of", "the", "art", "really"]

    def test_empty_text(self):
        assert tokenize("...") == []


class TestSurfaceIndex:
    def test_subjects_become_lowercase_keys(self):
        index = build_surface_index(tiny_kb())
        assert ("intel",) in index
        assert ("nvidia",) in index
        # objects that never appear as subjects are not indexed
        assert ("gpus",) not in index

    def test_empty_store(self):
        index = build_surface_index(TripleStore())
        assert index.entries == {}

    def test_multi_token_subject(self):
        store = TripleStore()
        store.add("new york", "located in", "USA")
        index = build_surface_index(store)
        assert ("new", "york") in index

    def test_overlong_subject_skipped(self):
        store = TripleStore()
        store.add("a b c d", "r", "x")
        index = build_surface_index(store)
        assert index.entries == {}

    def test_collision_keeps_first_and_warns(self):
        store = TripleStore()
        store.add("Apple", "r", "fruit")
        store.add("APPLE", "r", "company")
        first_id = store.entity_id("Apple")
        with pytest.warns(UserWarning, match="apple"):
            index = build_surface_index(store)
        assert index.lookup(("apple",)) == first_id
        assert len(index.collisions) == 1


class TestRetrieveConcepts:
    def test_worked_example(self):
        """KB {(Intel, competes with, Nvidia)}: a sentence mentioning Intel
        retrieves {Nvidia}."""
        store = TripleStore()
        store.add("Intel", "competes with", "Nvidia")
        index = build_surface_index(store)
        concepts = retrieve_concepts(index, store, ["I bought an Intel CPU"])
        assert concepts == {store.entity_id("Nvidia")}

    def test_no_mentions(self):
        store = tiny_kb()
        index = build_surface_index(store)
        assert retrieve_concepts(index, store, ["nothing relevant here"]) == set()

    def test_union_over_sentences(self):
        store = TripleStore()
        store.add("Intel", "competes with", "Nvidia")
        store.add("Nvidia", "makes", "GPUs")
        index = build_surface_index(store)
        concepts = retrieve_concepts(
            index, store, ["Intel shipped a chip", "my Nvidia card is fast"])
        assert concepts == {store.entity_id("Nvidia"), store.entity_id("GPUs")}

    def test_longest_match_first_suppresses_overlaps(self):
        store = TripleStore()
        store.add("new york", "r", "city-things")
        store.add("york", "r", "york-things")
        index = build_surface_index(store)
        assert match_mentions(index, "I love new york a lot") == \
            [store.entity_id("new york")]
        assert match_mentions(index, "I love york a lot") == \
            [store.entity_id("york")]

    def test_order_and_duplicate_invariance(self):
        store = tiny_kb()
        index = build_surface_index(store)
        sents = ["Intel inside", "team green Nvidia", "plain text"]
        a = retrieve_concepts(index, store, sents)
        b = retrieve_concepts(index, store, list(reversed(sents)))
        c = retrieve_concepts(index, store, sents + sents)
        assert a == b == c

    def test_case_insensitive_matching(self):
        store = tiny_kb()
        index = build_surface_index(store)
        assert retrieve_concepts(index, store, ["INTEL!"]) == \
            retrieve_concepts(index, store, ["intel"])


class TestKnowledgeRepresentation:
    def test_single_concept_identity(self):
        store = tiny_kb()
        emb = embeddings_for(store, np.arange(10.0).reshape(5, 2))
        np.testing.assert_array_equal(knowledge_representation([3], emb),
                                      emb.entity_vecs[3])

    def test_mean_of_two(self):
        store = tiny_kb()
        rows = np.zeros((5, 2))
        rows[1] = [1.0, 2.0]
        rows[2] = [3.0, 4.0]
        emb = embeddings_for(store, rows)
        np.testing.assert_array_equal(knowledge_representation([1, 2], emb),
                                      [2.0, 3.0])

    def test_empty_fallback_is_zero(self):
        store = tiny_kb()
        emb = embeddings_for(store, np.ones((5, 3)))
        np.testing.assert_array_equal(knowledge_representation([], emb),
                                      np.zeros(3))

    def test_permutation_invariant_bitwise(self):
        store = tiny_kb()
        rng = np.random.default_rng(8)
        emb = embeddings_for(store, rng.normal(size=(5, 4)))
        a = knowledge_representation([0, 2, 4], emb)
        b = knowledge_representation([4, 0, 2], emb)
        np.testing.assert_array_equal(a, b)

    def test_duplicates_collapse(self):
        store = tiny_kb()
        emb = embeddings_for(store, np.arange(15.0).reshape(5, 3))
        np.testing.assert_array_equal(knowledge_representation([1, 1, 2], emb),
                                      knowledge_representation([1, 2], emb))

    def test_bounded_by_max_component(self):
        store = tiny_kb()
        rng = np.random.default_rng(9)
        emb = embeddings_for(store, rng.normal(size=(5, 4)))
        for _ in range(50):
            ids = rng.choice(5, size=rng.integers(1, 6), replace=False)
            k_s = knowledge_representation(ids, emb)
            assert np.max(np.abs(k_s)) <= \
                max(np.max(np.abs(emb.entity_vecs[i])) for i in ids) + 1e-15

    def test_unknown_concept_rejected(self):
        store = tiny_kb()
        emb = embeddings_for(store, np.ones((5, 2)))
        with pytest.raises(UnknownIdError):
            knowledge_representation([99], emb)


class TestSampleSetIsolation:
    def test_training_retrieval_never_sees_query_text(self, tiny_instance,
                                                      monkeypatch):
        """The knowledge context is built from sample-set sentences only."""
        model, episode, kb, index, store = tiny_instance("full")
        seen: list[str] = []
        original = build_knowledge_context

        def spy(index_, store_, emb_, sentences):
            sentences = list(sentences)
            seen.extend(sentences)
            return original(index_, store_, emb_, sentences)

        monkeypatch.setattr(model_module, "build_knowledge_context", spy)
        model_module.forward_episode(model, episode, kb, index, store)
        assert seen, "retrieval was never invoked"
        sample_texts = {ex.text for ex in episode.sample_set}
        query_texts = {ex.text for ex in episode.query_set} - sample_texts
        assert set(seen) <= sample_texts
        assert not (set(seen) & query_texts)

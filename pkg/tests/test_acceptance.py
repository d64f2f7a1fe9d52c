"""Acceptance suite: one test per criterion, each printing a PASS/FAIL
line (run with `pytest tests/test_acceptance.py -s` to see them live).
"""

import time

import numpy as np

from conftest import tiny_kb, toy_kb
from kgmeta.cli import main
from kgmeta.encoding import Vocabulary
from kgmeta.episodes import (
    Corpus,
    LabeledExample,
    load_corpus,
    read_splits,
    read_support,
    sample_episode,
    split_task_sets,
)
from kgmeta.kb_embedding import hits_at_k, init_embeddings, load_triples, train_kb
from kgmeta.model import backward_episode, forward_episode, init_model
from kgmeta.numerics import grad_check, sigmoid
from kgmeta.rand import STREAM_KB_INIT, STREAM_MODEL_INIT, substream
from kgmeta.relation import combined_score
from kgmeta.retrieval import build_surface_index, retrieve_concepts
from kgmeta.training import TrainConfig, run_variant


def report(number: int, name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"ACCEPTANCE {number} [{name}]: {status}{suffix}")
    assert ok, f"criterion {number} ({name}) failed{suffix}"


def twelve_token_corpus(seed: int = 0) -> Corpus:
    """One binary task over exactly 11 distinct tokens (12 with UNK);
    class-1 texts mention the KB subject 'intel'. Filler words cycle so
    every one of the 10 fillers occurs."""
    offset = seed % 10
    fillers = [f"f{i}" for i in range(10)]
    corpus = Corpus()
    line = 0
    idx = 0
    for z in (1, 2):
        for _ in range(6):
            words = [fillers[(3 * idx + k + offset) % 10] for k in range(3)]
            if z == 1:
                words.insert(1, "intel")
            line += 1
            idx += 1
            corpus.add(LabeledExample(" ".join(words), z, "toy", line))
    return corpus


def wire(seed: int = 0, variant: str = "full", pin_generator: bool = False):
    store = tiny_kb()
    kb = init_embeddings(store, 5, substream(seed, STREAM_KB_INIT))
    corpus = twelve_token_corpus(seed)
    vocab = Vocabulary.from_texts(ex.text for ex in corpus.examples_of("toy"))
    model = init_model(vocab, 4, 5, 3, variant,
                       substream(seed, STREAM_MODEL_INIT),
                       pin_generator=pin_generator)
    index = build_surface_index(store)
    return corpus, vocab, model, kb, index, store


class TestCriterion1EndToEndGradients:
    def test_every_trainable_scalar(self):
        """d1=4, d2=5, H=3, C=2, N=2, |Q|=2, vocabulary 12: analytic
        gradients of the episode loss match central differences."""
        start = time.monotonic()
        corpus, vocab, model, kb, index, store = wire()
        assert len(vocab) == 12
        episode = sample_episode(corpus, C=2, N=2, n=2,
                                 rng=np.random.default_rng(3))
        fwd = forward_episode(model, episode, kb, index, store)
        assert fwd.context.concepts, "knowledge branch must be live"
        grads = backward_episode(model, fwd)

        worst = {}

        def check(name, get, set_, analytic):
            orig = get().copy()

            def f(arr):
                set_(arr)
                return forward_episode(model, episode, kb, index, store).loss

            err = grad_check(f, orig, analytic, 1e-4)
            set_(orig)
            worst[name] = err

        check("token_table", lambda: model.encoder.token_table,
              lambda a: setattr(model.encoder, "token_table", a),
              grads["token_table"])
        check("theta_agn", lambda: model.theta_agn,
              lambda a: setattr(model, "theta_agn", a), grads["theta_agn"])
        check("M", lambda: model.M, lambda a: setattr(model, "M", a),
              grads["M"])
        elapsed = time.monotonic() - start
        ok = all(err < 1e-4 for err in worst.values()) and elapsed < 60.0
        report(1, "end-to-end gradient correctness", ok,
               f"max rel err {max(worst.values()):.2e}, {elapsed:.1f}s")


class TestCriterion2KbRanking:
    def test_toy_kb_learns_to_rank(self):
        start = time.monotonic()
        store = toy_kb()
        assert (store.n_entities, store.n_relations, len(store.triples)) == \
            (20, 3, 60)
        emb, losses = train_kb(store, d2=10, gamma=1.0, epochs=200, seed=0)
        hits = hits_at_k(emb, store.triples, 3)
        elapsed = time.monotonic() - start
        ok = losses[-1] < losses[0] and hits >= 0.8 and elapsed < 60.0
        report(2, "KB embedding learns ranking", ok,
               f"loss {losses[0]:.1f}->{losses[-1]:.1f}, hits@3 {hits:.2f}, "
               f"{elapsed:.1f}s")


class TestCriterion3AblationEquivalence:
    def test_hundred_episodes(self):
        identical = 0
        knowledge_diff = 0
        for seed in range(100):
            corpus, vocab, full, kb, index, store = wire(seed)
            ablation = init_model(vocab, 4, 5, 3, "ablation",
                                  substream(seed, STREAM_MODEL_INIT))
            episode = sample_episode(corpus, 2, 2, 2,
                                     np.random.default_rng(1000 + seed))
            live = forward_episode(full, episode, kb, index, store)
            full.M = np.zeros_like(full.M)
            pinned = forward_episode(full, episode, kb, index, store).scores
            abl = forward_episode(ablation, episode, kb, index, store).scores
            if np.array_equal(pinned, abl):
                identical += 1
            if live.context.concepts and np.max(np.abs(live.scores - abl)) > 1e-6:
                knowledge_diff += 1
        ok = identical == 100 and knowledge_diff >= 1
        report(3, "exact ablation equivalence", ok,
               f"{identical}/100 bit-identical, {knowledge_diff} episodes "
               f"with a live knowledge branch")


class TestCriterion4Table2Direction:
    def test_variant_ordering_over_five_seeds(self, tmp_path):
        """Full beats both ablation and replacement by >= 3 points on the
        diverse-task benchmark, averaged over 5 seeds."""
        start = time.monotonic()
        means = {}
        accs = {v: [] for v in ("full", "ablation", "replacement")}
        for seed in range(5):
            bench = tmp_path / f"bench{seed}"
            assert main(["synth", "--out-dir", str(bench),
                         "--seed", str(seed)]) == 0
            store = load_triples(str(bench / "triples.tsv"))
            emb, _ = train_kb(store, d2=10, gamma=2.0, epochs=200, lr=0.1,
                              seed=seed)
            corpus = load_corpus(str(bench / "corpus.tsv"))
            train_set, test_set = split_task_sets(
                read_splits(str(bench / "splits.tsv")))
            supports = read_support(str(bench / "support.tsv"))
            assert len(train_set) == 8 and len(test_set) == 4
            index = build_surface_index(store)
            for variant in accs:
                cfg = TrainConfig(C=2, N=5, n=10, episodes=300, lr=0.01,
                                  d1=16, H=8, seed=seed, variant=variant)
                result = run_variant(corpus, emb, index, store,
                                     sorted(train_set),
                                     {t: supports[t] for t in sorted(test_set)},
                                     cfg)
                accs[variant].append(result.report.mean_acc)
        for variant, values in accs.items():
            means[variant] = float(np.mean(values))
        elapsed = time.monotonic() - start
        gap_ablation = means["full"] - means["ablation"]
        gap_replacement = means["full"] - means["replacement"]
        ok = (gap_ablation >= 0.03 and gap_replacement >= 0.03
              and elapsed < 600.0)
        report(4, "variant ordering at desk scale", ok,
               f"full {means['full']:.3f} vs ablation {means['ablation']:.3f} "
               f"(+{gap_ablation * 100:.1f}pp) vs replacement "
               f"{means['replacement']:.3f} (+{gap_replacement * 100:.1f}pp), "
               f"{elapsed:.0f}s")


class TestCriterion5ScoreRangeAndFusion:
    def test_randomized_checks(self):
        rng = np.random.default_rng(0)
        checks = 0

        # fused scores from real episodes stay strictly inside (0, 1)
        score_samples = 0
        seed = 0
        while score_samples < 20_000:
            corpus, vocab, model, kb, index, store = wire(seed % 50, "full")
            episode = sample_episode(corpus, 2, 2, 4,
                                     np.random.default_rng(seed))
            scores = forward_episode(model, episode, kb, index, store).scores
            assert np.all(scores > 0.0) and np.all(scores < 1.0)
            score_samples += scores.size
            seed += 1
        checks += score_samples

        # direct fused-score checks across the float64-representable range
        # (sigmoid saturates to exactly 0.0 or 1.0 beyond |u| ~ 36)
        pre = rng.uniform(-18.0, 18.0, size=(40_000, 2))
        fused = sigmoid(pre[:, 0] + pre[:, 1])
        assert np.all((fused > 0.0) & (fused < 1.0))
        checks += pre.shape[0]

        # exact cancellation
        xs = rng.normal(scale=50.0, size=20_000)
        assert all(combined_score(x, -x) == 0.5 for x in xs)
        checks += xs.size

        # argmax invariance under a per-query constant shift
        cols = rng.normal(scale=3.0, size=(20_000, 4))
        shifts = rng.uniform(-20.0, 20.0, size=20_000)
        base = np.argmax(cols, axis=1)
        shifted = np.argmax(cols + shifts[:, None], axis=1)
        assert np.array_equal(base, shifted)
        checks += cols.shape[0]

        report(5, "score range and fusion invariants", checks >= 100_000,
               f"{checks} checks")


class TestCriterion6EpisodeProtocol:
    def test_ten_thousand_episodes(self):
        corpus = Corpus()
        line = 0
        for t in range(3):
            for z in range(1, 4):
                for i in range(12):
                    line += 1
                    corpus.add(LabeledExample(f"txt {t} {z} {i}", z,
                                              f"task{t}", line))
        failures = 0
        for seed in range(10_000):
            episode = sample_episode(corpus, C=2, N=3, n=4,
                                     rng=np.random.default_rng(seed))
            per_class = {z: 0 for z in episode.classes}
            tasks = {ex.task_id for ex in episode.sample_set} | \
                {ex.task_id for ex in episode.query_set}
            for ex in episode.sample_set:
                per_class[ex.label] += 1
            sample_ids = {id(ex) for ex in episode.sample_set}
            if not (len(episode.sample_set) == 6
                    and all(v == 3 for v in per_class.values())
                    and not any(id(ex) in sample_ids for ex in episode.query_set)
                    and tasks == {episode.task_id}):
                failures += 1
        replay = all(
            sample_episode(corpus, 2, 3, 4, np.random.default_rng(s)) ==
            sample_episode(corpus, 2, 3, 4, np.random.default_rng(s))
            for s in range(0, 10_000, 250))
        ok = failures == 0 and replay
        report(6, "episode protocol invariants", ok,
               f"{failures} violations in 10^4 episodes")


class TestCriterion7Reproducibility:
    def test_two_cli_runs_byte_identical(self, tmp_path):
        bench = tmp_path / "bench"
        assert main(["synth", "--out-dir", str(bench), "--seed", "3",
                     "--examples", "12"]) == 0
        kb_path = tmp_path / "kb.txt"
        assert main(["kb-train", str(bench / "triples.tsv"),
                     "--out", str(kb_path), "--d2", "8", "--epochs", "25",
                     "--seed", "3"]) == 0
        outputs = []
        for run in ("r1", "r2"):
            out = tmp_path / run
            assert main(["train", str(bench / "corpus.tsv"), str(kb_path),
                         "--triple-store", str(bench / "triples.tsv"),
                         "--splits", str(bench / "splits.tsv"),
                         "--out-dir", str(out), "--episodes", "40",
                         "--d1", "8", "--H", "4", "--seed", "3"]) == 0
            outputs.append({
                "loss": (out / "loss.csv").read_bytes(),
                "checkpoint": (out / "checkpoint.txt").read_bytes(),
            })
        ok = (outputs[0]["loss"] == outputs[1]["loss"]
              and outputs[0]["checkpoint"] == outputs[1]["checkpoint"])
        report(7, "reproducibility", ok,
               f"{len(outputs[0]['checkpoint'])} checkpoint bytes compared")


class TestCriterion8RetrievalCorrectness:
    def test_worked_kb_and_zero_fallback(self):
        from kgmeta.kb_embedding import TripleStore

        store = TripleStore()
        store.add("Intel", "competes with", "Nvidia")
        index = build_surface_index(store)
        mention = retrieve_concepts(index, store,
                                    ["I just bought an Intel CPU",
                                     "the delivery was slow"])
        nvidia_only = mention == {store.entity_id("Nvidia")}
        empty = retrieve_concepts(index, store, ["nothing relevant at all"])

        # k_S = 0 fallback: a mention-free sample set drives the full model
        # onto the ablation path bit-for-bit
        rng = np.random.default_rng(5)
        fillers = [f"f{i}" for i in range(10)]
        corpus = Corpus()
        line = 0
        for z in (1, 2):
            for _ in range(5):
                line += 1
                corpus.add(LabeledExample(
                    " ".join(str(w) for w in rng.choice(fillers, size=4)),
                    z, "plain", line))
        vocab = Vocabulary.from_texts(ex.text for ex in corpus.examples_of("plain"))
        kb = init_embeddings(store, 5, substream(9, STREAM_KB_INIT))
        full = init_model(vocab, 4, 5, 3, "full", substream(9, STREAM_MODEL_INIT))
        ablation = init_model(vocab, 4, 5, 3, "ablation",
                              substream(9, STREAM_MODEL_INIT))
        episode = sample_episode(corpus, 2, 2, 3, np.random.default_rng(77))
        fwd_full = forward_episode(full, episode, kb, index, store)
        fwd_abl = forward_episode(ablation, episode, kb, index, store)
        fallback_ok = (not fwd_full.context.concepts
                       and np.all(fwd_full.context.k_s == 0.0)
                       and np.array_equal(fwd_full.scores, fwd_abl.scores))
        ok = nvidia_only and empty == set() and fallback_ok
        report(8, "retrieval correctness", ok,
               f"K(S)={sorted(store.entity_names[c] for c in mention)}, "
               f"fallback bit-exact {fallback_ok}")

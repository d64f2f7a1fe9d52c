"""Synthetic diverse-task benchmark generator.

Tasks come in families. Each task has its own keyword that decides the
label: positive-class texts contain it, negative-class texts do not.
The keyword is a KB subject whose objects form a per-family concept
cluster, so retrieval identifies the family from the sample set alone.
Positive texts also carry family-specific signal tokens (shared within
the family, so they transfer to test tasks), and every text carries
signal tokens of the *other* family as class-uncorrelated noise: a
single shared metric is degraded by the noise dimensions, while a
family-conditioned metric can suppress them. Test tasks use fresh
keywords (out-of-vocabulary at test time) so only the knowledge route
can identify the family.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .errors import ConfigError
from .rand import STREAM_SYNTH, substream

FAMILY_NAMES = ("orchard", "harbor")
RELATION_NAMES = ("indicates", "member_of", "linked_with")
OBJECTS_PER_FAMILY = 3
SIGNALS_PER_CLASS = 4


@dataclass
class SynthConfig:
    """Knobs of the generated benchmark."""

    tasks: int = 12            # total tasks; the last tasks//3 are the test split
    classes: int = 2
    examples: int = 30         # per class per task
    vocab: int = 30            # background token pool size
    kb_size: int = 30          # extra filler triples beyond the anchor links
    seed: int = 0
    support_per_class: int = 5
    signal_tokens: int = 2     # per text, from the task family's class signals
    noise_tokens: int = 2      # per text, from the other family's signal pool
    background_tokens: int = 2

    def validate(self) -> None:
        for name in ("tasks", "classes", "examples", "vocab", "kb_size",
                     "support_per_class"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.tasks < 2:
            raise ConfigError("need at least 2 tasks (one train, one test)")
        if self.examples <= self.support_per_class:
            raise ConfigError(
                f"examples per class ({self.examples}) must exceed the fixed "
                f"support size ({self.support_per_class})")


def _signal_token(family: str, class_id: int, i: int) -> str:
    return f"{family}{class_id}sig{i}"


def _family_pool(family: str, classes: int) -> list[str]:
    return [_signal_token(family, z, i)
            for z in range(1, classes + 1) for i in range(SIGNALS_PER_CLASS)]


@dataclass
class SynthPaths:
    corpus: str
    triples: str
    splits: str
    support: str


def generate_benchmark(out_dir: str, cfg: SynthConfig) -> SynthPaths:
    """Write corpus, triple, split, and support files; byte-deterministic
    under a fixed seed."""
    cfg.validate()
    rng = substream(cfg.seed, STREAM_SYNTH)
    os.makedirs(out_dir, exist_ok=True)
    paths = SynthPaths(
        corpus=os.path.join(out_dir, "corpus.tsv"),
        triples=os.path.join(out_dir, "triples.tsv"),
        splits=os.path.join(out_dir, "splits.tsv"),
        support=os.path.join(out_dir, "support.tsv"),
    )

    n_test = max(1, cfg.tasks // 3)
    n_train = cfg.tasks - n_test
    families = [FAMILY_NAMES[t % len(FAMILY_NAMES)] for t in range(cfg.tasks)]
    anchors = [f"topic{t:02d}" for t in range(cfg.tasks)]
    task_ids = [f"task{t:02d}" for t in range(cfg.tasks)]
    background = [f"word{i:02d}" for i in range(cfg.vocab)]

    # corpus
    corpus_lines: list[str] = []
    line_numbers: dict[tuple[str, int], list[int]] = {}
    lineno = 0
    for t in range(cfg.tasks):
        family = families[t]
        other = FAMILY_NAMES[1 - FAMILY_NAMES.index(family)]
        noise_pool = _family_pool(other, cfg.classes)
        for z in range(1, cfg.classes + 1):
            # the task keyword decides the label: only the highest class
            # carries it (other classes get one extra filler so text
            # length carries no signal)
            positive = z == cfg.classes
            own = [_signal_token(family, z, i) for i in range(SIGNALS_PER_CLASS)]
            for _e in range(cfg.examples):
                tokens = [anchors[t]] if positive else \
                    [background[int(rng.integers(0, len(background)))]]
                tokens += [own[int(i)] for i in
                           rng.integers(0, len(own), size=cfg.signal_tokens)]
                tokens += [noise_pool[int(i)] for i in
                           rng.integers(0, len(noise_pool), size=cfg.noise_tokens)]
                tokens += [background[int(i)] for i in
                           rng.integers(0, len(background), size=cfg.background_tokens)]
                perm = rng.permutation(len(tokens))
                text = " ".join(tokens[int(i)] for i in perm)
                lineno += 1
                corpus_lines.append(f"{task_ids[t]}\t{z}\t{text}")
                line_numbers.setdefault((task_ids[t], z), []).append(lineno)
    with open(paths.corpus, "w", encoding="utf-8") as fh:
        fh.write("\n".join(corpus_lines) + "\n")

    # knowledge base: anchors link to their family's object cluster
    triple_lines: list[str] = []
    for t in range(cfg.tasks):
        family = families[t]
        for j in range(OBJECTS_PER_FAMILY):
            relation = RELATION_NAMES[j % len(RELATION_NAMES)]
            triple_lines.append(f"{anchors[t]}\t{relation}\t{family}_concept{j}")
    filler_entities = [f"filler{i:02d}" for i in range(max(4, cfg.kb_size // 3))]
    for i in range(cfg.kb_size):
        s = filler_entities[int(rng.integers(0, len(filler_entities)))]
        r = RELATION_NAMES[int(rng.integers(0, len(RELATION_NAMES)))]
        targets = ([f"{fam}_concept{j}" for fam in FAMILY_NAMES
                    for j in range(OBJECTS_PER_FAMILY)] + filler_entities)
        o = targets[int(rng.integers(0, len(targets)))]
        if o == s:
            o = filler_entities[(filler_entities.index(s) + 1) % len(filler_entities)]
        triple_lines.append(f"{s}\t{r}\t{o}")
    # the filler draw may repeat a triple; keep first occurrences only
    seen = set()
    unique_triples = []
    for line in triple_lines:
        if line not in seen:
            seen.add(line)
            unique_triples.append(line)
    with open(paths.triples, "w", encoding="utf-8") as fh:
        fh.write("\n".join(unique_triples) + "\n")

    # splits: the trailing tasks form the test set
    with open(paths.splits, "w", encoding="utf-8") as fh:
        for t in range(cfg.tasks):
            membership = "train" if t < n_train else "test"
            fh.write(f"{task_ids[t]}\t{membership}\n")

    # fixed supports: the first support_per_class lines of each class
    with open(paths.support, "w", encoding="utf-8") as fh:
        for t in range(n_train, cfg.tasks):
            lines: list[int] = []
            for z in range(1, cfg.classes + 1):
                lines.extend(line_numbers[(task_ids[t], z)][:cfg.support_per_class])
            fh.write(f"{task_ids[t]}\t" + ",".join(str(v) for v in lines) + "\n")
    return paths

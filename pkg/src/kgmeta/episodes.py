"""Corpus ingestion and C-way N-shot episode sampling.

A corpus line is `task_id<TAB>label<TAB>text` with integer labels 1..C
per task. Episodes never mix classes across tasks; the sample set holds
exactly N examples per chosen class and the query set is drawn from the
remaining examples of those classes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import CorpusParseError, DataError, SamplingError


@dataclass(frozen=True)
class LabeledExample:
    text: str
    label: int
    task_id: str
    line_no: int = 0  # 1-based line in the corpus file; 0 for synthetic examples


@dataclass
class Corpus:
    """Examples grouped by task id and class id."""

    tasks: dict[str, dict[int, list[LabeledExample]]] = field(default_factory=dict)

    @property
    def task_ids(self) -> list[str]:
        return list(self.tasks.keys())

    def class_counts(self) -> dict[str, dict[int, int]]:
        """Per-task class-size report."""
        return {tid: {label: len(exs) for label, exs in classes.items()}
                for tid, classes in self.tasks.items()}

    def examples_of(self, task_id: str) -> list[LabeledExample]:
        classes = self.tasks[task_id]
        return [ex for label in sorted(classes) for ex in classes[label]]

    def subset(self, task_ids: Iterable[str]) -> "Corpus":
        keep = set(task_ids)
        return Corpus(tasks={tid: cls for tid, cls in self.tasks.items() if tid in keep})

    def add(self, ex: LabeledExample) -> None:
        self.tasks.setdefault(ex.task_id, {}).setdefault(ex.label, []).append(ex)

    def validate(self) -> None:
        """Every task must have classes exactly 1..C with no empty class."""
        for tid, classes in self.tasks.items():
            c_max = max(classes)
            missing = [z for z in range(1, c_max + 1) if z not in classes or not classes[z]]
            if missing:
                raise DataError(
                    f"task '{tid}' declares classes up to {c_max} but has no "
                    f"examples for class(es) {missing}")


def load_corpus(path: str) -> Corpus:
    """Parse a corpus file; malformed lines and empty classes are errors."""
    corpus = Corpus()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise CorpusParseError(
                    f"expected task_id<TAB>label<TAB>text, got {line!r}",
                    path=path, line=lineno)
            task_id, label_str, text = parts
            if not task_id or not text:
                raise CorpusParseError(
                    f"task id and text must be non-empty, got {line!r}",
                    path=path, line=lineno)
            try:
                label = int(label_str)
            except ValueError as exc:
                raise CorpusParseError(
                    f"label must be an integer, got {label_str!r}",
                    path=path, line=lineno) from exc
            if label < 1:
                raise CorpusParseError(
                    f"labels are 1-based class ids, got {label}",
                    path=path, line=lineno)
            corpus.add(LabeledExample(text=text, label=label, task_id=task_id,
                                      line_no=lineno))
    corpus.validate()
    return corpus


@dataclass(frozen=True)
class Episode:
    """One C-way N-shot task: a sample (support) set and a query set."""

    task_id: str
    classes: tuple[int, ...]
    sample_set: tuple[LabeledExample, ...]  # C*N examples, N per class
    query_set: tuple[LabeledExample, ...]


def _eligible_classes(classes: dict[int, list[LabeledExample]], need: int) -> list[int]:
    return sorted(label for label, exs in classes.items() if len(exs) >= need)


def sample_episode(corpus: Corpus, C: int, N: int, n: int,
                   rng: np.random.Generator,
                   balanced_queries: bool = False) -> Episode:
    """Sample one episode: a uniform eligible task, a uniform subset of C
    eligible classes, N samples per class, and n queries from the pooled
    remainder (per-class balanced when `balanced_queries`).
    """
    if C < 1 or N < 1 or n < 1:
        raise SamplingError(f"episode shape must be positive, got C={C} N={N} n={n}")
    need = N + math.ceil(n / C)
    eligible = [tid for tid, classes in corpus.tasks.items()
                if len(_eligible_classes(classes, need)) >= C]
    if not eligible:
        best_tid, best = None, -1
        for tid, classes in corpus.tasks.items():
            k = len(_eligible_classes(classes, need))
            if k > best:
                best_tid, best = tid, k
        detail = (f"best task '{best_tid}' has only {best} class(es) with >= "
                  f"{need} examples" if best_tid is not None else "corpus is empty")
        raise SamplingError(
            f"no task has {C} classes with at least {need} (= N + ceil(n/C)) "
            f"examples each; {detail}")
    task_id = eligible[int(rng.integers(0, len(eligible)))]
    classes = corpus.tasks[task_id]
    candidates = _eligible_classes(classes, need)
    chosen = sorted(int(z) for z in rng.choice(candidates, size=C, replace=False))

    sample_set: list[LabeledExample] = []
    remainder: list[LabeledExample] = []
    per_class_remainder: dict[int, list[LabeledExample]] = {}
    for z in chosen:
        pool = classes[z]
        idx = rng.choice(len(pool), size=N, replace=False)
        picked = set(int(i) for i in idx)
        sample_set.extend(pool[i] for i in sorted(picked))
        rest = [pool[i] for i in range(len(pool)) if i not in picked]
        remainder.extend(rest)
        per_class_remainder[z] = rest

    queries: list[LabeledExample] = []
    if balanced_queries:
        per_class = math.ceil(n / C)
        for z in chosen:
            rest = per_class_remainder[z]
            take = min(per_class, len(rest))
            idx = rng.choice(len(rest), size=take, replace=False)
            queries.extend(rest[i] for i in sorted(int(i) for i in idx))
        queries = queries[:n]
    else:
        idx = rng.choice(len(remainder), size=n, replace=False)
        queries = [remainder[i] for i in sorted(int(i) for i in idx)]
    return Episode(task_id=task_id, classes=tuple(chosen),
                   sample_set=tuple(sample_set), query_set=tuple(queries))


def read_splits(path: str) -> dict[str, str]:
    """Read `task_id<TAB>{train|test}` lines into a membership map."""
    splits: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or parts[1] not in ("train", "test"):
                raise CorpusParseError(
                    f"expected task_id<TAB>train|test, got {line!r}",
                    path=path, line=lineno)
            task_id, membership = parts
            if splits.get(task_id, membership) != membership:
                # listed under both memberships: keep both facts so the
                # overlap check can reject it downstream
                splits[task_id] = "both"
            else:
                splits[task_id] = membership
    return splits


def split_task_sets(splits: dict[str, str]) -> tuple[set[str], set[str]]:
    train = {tid for tid, m in splits.items() if m in ("train", "both")}
    test = {tid for tid, m in splits.items() if m in ("test", "both")}
    return train, test


def read_support(path: str) -> dict[str, list[int]]:
    """Read `task_id<TAB>line,line,...` fixed-support designations."""
    supports: dict[str, list[int]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise CorpusParseError(
                    f"expected task_id<TAB>line_numbers, got {line!r}",
                    path=path, line=lineno)
            try:
                numbers = [int(v) for v in parts[1].split(",") if v]
            except ValueError as exc:
                raise CorpusParseError(
                    f"support line numbers must be integers, got {parts[1]!r}",
                    path=path, line=lineno) from exc
            if not numbers:
                raise CorpusParseError("empty support list", path=path, line=lineno)
            supports[parts[0]] = numbers
    return supports

"""Trainable bag-of-embeddings sentence encoder, class prototypes, and
query/class pair representations.

The encoder maps a sentence to the mean of its token-embedding rows. It
hides behind a small surface (sentence -> R^d1) so a contextual encoder
could replace it without touching anything downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, EncodingError
from .numerics import check_vector
from .text import tokenize

UNK_TOKEN = "<unk>"
UNK_ID = 0


@dataclass
class Vocabulary:
    """Token -> id table; id 0 is reserved for unknown tokens."""

    tokens: list[str] = field(default_factory=lambda: [UNK_TOKEN])

    def __post_init__(self):
        if not self.tokens or self.tokens[0] != UNK_TOKEN:
            self.tokens = [UNK_TOKEN] + [t for t in self.tokens if t != UNK_TOKEN]
        self._ids = {tok: i for i, tok in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "Vocabulary":
        """Build in first-occurrence order over the tokenized texts."""
        tokens = [UNK_TOKEN]
        seen = {UNK_TOKEN}
        for text in texts:
            for tok in tokenize(text):
                if tok not in seen:
                    seen.add(tok)
                    tokens.append(tok)
        return cls(tokens=tokens)

    def token_id(self, token: str) -> int:
        return self._ids.get(token, UNK_ID)

    def encode(self, text: str) -> list[int]:
        """Token ids for `text`; a text with no tokens maps to [UNK]."""
        ids = [self.token_id(t) for t in tokenize(text)]
        return ids if ids else [UNK_ID]

    def sentence(self, text: str) -> "Sentence":
        return Sentence(token_ids=self.encode(text), raw_text=text)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for tok in self.tokens:
                fh.write(tok + "\n")

    @classmethod
    def load(cls, path: str) -> "Vocabulary":
        with open(path, "r", encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh if line.rstrip("\n")]
        return cls(tokens=tokens)


@dataclass(frozen=True)
class Sentence:
    """Tokenized text; ids resolve against one Vocabulary."""

    token_ids: Sequence[int]
    raw_text: str


@dataclass
class EncoderParams:
    """Trainable token-embedding table, one row per vocabulary id."""

    token_table: np.ndarray  # (V, d1)

    @property
    def d1(self) -> int:
        return int(self.token_table.shape[1])

    @property
    def vocab_size(self) -> int:
        return int(self.token_table.shape[0])


def init_encoder(vocab_size: int, d1: int, rng: np.random.Generator) -> EncoderParams:
    return EncoderParams(token_table=rng.normal(0.0, 0.1, size=(vocab_size, d1)))


def encode_sentence(enc: EncoderParams, s: Sentence) -> np.ndarray:
    """Mean of the token-table rows for the sentence's token ids."""
    if len(s.token_ids) == 0:
        raise EncodingError(f"cannot encode empty sentence {s.raw_text!r}")
    for t in s.token_ids:
        if not 0 <= t < enc.vocab_size:
            raise EncodingError(f"token id {t} outside vocabulary of size {enc.vocab_size}")
    return enc.token_table[list(s.token_ids)].mean(axis=0)


def accumulate_encoder_grad(grad_table: np.ndarray, s: Sentence,
                            d_encoding: np.ndarray) -> None:
    """Backprop of encode_sentence: each token row receives d_encoding / T,
    with repeated tokens accumulating once per occurrence."""
    coeff = 1.0 / len(s.token_ids)
    for t in s.token_ids:
        grad_table[t] += coeff * d_encoding


def class_prototype(encoded: Sequence[np.ndarray]) -> np.ndarray:
    """Element-wise mean of the encodings of one class's sample sentences."""
    if len(encoded) == 0:
        raise EncodingError("cannot build a prototype from an empty class")
    return np.mean(np.stack(encoded, axis=0), axis=0)


def pair_representation(c_z: np.ndarray, h_query: np.ndarray) -> np.ndarray:
    """Concatenation(class vector, query vector), class vector first."""
    c_z = check_vector(c_z, None, "c_z")
    h_query = check_vector(h_query, None, "h_query")
    if c_z.size != h_query.size:
        raise DimensionError(
            f"c_z has size {c_z.size} but h_query has size {h_query.size}")
    return np.concatenate([c_z, h_query])

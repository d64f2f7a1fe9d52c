"""Relation scoring: a task-agnostic two-layer relation network, a linear
hypernetwork that generates task-relevant network parameters from the
knowledge representation, sigmoid fusion of the two scores, and the
episode-level squared-error loss.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError
from .numerics import Mlp2Cache, check_matrix, check_vector, mlp2_forward, sigmoid


@dataclass
class RelationNetParams:
    """Two-layer relation network parameters.

    Flattened layout (fixed, part of the checkpoint format): W1 row-major,
    then b1, then w2, then b2. For input dimension 2*d1 and hidden width H
    the flattened length is d3 = 2*d1*H + H + H + 1.
    """

    W1: np.ndarray  # (H, 2*d1)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (H,)
    b2: float

    @property
    def hidden_dim(self) -> int:
        return int(self.W1.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.W1.shape[1])

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.w2, [self.b2]])

    @classmethod
    def from_flat(cls, flat: np.ndarray, input_dim: int, hidden_dim: int,
                  ) -> "RelationNetParams":
        flat = check_vector(flat, param_count(input_dim, hidden_dim), "flat parameters")
        n_w1 = hidden_dim * input_dim
        W1 = flat[:n_w1].reshape(hidden_dim, input_dim)
        b1 = flat[n_w1:n_w1 + hidden_dim]
        w2 = flat[n_w1 + hidden_dim:n_w1 + 2 * hidden_dim]
        b2 = float(flat[-1])
        return cls(W1=W1, b1=b1, w2=w2, b2=b2)

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int) -> "RelationNetParams":
        return cls.from_flat(np.zeros(param_count(input_dim, hidden_dim)),
                             input_dim, hidden_dim)


def param_count(input_dim: int, hidden_dim: int) -> int:
    """Flattened parameter count d3 of one relation network."""
    return input_dim * hidden_dim + hidden_dim + hidden_dim + 1


@dataclass
class GeneratorParams:
    """Linear map from the knowledge representation (dim d2) to a flattened
    relation-network parameter block (dim d3). No bias unless enabled."""

    M: np.ndarray                 # (d3, d2)
    input_dim: int                # 2*d1 of the generated network
    hidden_dim: int               # H of the generated network
    bias: np.ndarray | None = None  # (d3,) optional, off by default

    def __post_init__(self):
        d3 = param_count(self.input_dim, self.hidden_dim)
        check_matrix(self.M, (d3, None), "M")
        if self.bias is not None:
            check_vector(self.bias, d3, "generator bias")


def generate_params(gen: GeneratorParams, k_s: np.ndarray) -> RelationNetParams:
    """Task-relevant parameters M @ k_S, unflattened per the fixed layout."""
    k_s = check_vector(k_s, gen.M.shape[1], "k_S")
    flat = gen.M @ k_s
    if gen.bias is not None:
        flat = flat + gen.bias
    return RelationNetParams.from_flat(flat, gen.input_dim, gen.hidden_dim)


def score_with_cache(params: RelationNetParams, p: np.ndarray,
                     ) -> tuple[float, Mlp2Cache]:
    return mlp2_forward(params.W1, params.b1, params.w2, params.b2, p)


def agnostic_score(theta_agn: RelationNetParams, p: np.ndarray) -> float:
    """Task-agnostic relation score of one (class, query) pair."""
    return score_with_cache(theta_agn, p)[0]


def relevant_score(theta_rel: RelationNetParams, p: np.ndarray) -> float:
    """Task-relevant relation score under generated parameters."""
    return score_with_cache(theta_rel, p)[0]


def combined_score(r_agn: float, r_rel: float) -> float:
    """Fused relation score sigmoid(r_agn + r_rel), strictly in (0, 1)."""
    return float(sigmoid(float(r_agn) + float(r_rel)))


def episode_loss(scores: np.ndarray, labels: Sequence[int], classes: Sequence[int],
                 squared: bool = True) -> float:
    """Sum over classes and queries of the squared residual between the
    fused score and the match indicator.

    `scores[z, j]` is the fused score of query j against classes[z];
    `labels[j]` must appear in `classes`. The un-squared residual form
    (`squared=False`) is kept only to document its behavior; it is
    unbounded below and not used for training.
    """
    scores = check_matrix(scores, (len(classes), len(labels)), "scores")
    class_set = set(classes)
    for j, y in enumerate(labels):
        if y not in class_set:
            raise DataError(f"label {y} of query {j} is not among episode classes "
                            f"{sorted(class_set)}")
    targets = np.array([[1.0 if y == z else 0.0 for y in labels] for z in classes])
    residual = scores - targets
    if squared:
        return float(np.sum(residual * residual))
    return float(np.sum(residual))

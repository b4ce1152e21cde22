"""Training objective: fairness contrastive term, cross-entropy, and their mix.

The contrastive term treats each patient's synthetic counterpart embedding as
the positive and every other counterpart in the minibatch as a negative, over
temperature-scaled cosine similarities.  A small spread penalty pulls the
counterpart embeddings toward their minibatch mean.  Cross-entropy is batch
summed, not averaged, and the total is the convex mix of the two.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, DomainError
from .tensor import Tensor
from . import tensor as T

DENOMINATOR_POLICIES = ("include_positive", "negatives_only")
PROB_FLOOR = 1e-12


@dataclass
class LossConfig:
    temperature: float = 0.5
    cluster_weight: float = 0.1
    fairness_weight: float = 0.6
    denominator_policy: str = "include_positive"

    def __post_init__(self):
        if self.temperature <= 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        if self.cluster_weight < 0:
            raise ConfigError(f"cluster_weight must be >= 0, got {self.cluster_weight}")
        if not 0.0 <= self.fairness_weight <= 1.0:
            raise ConfigError(f"fairness_weight must lie in [0, 1], got {self.fairness_weight}")
        if self.denominator_policy not in DENOMINATOR_POLICIES:
            raise ConfigError(
                f"denominator_policy must be one of {DENOMINATOR_POLICIES}, "
                f"got {self.denominator_policy!r}"
            )


def _row_normalize(t: Tensor) -> Tensor:
    norms = np.linalg.norm(t.data, axis=1)
    if np.any(norms == 0.0):
        raise DomainError("cosine similarity is undefined for a zero-norm embedding")
    sq = T.reduce_sum(T.mul(t, t), axis=1, keepdims=True)
    return T.div(t, T.sqrt(sq))


def contrastive_fair_loss(real_emb: Tensor, synth_emb: Tensor, config: LossConfig) -> Tensor:
    """Counterpart-anchored contrastive loss plus the counterpart spread penalty.

    Row k of ``real_emb`` is paired with row k of ``synth_emb``; the other
    synthetic rows act as negatives.  With the default denominator policy the
    positive also appears in the denominator, which keeps every per-row term
    non-negative.
    """
    real_emb, synth_emb = T._coerce(real_emb), T._coerce(synth_emb)
    if real_emb.ndim != 2 or real_emb.shape != synth_emb.shape:
        raise ContractError(
            f"embedding batches must share an [N, d] shape, "
            f"got {real_emb.shape} and {synth_emb.shape}"
        )
    n = real_emb.shape[0]
    if n == 0:
        raise ContractError("contrastive loss needs a non-empty batch")
    if n == 1 and config.denominator_policy == "negatives_only":
        raise ContractError("negatives_only needs at least two records in the batch")

    sims = T.matmul(_row_normalize(real_emb), T.transpose(_row_normalize(synth_emb)))
    logits = T.scale(sims, 1.0 / config.temperature)
    eye = np.eye(n)
    exp_logits = T.exp(logits)
    positive_logits = T.reduce_sum(T.mul(logits, eye), axis=1)
    denom = T.reduce_sum(exp_logits, axis=1)
    if config.denominator_policy == "negatives_only":
        denom = T.sub(denom, T.reduce_sum(T.mul(exp_logits, eye), axis=1))
    loss = T.reduce_sum(T.sub(T.log(denom), positive_logits))

    if config.cluster_weight > 0:
        centered = T.sub(synth_emb, T.reduce_mean(synth_emb, axis=0, keepdims=True))
        spread = T.scale(T.reduce_sum(T.mul(centered, centered)), 1.0 / n)
        loss = T.add(loss, T.scale(spread, config.cluster_weight))
    return loss


def cross_entropy(probs: Tensor, labels) -> Tensor:
    """Summed negative log-likelihood of the true classes.

    ``probs`` is [N, C] of class probabilities; entries are floored at 1e-12
    before the log so a confidently wrong classifier yields a large finite
    loss rather than an infinity.
    """
    probs = T._coerce(probs)
    labels = np.asarray(labels)
    if probs.ndim != 2:
        raise ContractError(f"probabilities must be [N, C], got shape {probs.shape}")
    if labels.shape != (probs.shape[0],):
        raise ContractError(
            f"labels must be a vector of length {probs.shape[0]}, got shape {labels.shape}"
        )
    if not np.all(np.isin(labels, np.arange(probs.shape[1]))):
        raise ContractError("labels must index a probability column")
    one_hot = np.zeros(probs.shape)
    one_hot[np.arange(labels.size), labels.astype(int)] = 1.0
    picked = T.reduce_sum(T.mul(probs, one_hot), axis=1)
    return T.scale(T.reduce_sum(T.log(T.clip(picked, lo=PROB_FLOOR))), -1.0)


def total_loss(l_cf: Tensor, l_ce: Tensor, fairness_weight: float) -> Tensor:
    """Convex combination: fairness_weight on the contrastive term, the
    remainder on cross-entropy."""
    if not 0.0 <= fairness_weight <= 1.0:
        raise ConfigError(f"fairness_weight must lie in [0, 1], got {fairness_weight}")
    return T.add(T.scale(l_cf, fairness_weight), T.scale(l_ce, 1.0 - fairness_weight))

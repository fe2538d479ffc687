"""Training objectives.

Every loss is a mean over the mini-batch and is minimised. Teacher quantities
enter as plain arrays, so no gradient can reach a teacher.
"""
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from meb.core.errors import ConfigError, ContractError, DimensionError
from meb.losses.mining import MinedBatch
from meb.numcore import (
    Tensor,
    clamp,
    gather,
    log,
    log_softmax,
    mean,
    mul,
    pairwise_l2,
    sigmoid,
    softplus,
    sub,
    sum_,
)
from meb.schemas.reports import LossBreakdown
from meb.schemas.training import LossConfig

PROB_CLAMP = (1e-7, 1.0 - 1e-7)
ROW_SUM_TOLERANCE = 1e-4


def _values(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x)


def id_loss(logits: Tensor, labels, epsilon: float) -> Tensor:
    """Label-smoothed cross-entropy: q = 1 - eps + eps/C on the true class, eps/C elsewhere."""
    labels = np.asarray(labels, dtype=np.int64)
    B, C = logits.shape
    if labels.shape != (B,):
        raise DimensionError(f"id_loss: {B} logits rows but {labels.shape} labels")
    if labels.size and (labels.min() < 0 or labels.max() >= C):
        raise DimensionError(f"id_loss: labels must lie in [0, {C})")
    logp = log_softmax(logits)
    true_term = mean(gather(logp, np.arange(B), labels))
    if epsilon == 0.0:
        return -true_term
    spread = mean(sum_(logp, axis=1))
    return -((1.0 - epsilon) * true_term + (epsilon / C) * spread)


def _triplet_distances(features: Tensor, mined: MinedBatch) -> tuple[Tensor, Tensor]:
    dist = pairwise_l2(features, features)
    return gather(dist, mined.anchors, mined.positives), gather(dist, mined.anchors, mined.negatives)


def softmax_triplet_loss(features: Tensor, mined: MinedBatch) -> Tensor:
    """mean of -log(e^{d-} / (e^{d+} + e^{d-})) = mean softplus(d+ - d-)."""
    d_pos, d_neg = _triplet_distances(features, mined)
    return mean(softplus(sub(d_pos, d_neg)))


def triplet_probability(features: Tensor, mined: MinedBatch) -> Tensor:
    """P_i = e^{d-} / (e^{d+} + e^{d-}) per anchor."""
    d_pos, d_neg = _triplet_distances(features, mined)
    return sigmoid(sub(d_neg, d_pos))


def mutual_id_loss(student_logits: Tensor, teacher_probs) -> Tensor:
    probs = np.asarray(_values(teacher_probs), dtype=np.float64)
    if probs.shape != student_logits.shape:
        raise DimensionError(f"mutual_id_loss: teacher {probs.shape} vs student {student_logits.shape}")
    if np.any(probs < 0) or np.any(np.abs(probs.sum(axis=1) - 1.0) > ROW_SUM_TOLERANCE):
        raise ContractError("teacher class probabilities must be non-negative rows summing to 1")
    return -mean(sum_(mul(log_softmax(student_logits), probs), axis=1))


def mutual_triplet_loss(p_student: Tensor, p_teacher) -> Tensor:
    """Binary cross-entropy between student and teacher triplet probabilities."""
    target = np.asarray(_values(p_teacher), dtype=np.float64)
    if target.shape != p_student.shape:
        raise DimensionError(f"mutual_triplet_loss: teacher {target.shape} vs student {p_student.shape}")
    low, high = PROB_CLAMP
    if not np.all(np.isfinite(target)) or np.any(target < 0.0) or np.any(target > 1.0):
        raise ContractError("teacher triplet probabilities must lie in [0, 1]")
    target = np.clip(target, low, high)
    p = clamp(p_student, low, high)
    bce = mul(log(p), target) + mul(log(sub(1.0, p)), 1.0 - target)
    return -mean(bce)


def source_loss(features: Tensor, logits: Tensor, labels, mined: MinedBatch, epsilon: float) -> tuple[Tensor, Tensor]:
    """Identity and softmax-triplet terms of supervised training."""
    return id_loss(logits, labels, epsilon), softmax_triplet_loss(features, mined)


def voting_loss(features: Tensor, logits: Tensor, pseudo_labels, mined: MinedBatch, epsilon: float) -> tuple[Tensor, Tensor]:
    """The supervised objective applied to cluster pseudo-labels."""
    return source_loss(features, logits, pseudo_labels, mined, epsilon)


@dataclass(frozen=True)
class TeacherSignal:
    """Detached outputs of one teacher on the current batch."""

    index: int
    probs: np.ndarray
    triplet_prob: np.ndarray


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def teacher_signal(index: int, features, logits, mined: MinedBatch) -> TeacherSignal:
    """Class probabilities and triplet probabilities of a teacher over the student's mined triplets."""
    feats = np.asarray(_values(features), dtype=np.float64)
    probs = _softmax_rows(np.asarray(_values(logits), dtype=np.float64))
    diff_pos = feats[mined.anchors] - feats[mined.positives]
    diff_neg = feats[mined.anchors] - feats[mined.negatives]
    d_pos = np.sqrt(np.sum(diff_pos * diff_pos, axis=1) + 1e-12)
    d_neg = np.sqrt(np.sum(diff_neg * diff_neg, axis=1) + 1e-12)
    triplet = np.exp(-np.logaddexp(0.0, d_pos - d_neg))
    return TeacherSignal(index=index, probs=probs, triplet_prob=triplet)


def _teacher_weight(teacher: TeacherSignal, cfg: LossConfig) -> float:
    if not cfg.use_authority or cfg.weights is None:
        return 1.0
    if teacher.index >= len(cfg.weights):
        raise ConfigError(f"no authority weight for expert {teacher.index}")
    return float(cfg.weights[teacher.index])


def brainstorm_loss(
        features: Tensor,
        logits: Tensor,
        teachers: Sequence[TeacherSignal],
        mined: MinedBatch,
        pseudo_labels,
        cfg: LossConfig,
) -> tuple[Tensor, LossBreakdown]:
    """Mutual identity + mutual triplet + voting loss of one student expert.

    Mutual terms average over the K - 1 teachers, each scaled by its authority
    weight when ``cfg.use_authority`` is set.
    """
    if len(teachers) < 1:
        raise ConfigError("mutual learning needs at least two experts")
    scale = 1.0 / len(teachers)

    terms: list[Tensor] = []
    breakdown = {"mid": 0.0, "mtri": 0.0}
    if cfg.mutual_identity:
        parts = [mul(mutual_id_loss(logits, t.probs), _teacher_weight(t, cfg)) for t in teachers]
        mid = mul(_sum(parts), scale)
        terms.append(mid)
        breakdown["mid"] = mid.item()
    if cfg.mutual_triplet:
        p_student = triplet_probability(features, mined)
        parts = [mul(mutual_triplet_loss(p_student, t.triplet_prob), _teacher_weight(t, cfg)) for t in teachers]
        mtri = mul(_sum(parts), scale)
        terms.append(mtri)
        breakdown["mtri"] = mtri.item()

    l_id, l_tri = voting_loss(features, logits, pseudo_labels, mined, cfg.epsilon)
    terms.extend([l_id, l_tri])
    total = _sum(terms)
    return total, LossBreakdown(id=l_id.item(), tri=l_tri.item(), total=total.item(), **breakdown)


def _sum(terms: Sequence[Tensor]) -> Tensor:
    total = terms[0]
    for term in terms[1:]:
        total = total + term
    return total

from meb.losses.mining import MinedBatch, mine_hard
from meb.losses.objectives import (
    PROB_CLAMP,
    TeacherSignal,
    brainstorm_loss,
    id_loss,
    mutual_id_loss,
    mutual_triplet_loss,
    softmax_triplet_loss,
    source_loss,
    teacher_signal,
    triplet_probability,
    voting_loss,
)

__all__ = [
    "MinedBatch",
    "PROB_CLAMP",
    "TeacherSignal",
    "brainstorm_loss",
    "id_loss",
    "mine_hard",
    "mutual_id_loss",
    "mutual_triplet_loss",
    "softmax_triplet_loss",
    "source_loss",
    "teacher_signal",
    "triplet_probability",
    "voting_loss",
]

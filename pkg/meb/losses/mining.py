from dataclasses import dataclass

import numpy as np

from meb.core.errors import DimensionError, MiningError
from meb.numcore import Tensor


@dataclass(frozen=True)
class MinedBatch:
    anchors: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray

    def __len__(self) -> int:
        return self.anchors.size


def _distances(features: np.ndarray) -> np.ndarray:
    diff = features[:, None, :] - features[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def mine_hard(features: Tensor | np.ndarray, labels) -> MinedBatch:
    """Batch-hard triplets: farthest same-label and nearest other-label record per anchor.

    Mining reads detached feature values; ties go to the lowest index. An anchor
    without another same-label record uses itself as positive.
    """
    values = features.data if isinstance(features, Tensor) else np.asarray(features)
    values = values.astype(np.float64)
    labels = np.asarray(labels)
    if values.ndim != 2 or labels.shape != (values.shape[0],):
        raise DimensionError(f"mine_hard: features {values.shape} and labels {labels.shape} do not match")
    if np.unique(labels).size < 2:
        raise MiningError("batch holds a single label; hard negatives need at least two (use PK sampling)")

    dist = _distances(values)
    same = labels[:, None] == labels[None, :]
    B = labels.size
    anchors = np.arange(B)
    positives = np.argmax(np.where(same, dist, -np.inf), axis=1)
    negatives = np.argmin(np.where(same, np.inf, dist), axis=1)
    return MinedBatch(anchors=anchors, positives=positives, negatives=negatives)

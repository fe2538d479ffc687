from dataclasses import dataclass

import numpy as np

from meb.core.errors import SamplingError


@dataclass(frozen=True)
class PKBatch:
    indices: np.ndarray
    labels: np.ndarray


class PKSampler:
    """P labels x K records per batch; labels with fewer than K records are drawn with replacement."""

    def __init__(self, labels: np.ndarray):
        self.labels = np.asarray(labels, dtype=np.int64)
        self.classes = np.unique(self.labels)
        self.members = {int(c): np.flatnonzero(self.labels == c) for c in self.classes}

    def sample(self, P: int, K: int, rng: np.random.Generator) -> PKBatch:
        if self.classes.size < P:
            raise SamplingError(f"PK sampling needs {P} distinct labels, only {self.classes.size} present")
        chosen = rng.choice(self.classes, size=P, replace=False)
        picks = []
        for label in chosen:
            members = self.members[int(label)]
            picks.append(rng.choice(members, size=K, replace=members.size < K))
        indices = np.concatenate(picks)[rng.permutation(P * K)]
        return PKBatch(indices=indices, labels=self.labels[indices])


def pk_sample(labels: np.ndarray, P: int, K: int, rng: np.random.Generator) -> PKBatch:
    return PKSampler(labels).sample(P, K, rng)

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from meb.core.errors import DimensionError
from meb.schemas.enums import Domain


@dataclass(frozen=True, eq=False)
class SampleRecord:
    features: np.ndarray
    identity: int
    camera: int
    domain: Domain

    def __post_init__(self):
        if self.identity < 0 or self.camera < 0:
            raise ValueError(f"identity and camera must be non-negative, got {self.identity}, {self.camera}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, SampleRecord):
            return NotImplemented
        return (
            self.identity == other.identity
            and self.camera == other.camera
            and self.domain == other.domain
            and np.array_equal(self.features, other.features)
        )


@dataclass(eq=False)
class SampleSet:
    """Column-wise storage of records from one split."""

    features: np.ndarray
    identities: np.ndarray
    cameras: np.ndarray
    domain: Domain

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float32)
        self.identities = np.asarray(self.identities, dtype=np.int64)
        self.cameras = np.asarray(self.cameras, dtype=np.int64)
        if self.features.ndim != 2:
            raise DimensionError(f"features must be [N, D], got {self.features.shape}")
        n = self.features.shape[0]
        if self.identities.shape != (n,) or self.cameras.shape != (n,):
            raise DimensionError("identities and cameras must have one entry per feature row")
        if n and (self.identities.min() < 0 or self.cameras.min() < 0):
            raise ValueError("identity and camera ids must be non-negative")

    def __len__(self) -> int:
        return self.features.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, SampleSet):
            return NotImplemented
        return (
            self.domain == other.domain
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.identities, other.identities)
            and np.array_equal(self.cameras, other.cameras)
        )

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    @property
    def records(self) -> list[SampleRecord]:
        return [
            SampleRecord(self.features[i], int(self.identities[i]), int(self.cameras[i]), self.domain)
            for i in range(len(self))
        ]

    def subset(self, index) -> "SampleSet":
        index = np.asarray(index, dtype=np.int64)
        return SampleSet(self.features[index], self.identities[index], self.cameras[index], self.domain)

    @classmethod
    def from_records(cls, records: Sequence[SampleRecord], domain: Domain, input_dim: int) -> "SampleSet":
        if not records:
            return cls(np.zeros((0, input_dim), dtype=np.float32), np.zeros(0), np.zeros(0), domain)
        return cls(
            np.stack([r.features for r in records]),
            np.array([r.identity for r in records]),
            np.array([r.camera for r in records]),
            domain,
        )


@dataclass(eq=False)
class SplitDataset:
    domain: Domain
    train: SampleSet
    query: SampleSet
    gallery: SampleSet
    num_identities: int = field(init=False)

    def __post_init__(self):
        dims = {s.input_dim for s in (self.train, self.query, self.gallery)}
        if len(dims) != 1:
            raise DimensionError(f"splits disagree on feature dimension: {sorted(dims)}")
        missing = set(self.query.identities.tolist()) - set(self.gallery.identities.tolist())
        if missing:
            raise ValueError(f"query identities missing from gallery: {sorted(missing)[:5]}")
        self.num_identities = int(np.unique(self.train.identities).size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SplitDataset):
            return NotImplemented
        return (
            self.domain == other.domain
            and self.train == other.train
            and self.query == other.query
            and self.gallery == other.gallery
        )

    @property
    def input_dim(self) -> int:
        return self.train.input_dim

    def identity_set(self) -> set[int]:
        return set(np.concatenate([self.train.identities, self.query.identities, self.gallery.identities]).tolist())


def label_index(identities: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map raw identities to contiguous class indices 0..M-1; returns (labels, classes)."""
    classes, labels = np.unique(np.asarray(identities), return_inverse=True)
    return labels.astype(np.int64), classes

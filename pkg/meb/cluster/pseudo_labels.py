import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from meb.cluster.kmeans import ClusterAssignment
from meb.core.errors import DimensionError
from meb.core.utils import l2_normalize
from meb.data.records import SampleSet
from meb.experts.model import ExpertModel, forward
from meb.numcore import Tensor
from meb.schemas.enums import ParamSet


@dataclass(frozen=True)
class PseudoLabelledSet:
    """Target training records labelled by cluster id; true identities are not carried."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __len__(self) -> int:
        return self.labels.size


def expert_features(expert: ExpertModel, x: np.ndarray, which: ParamSet = ParamSet.THETA_AVG) -> np.ndarray:
    """L2-normalised features of one expert, detached."""
    out = forward(expert, which, Tensor(x))
    return l2_normalize(out.features.data)


def ensemble_features(
        experts: Sequence[ExpertModel],
        x: np.ndarray,
        which: ParamSet = ParamSet.THETA_AVG,
) -> np.ndarray:
    """Per-expert normalised features, averaged over experts and normalised again."""
    if not experts:
        raise DimensionError("ensemble_features needs at least one expert")
    total = np.zeros((x.shape[0], experts[0].feature_dim))
    for expert in experts:
        total += expert_features(expert, x, which)
    return l2_normalize(total / len(experts))


def assign_pseudo_labels(assignment: ClusterAssignment, samples: SampleSet) -> PseudoLabelledSet:
    if assignment.labels.size != len(samples):
        raise DimensionError(f"assignment covers {assignment.labels.size} records, the split has {len(samples)}")
    return PseudoLabelledSet(features=samples.features, labels=assignment.labels.copy(),
                             num_classes=assignment.num_clusters)


def cluster_centroids(
        features: np.ndarray,
        labels: np.ndarray,
        num_classes: int,
        fallback: np.ndarray | None = None,
) -> np.ndarray:
    """Mean feature row of every pseudo-label.

    Labels without members take their row from ``fallback`` and are zero otherwise.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or labels.shape != (features.shape[0],):
        raise DimensionError(f"features {features.shape} and labels {labels.shape} do not align")
    sums = np.zeros((num_classes, features.shape[1]))
    np.add.at(sums, labels, features)
    counts = np.bincount(labels, minlength=num_classes)[:, None]
    centroids = sums / np.maximum(counts, 1)
    if fallback is not None:
        empty = counts[:, 0] == 0
        centroids[empty] = np.asarray(fallback, dtype=np.float64)[empty]
    return centroids


def pseudo_label_purity(labels, identities) -> float:
    """Share of records whose cluster maps to their identity under the best one-to-one matching."""
    labels = np.asarray(labels)
    identities = np.asarray(identities)
    if labels.shape != identities.shape:
        raise DimensionError("labels and identities must align")
    if labels.size == 0:
        return 0.0
    clusters, cluster_idx = np.unique(labels, return_inverse=True)
    ids, id_idx = np.unique(identities, return_inverse=True)
    contingency = np.zeros((clusters.size, ids.size), dtype=np.int64)
    np.add.at(contingency, (cluster_idx, id_idx), 1)
    rows, cols = linear_sum_assignment(contingency, maximize=True)
    return float(contingency[rows, cols].sum() / labels.size)


def dump_assignment(path: Path | str, assignment: ClusterAssignment) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "pseudo_label"])
        for i, label in enumerate(assignment.labels):
            writer.writerow([i, int(label)])
    return path

"""Mini-batch k-means with k-means++ seeding.

Centres start from a k-means++ pass over a random subsample. Each step assigns
a random mini-batch and moves every touched centre toward the batch mean of
its members with rate ``n_c / count_c`` (``count_c`` counts all records the
centre has absorbed, starting at 1). A batch that covers the whole data set is
a Lloyd step. A final full pass assigns every record; clusters left empty are
re-seeded with the record farthest from its centre.
"""
from dataclasses import dataclass, field

import numpy as np

from meb.core.errors import ConfigError, DegenerateClusterError, DimensionError
from meb.core.logger import logger
from meb.core.utils import make_rng

DEFAULT_BATCH_SIZE = 256


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    centroids: np.ndarray
    sizes: np.ndarray
    objective: float
    seeding_objective: float
    history: list[float] = field(default_factory=list)

    @property
    def num_clusters(self) -> int:
        return self.centroids.shape[0]


def squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.sum(diff * diff, axis=2)


def _assign(points: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    dist = squared_distances(points, centers)
    labels = np.argmin(dist, axis=1)
    return labels, dist[np.arange(points.shape[0]), labels]


def kmeans_plus_plus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    closest = squared_distances(points, points[chosen]).min(axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            pick = int(rng.choice(n, p=closest / total))
        else:
            remaining = np.setdiff1d(np.arange(n), chosen)
            pick = int(rng.choice(remaining))
        chosen.append(pick)
        closest = np.minimum(closest, squared_distances(points, points[[pick]])[:, 0])
    return points[chosen].copy()


def _fill_empty(points: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    k = centers.shape[0]
    for _ in range(k + 1):
        labels, dist = _assign(points, centers)
        sizes = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(sizes == 0)
        if empty.size == 0:
            return labels, dist, sizes
        movable = sizes[labels] > 1
        if not np.any(movable & (dist > 0)):
            raise DegenerateClusterError(f"cannot fill {empty.size} empty clusters: too few distinct points")
        farthest = int(np.argmax(np.where(movable, dist, -1.0)))
        centers[empty[0]] = points[farthest]
    raise DegenerateClusterError("empty clusters persist after re-seeding")


def minibatch_kmeans(
        points: np.ndarray,
        num_clusters: int,
        batch_size: int | None = None,
        iters: int = 50,
        seed: int = 0,
        seeding_sample: int | None = None,
) -> ClusterAssignment:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise DimensionError(f"points must be [N, F], got {points.shape}")
    n = points.shape[0]
    if num_clusters < 1 or n < num_clusters:
        raise ConfigError(f"cannot form {num_clusters} clusters from {n} points")

    rng = make_rng(seed, "kmeans")
    batch = min(batch_size or DEFAULT_BATCH_SIZE, n)
    sample_size = min(n, max(seeding_sample or 10 * num_clusters, num_clusters))
    sample = np.sort(rng.choice(n, size=sample_size, replace=False))
    centers = kmeans_plus_plus(points[sample], num_clusters, rng)
    seeding_objective = float(_assign(points, centers)[1].sum())
    seeded = centers.copy()

    counts = np.ones(num_clusters)
    history = []
    for _ in range(iters):
        if batch >= n:
            labels, _ = _assign(points, centers)
            for c in np.unique(labels):
                centers[c] = points[labels == c].mean(axis=0)
        else:
            index = np.sort(rng.choice(n, size=batch, replace=False))
            members = points[index]
            labels, _ = _assign(members, centers)
            for c in np.unique(labels):
                mine = members[labels == c]
                counts[c] += mine.shape[0]
                eta = mine.shape[0] / counts[c]
                centers[c] = (1.0 - eta) * centers[c] + eta * mine.mean(axis=0)
        history.append(float(_assign(points, centers)[1].sum()))

    if history and history[-1] > seeding_objective:
        logger.debug("Mini-batch updates did not improve on the seeding; keeping seeded centres",
                     seeding=seeding_objective, final=history[-1])
        centers = seeded

    labels, dist, sizes = _fill_empty(points, centers)
    return ClusterAssignment(
        labels=labels.astype(np.int64),
        centroids=centers,
        sizes=sizes.astype(np.int64),
        objective=float(dist.sum()),
        seeding_objective=seeding_objective,
        history=history,
    )

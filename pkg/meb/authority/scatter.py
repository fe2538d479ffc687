"""Expert authority from cluster scatter.

For each expert the target training records are clustered in that expert's own
(normalised, temporally averaged) feature space; its discrimination score is
J = S_inter / sum_i S_intra_i and the authority weights are J scaled to mean 1.
"""
from typing import NamedTuple, Sequence

import numpy as np

from meb.cluster.kmeans import minibatch_kmeans
from meb.cluster.pseudo_labels import expert_features
from meb.core.errors import DegenerateClusterError, DimensionError
from meb.core.logger import logger, timer
from meb.core.utils import l2_normalize
from meb.experts.model import ExpertModel
from meb.schemas.enums import ParamSet
from meb.schemas.reports import AuthorityReport, ExpertAuthority
from meb.schemas.training import ClusterConfig

INTRA_FLOOR = 1e-9


class ScatterRatio(NamedTuple):
    j: float
    s_intra: float
    s_inter: float
    floored: bool


def intra_scatter(features: np.ndarray, labels, num_clusters: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-cluster sum of squared distances to the cluster mean, and the means."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (features.shape[0],):
        raise DimensionError(f"{labels.shape} labels for {features.shape[0]} feature rows")
    sizes = np.bincount(labels, minlength=num_clusters)
    if sizes.size > num_clusters:
        raise DimensionError(f"labels exceed the {num_clusters} declared clusters")
    if np.any(sizes == 0):
        raise DegenerateClusterError(f"clusters {np.flatnonzero(sizes == 0).tolist()} are empty")
    means = np.zeros((num_clusters, features.shape[1]))
    np.add.at(means, labels, features)
    means /= sizes[:, None]
    centred = features - means[labels]
    per_point = np.sum(centred * centred, axis=1)
    return np.bincount(labels, weights=per_point, minlength=num_clusters), means


def inter_scatter(means: np.ndarray, sizes, global_mean: np.ndarray) -> float:
    """sum_i n_i ||mu_i - mu||^2 with mu the mean over all records."""
    sizes = np.asarray(sizes, dtype=np.float64)
    diff = np.asarray(means, dtype=np.float64) - np.asarray(global_mean, dtype=np.float64)
    return float(np.sum(sizes * np.sum(diff * diff, axis=1)))


def scatter_ratio(features: np.ndarray, labels, num_clusters: int) -> ScatterRatio:
    features = np.asarray(features, dtype=np.float64)
    s_intra, means = intra_scatter(features, labels, num_clusters)
    sizes = np.bincount(np.asarray(labels), minlength=num_clusters)
    s_inter = inter_scatter(means, sizes, features.mean(axis=0))
    total_intra = float(s_intra.sum())
    floored = total_intra < INTRA_FLOOR
    return ScatterRatio(j=s_inter / max(total_intra, INTRA_FLOOR), s_intra=total_intra, s_inter=s_inter,
                        floored=floored)


def authority_weights(j) -> np.ndarray:
    """w^e = K J^e / sum_k J^k."""
    j = np.asarray(j, dtype=np.float64)
    if j.ndim != 1 or j.size == 0:
        raise DimensionError("authority_weights expects a non-empty vector of scores")
    if not np.all(np.isfinite(j)) or np.any(j <= 0):
        raise DegenerateClusterError(f"authority scores must be positive and finite, got {j.tolist()}")
    return j.size * j / j.sum()


def _cap_floored(ratios: list[ScatterRatio]) -> list[float]:
    regular = [r.j for r in ratios if not r.floored]
    if not regular:
        return [1.0] * len(ratios)
    cap = max(regular)
    return [cap if r.floored else r.j for r in ratios]


def authority_from_features(
        features: Sequence[np.ndarray],
        names: Sequence[str],
        num_clusters: int,
        seed: int,
        epoch: int = 0,
        cluster: ClusterConfig | None = None,
) -> AuthorityReport:
    """Authority of experts given their feature matrices; each is normalised and clustered on its own."""
    cluster = cluster or ClusterConfig()
    ratios = []
    for feats in features:
        normed = l2_normalize(feats)
        assignment = minibatch_kmeans(
            normed,
            num_clusters,
            batch_size=cluster.resolved_batch_size(normed.shape[0]),
            iters=cluster.iters,
            seed=seed,
            seeding_sample=cluster.seeding_sample,
        )
        ratios.append(scatter_ratio(normed, assignment.labels, num_clusters))

    weights = authority_weights(_cap_floored(ratios))
    return AuthorityReport(
        epoch=epoch,
        experts=[
            ExpertAuthority(expert=name, s_intra=r.s_intra, s_inter=r.s_inter, j=j, w=float(w), floored=r.floored)
            for name, r, j, w in zip(names, ratios, _cap_floored(ratios), weights)
        ],
    )


def epoch_authority(
        experts: Sequence[ExpertModel],
        x: np.ndarray,
        num_clusters: int,
        seed: int,
        epoch: int = 0,
        cluster: ClusterConfig | None = None,
        which: ParamSet = ParamSet.THETA_AVG,
) -> AuthorityReport:
    with timer("authority", extra_data={"epoch": epoch}):
        report = authority_from_features(
            [expert_features(m, x, which) for m in experts],
            [m.name for m in experts],
            num_clusters,
            seed,
            epoch,
            cluster,
        )
    logger.info("Expert authority", epoch=epoch, weights={e.expert: round(e.w, 6) for e in report.experts})
    return report

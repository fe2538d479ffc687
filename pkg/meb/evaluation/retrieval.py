"""Cross-camera retrieval metrics (CMC and mAP).

For each query the gallery is ranked by ascending L2 distance, ties broken by
gallery index. Gallery records sharing both identity and camera with the query
are removed before ranking. Queries left without any true match are skipped
and counted.
"""
import csv
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from meb.cluster.pseudo_labels import ensemble_features, expert_features
from meb.core.errors import DimensionError, EvaluationError
from meb.data.records import SampleSet, SplitDataset
from meb.experts.model import ExpertModel
from meb.schemas.enums import ParamSet
from meb.schemas.reports import MetricsReport

DEFAULT_MAX_RANK = 20


class RetrievalMeta(NamedTuple):
    identities: np.ndarray
    cameras: np.ndarray

    @classmethod
    def of(cls, samples: SampleSet) -> "RetrievalMeta":
        return cls(samples.identities, samples.cameras)


def average_precision(matches: np.ndarray) -> float:
    """Mean of precision at each hit of a ranked 0/1 match vector."""
    hits = np.flatnonzero(matches)
    if hits.size == 0:
        return 0.0
    return float(np.mean(np.arange(1, hits.size + 1) / (hits + 1)))


def evaluate(
        features_query: np.ndarray,
        meta_query: RetrievalMeta,
        features_gallery: np.ndarray,
        meta_gallery: RetrievalMeta,
        max_rank: int = DEFAULT_MAX_RANK,
        expert: str | None = None,
        epoch: int | None = None,
) -> MetricsReport:
    q = np.asarray(features_query, dtype=np.float64)
    g = np.asarray(features_gallery, dtype=np.float64)
    if g.shape[0] == 0:
        raise EvaluationError("gallery is empty")
    if q.ndim != 2 or g.ndim != 2 or q.shape[1] != g.shape[1]:
        raise DimensionError(f"query {q.shape} and gallery {g.shape} features do not share a dimension")

    q_ids, q_cams = (np.asarray(a) for a in meta_query)
    g_ids, g_cams = (np.asarray(a) for a in meta_gallery)
    ranks = min(max_rank, g.shape[0])
    cmc = np.zeros(ranks)
    aps = []
    evaluated = []
    skipped = 0
    gallery_index = np.arange(g.shape[0])
    for i in range(q.shape[0]):
        diff = g - q[i]
        dist = np.sum(diff * diff, axis=1)
        keep = ~((g_ids == q_ids[i]) & (g_cams == q_cams[i]))
        order = np.lexsort((gallery_index[keep], dist[keep]))
        matches = g_ids[keep][order] == q_ids[i]
        if not matches.any():
            skipped += 1
            continue
        aps.append(average_precision(matches))
        evaluated.append(i)
        first = int(np.argmax(matches))
        if first < ranks:
            cmc[first:] += 1

    if not aps:
        raise EvaluationError(f"none of the {q.shape[0]} queries has a valid gallery match")
    return MetricsReport(
        mean_ap=float(np.mean(aps)),
        cmc=(cmc / len(aps)).tolist(),
        per_query_ap=aps,
        query_index=evaluated,
        skipped_queries=skipped,
        expert=expert,
        epoch=epoch,
    )


def extract_features(expert: ExpertModel, x: np.ndarray, which: ParamSet = ParamSet.THETA) -> np.ndarray:
    return expert_features(expert, x, which)


def evaluate_expert(
        expert: ExpertModel,
        dataset: SplitDataset,
        which: ParamSet = ParamSet.THETA,
        max_rank: int = DEFAULT_MAX_RANK,
        epoch: int | None = None,
) -> MetricsReport:
    return evaluate(
        extract_features(expert, dataset.query.features, which),
        RetrievalMeta.of(dataset.query),
        extract_features(expert, dataset.gallery.features, which),
        RetrievalMeta.of(dataset.gallery),
        max_rank=max_rank,
        expert=expert.name,
        epoch=epoch,
    )


def evaluate_ensemble(
        experts: Sequence[ExpertModel],
        dataset: SplitDataset,
        which: ParamSet = ParamSet.THETA,
        max_rank: int = DEFAULT_MAX_RANK,
        epoch: int | None = None,
) -> MetricsReport:
    return evaluate(
        ensemble_features(experts, dataset.query.features, which),
        RetrievalMeta.of(dataset.query),
        ensemble_features(experts, dataset.gallery.features, which),
        RetrievalMeta.of(dataset.gallery),
        max_rank=max_rank,
        expert="ensemble",
        epoch=epoch,
    )


def write_per_query_ap(path: Path | str, report: MetricsReport, query: SampleSet) -> Path:
    """CSV of the AP of every evaluated query; skipped queries are listed with an empty AP."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["query", "identity", "camera", "ap"])
        ap_of = dict(zip(report.query_index, report.per_query_ap))
        for i in range(len(query)):
            ap = f"{ap_of[i]:.6f}" if i in ap_of else ""
            writer.writerow([i, int(query.identities[i]), int(query.cameras[i]), ap])
    return path

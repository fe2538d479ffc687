from meb.cluster.kmeans import ClusterAssignment, kmeans_plus_plus, minibatch_kmeans, squared_distances
from meb.cluster.pseudo_labels import (
    PseudoLabelledSet,
    assign_pseudo_labels,
    cluster_centroids,
    dump_assignment,
    ensemble_features,
    expert_features,
    pseudo_label_purity,
)

__all__ = [
    "ClusterAssignment",
    "PseudoLabelledSet",
    "assign_pseudo_labels",
    "cluster_centroids",
    "dump_assignment",
    "ensemble_features",
    "expert_features",
    "kmeans_plus_plus",
    "minibatch_kmeans",
    "pseudo_label_purity",
    "squared_distances",
]

import numpy as np
import pytest

from meb.cluster import pseudo_labels
from meb.cluster.kmeans import ClusterAssignment
from meb.cluster.pseudo_labels import (
    assign_pseudo_labels,
    cluster_centroids,
    dump_assignment,
    ensemble_features,
    expert_features,
    pseudo_label_purity,
)
from meb.core.errors import DimensionError
from meb.schemas.enums import ParamSet
from tests.stubs import FeatureExpertStub, override_expert_features


def test_ensemble_averages_then_renormalises(monkeypatch):
    override_expert_features(monkeypatch, pseudo_labels)
    experts = [FeatureExpertStub("a", [[1.0, 0.0]]), FeatureExpertStub("b", [[0.0, 1.0]])]
    np.testing.assert_allclose(ensemble_features(experts, np.zeros((1, 3))), [[0.7071068, 0.7071068]], rtol=1e-6)


def test_single_expert_ensemble_is_its_normalised_features(monkeypatch):
    override_expert_features(monkeypatch, pseudo_labels)
    expert = FeatureExpertStub("a", [[3.0, 4.0], [0.0, 2.0]])
    np.testing.assert_allclose(ensemble_features([expert], np.zeros((2, 3))), [[0.6, 0.8], [0.0, 1.0]])


def test_ensemble_does_not_depend_on_expert_order(tiny_experts, tiny_domains):
    _, target = tiny_domains
    x = target.train.features
    forward_order = ensemble_features(tiny_experts, x)
    reverse_order = ensemble_features(tiny_experts[::-1], x)
    np.testing.assert_allclose(forward_order, reverse_order, rtol=1e-6, atol=1e-7)
    np.testing.assert_allclose(np.linalg.norm(forward_order, axis=1), 1.0, rtol=1e-6)


def test_expert_features_are_unit_length(tiny_experts, tiny_domains):
    _, target = tiny_domains
    feats = expert_features(tiny_experts[0], target.train.features, ParamSet.THETA)
    assert feats.shape == (len(target.train), 8)
    np.testing.assert_allclose(np.linalg.norm(feats, axis=1), 1.0, rtol=1e-6)


def _assignment(labels):
    labels = np.asarray(labels)
    k = int(labels.max()) + 1
    return ClusterAssignment(labels=labels, centroids=np.eye(k), sizes=np.bincount(labels), objective=0.0,
                             seeding_objective=0.0)


def test_assignment_must_cover_the_split(tiny_domains):
    _, target = tiny_domains
    with pytest.raises(DimensionError):
        assign_pseudo_labels(_assignment([0, 1, 1]), target.train)


def test_pseudo_labels_carry_cluster_ids_not_identities(tiny_domains):
    _, target = tiny_domains
    n = len(target.train)
    labelled = assign_pseudo_labels(_assignment(np.arange(n) % 3), target.train)
    assert labelled.num_classes == 3
    assert len(labelled) == n
    np.testing.assert_array_equal(labelled.labels, np.arange(n) % 3)


def test_purity_ignores_label_names():
    identities = np.array([7, 7, 9, 9, 9, 4])
    assert pseudo_label_purity([2, 2, 0, 0, 0, 1], identities) == 1.0
    assert pseudo_label_purity([0, 0, 1, 1, 1, 1], identities) == pytest.approx(5 / 6)


def test_dump_writes_one_row_per_record(tmp_path):
    path = dump_assignment(tmp_path / "clusters" / "epoch_1.csv", _assignment([1, 0, 1]))
    assert path.read_text(encoding="utf-8").splitlines() == ["index,pseudo_label", "0,1", "1,0", "2,1"]


def test_cluster_centroids_average_each_label():
    features = np.array([[1.0, 0.0], [3.0, 0.0], [0.0, 2.0]])
    centroids = cluster_centroids(features, [0, 0, 1], 2)
    np.testing.assert_allclose(centroids, [[2.0, 0.0], [0.0, 2.0]])


def test_empty_labels_take_the_fallback_row():
    fallback = np.array([[9.0, 9.0], [0.0, 1.0], [1.0, 0.0]])
    centroids = cluster_centroids(np.array([[1.0, 1.0]]), [0], 3, fallback=fallback)
    np.testing.assert_allclose(centroids, [[1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    assert not cluster_centroids(np.array([[1.0, 1.0]]), [0], 2)[1].any()


def test_cluster_centroids_reject_misaligned_labels():
    with pytest.raises(DimensionError):
        cluster_centroids(np.zeros((3, 2)), [0, 1], 2)

import numpy as np
import pytest

from meb.authority import authority_from_features, authority_weights, epoch_authority, inter_scatter, intra_scatter
from meb.authority.scatter import scatter_ratio
from meb.core.errors import DegenerateClusterError
from meb.schemas.training import ClusterConfig


def _blobs(rng, num_blobs=5, per_blob=12, dim=8, spread=0.05):
    centres = rng.normal(size=(num_blobs, dim)) * 3.0
    return np.concatenate([c + rng.normal(0.0, spread, size=(per_blob, dim)) for c in centres])


def test_intra_scatter_of_a_pair():
    s_intra, means = intra_scatter(np.array([[0.0, 0.0], [2.0, 0.0]]), [0, 0], 1)
    np.testing.assert_allclose(means, [[1.0, 0.0]])
    np.testing.assert_allclose(s_intra, [2.0])


def test_intra_scatter_of_identical_points_is_zero():
    s_intra, _ = intra_scatter(np.ones((4, 3)), [0, 0, 0, 0], 1)
    assert s_intra[0] == 0.0


def test_inter_scatter_of_two_pairs():
    features = np.array([[0.0, 0.0], [2.0, 0.0], [10.0, 0.0], [12.0, 0.0]])
    _, means = intra_scatter(features, [0, 0, 1, 1], 2)
    assert inter_scatter(means, [2, 2], features.mean(axis=0)) == pytest.approx(100.0)
    assert inter_scatter(means[:1], [4], means[0]) == 0.0


def test_empty_cluster_is_degenerate():
    with pytest.raises(DegenerateClusterError):
        intra_scatter(np.zeros((3, 2)), [0, 0, 2], 3)


@pytest.mark.parametrize("seed", range(20))
def test_total_scatter_splits_into_intra_and_inter(seed):
    rng = np.random.default_rng(seed)
    features = rng.normal(size=(30, 4)) * rng.uniform(0.5, 3.0)
    num_clusters = int(rng.integers(2, 6))
    labels = rng.permutation(np.arange(30) % num_clusters)
    ratio = scatter_ratio(features, labels, num_clusters)
    total = np.sum((features - features.mean(axis=0)) ** 2)
    assert ratio.s_intra + ratio.s_inter == pytest.approx(total, rel=1e-6)


def test_ratio_is_invariant_to_scale_and_translation():
    rng = np.random.default_rng(1)
    features = rng.normal(size=(20, 3))
    labels = np.arange(20) % 4
    base = scatter_ratio(features, labels, 4).j
    for c in (0.1, 3.5, 10.0):
        assert scatter_ratio(features * c, labels, 4).j == pytest.approx(base, rel=1e-10)
    assert scatter_ratio(features + 100.0, labels, 4).j == pytest.approx(base, rel=1e-8)


def test_weights_are_scores_scaled_to_mean_one():
    np.testing.assert_allclose(authority_weights([2.0, 1.0, 1.0]), [1.5, 0.75, 0.75])
    np.testing.assert_allclose(authority_weights([4.0, 4.0]), [1.0, 1.0])


def test_non_positive_scores_are_rejected():
    with pytest.raises(DegenerateClusterError):
        authority_weights([1.0, 0.0])


def test_noise_expert_gets_the_least_authority():
    rng = np.random.default_rng(2)
    structured = _blobs(rng)
    noise = rng.normal(size=structured.shape)
    report = authority_from_features([structured, noise, structured + rng.normal(0, 0.3, structured.shape)],
                                     ["clean", "noise", "blurred"], num_clusters=5, seed=0)
    weights = {e.expert: e.w for e in report.experts}
    assert min(weights, key=weights.get) == "noise"
    assert sum(weights.values()) == pytest.approx(3.0)


def test_identical_experts_share_authority_equally():
    features = _blobs(np.random.default_rng(3))
    report = authority_from_features([features, features.copy(), features.copy()], ["a", "b", "c"],
                                     num_clusters=5, seed=4)
    for entry in report.experts:
        assert entry.w == pytest.approx(1.0, abs=1e-6)


def test_zero_intra_scatter_is_floored_and_capped():
    collapsed = np.repeat(np.eye(4), 5, axis=0)
    spread = np.random.default_rng(5).normal(size=(20, 4))
    report = authority_from_features([collapsed, spread], ["collapsed", "spread"], num_clusters=4, seed=0)
    collapsed_entry, spread_entry = report.experts
    assert collapsed_entry.floored
    assert not spread_entry.floored
    assert collapsed_entry.j == spread_entry.j
    assert collapsed_entry.w == pytest.approx(1.0)


def test_all_floored_experts_get_unit_weight():
    collapsed = np.repeat(np.eye(3), 4, axis=0)
    report = authority_from_features([collapsed, collapsed], ["a", "b"], num_clusters=3, seed=0)
    assert [e.w for e in report.experts] == [1.0, 1.0]


def test_epoch_authority_reads_each_experts_features(tiny_experts, tiny_domains):
    _, target = tiny_domains
    report = epoch_authority(tiny_experts, target.train.features, num_clusters=4, seed=0, epoch=2,
                             cluster=ClusterConfig(iters=5))
    assert report.epoch == 2
    assert [e.expert for e in report.experts] == ["tiny-mlp", "tiny-res"]
    assert sum(e.w for e in report.experts) == pytest.approx(2.0)

import numpy as np
import pytest

from meb.core.errors import DimensionError, EvaluationError
from meb.evaluation import evaluate, evaluate_ensemble, evaluate_expert, write_per_query_ap
from meb.evaluation.retrieval import RetrievalMeta, average_precision


def _meta(ids, cams):
    return RetrievalMeta(np.asarray(ids), np.asarray(cams))


def _oracle(q, q_ids, q_cams, g, g_ids, g_cams, max_rank):
    """Straightforward per-query ranking with stable sorting."""
    aps, first_hits = [], []
    for i in range(len(q)):
        candidates = [j for j in range(len(g)) if not (g_ids[j] == q_ids[i] and g_cams[j] == q_cams[i])]
        candidates.sort(key=lambda j: (float(np.sum((g[j] - q[i]) ** 2)), j))
        hits = [r for r, j in enumerate(candidates) if g_ids[j] == q_ids[i]]
        if not hits:
            continue
        aps.append(np.mean([(n + 1) / (r + 1) for n, r in enumerate(hits)]))
        first_hits.append(hits[0])
    ranks = min(max_rank, len(g))
    cmc = [np.mean([h <= r for h in first_hits]) for r in range(ranks)]
    return float(np.mean(aps)), cmc


def test_perfect_single_query():
    report = evaluate(np.array([[0.0, 0.0]]), _meta([1], [0]),
                      np.array([[0.1, 0.0], [5.0, 5.0]]), _meta([1, 2], [1, 1]))
    assert report.mean_ap == 1.0
    assert report.rank(1) == 1.0


def test_average_precision_of_hits_at_one_and_three():
    assert average_precision(np.array([True, False, True, False])) == pytest.approx((1 + 2 / 3) / 2)


def test_same_camera_duplicate_is_excluded():
    report = evaluate(np.array([[0.0]]), _meta([1], [0]),
                      np.array([[0.0], [1.0], [2.0]]), _meta([1, 2, 1], [0, 1, 1]))
    assert report.rank(1) == 0.0
    assert report.mean_ap == pytest.approx(0.5)


@pytest.mark.parametrize("seed", range(50))
def test_matches_brute_force_oracle(seed):
    rng = np.random.default_rng(seed)
    q = rng.normal(size=(4, 3))
    g = rng.normal(size=(12, 3))
    q_ids, q_cams = rng.integers(0, 3, 4), rng.integers(0, 2, 4)
    g_ids, g_cams = rng.integers(0, 3, 12), rng.integers(0, 2, 12)
    # every identity in both cameras, so each query keeps a match
    g_ids[:6] = [0, 1, 2, 0, 1, 2]
    g_cams[:6] = [0, 0, 0, 1, 1, 1]
    report = evaluate(q, _meta(q_ids, q_cams), g, _meta(g_ids, g_cams), max_rank=5)
    mean_ap, cmc = _oracle(q, q_ids, q_cams, g, g_ids, g_cams, 5)
    assert report.mean_ap == pytest.approx(mean_ap, abs=1e-9)
    np.testing.assert_allclose(report.cmc, cmc, rtol=0, atol=1e-9)


def test_gallery_order_does_not_matter():
    rng = np.random.default_rng(7)
    q, g = rng.normal(size=(5, 4)), rng.normal(size=(20, 4))
    q_meta = _meta(np.arange(5), np.zeros(5, dtype=int))
    g_ids, g_cams = np.arange(20) % 5, np.ones(20, dtype=int)
    base = evaluate(q, q_meta, g, _meta(g_ids, g_cams))
    perm = rng.permutation(20)
    shuffled = evaluate(q, q_meta, g[perm], _meta(g_ids[perm], g_cams[perm]))
    assert shuffled.mean_ap == pytest.approx(base.mean_ap)
    np.testing.assert_allclose(shuffled.cmc, base.cmc)


def test_far_distractor_changes_nothing():
    rng = np.random.default_rng(8)
    q, g = rng.normal(size=(3, 2)), rng.normal(size=(9, 2))
    q_meta = _meta([0, 1, 2], [0, 0, 0])
    g_ids, g_cams = np.arange(9) % 3, np.ones(9, dtype=int)
    base = evaluate(q, q_meta, g, _meta(g_ids, g_cams))
    padded = evaluate(q, q_meta, np.vstack([g, [[1e3, 1e3]]]), _meta(np.append(g_ids, 99), np.append(g_cams, 1)))
    assert padded.mean_ap == pytest.approx(base.mean_ap)
    # one more gallery record, one more rank
    assert len(padded.cmc) == len(base.cmc) + 1
    np.testing.assert_allclose(padded.cmc[:len(base.cmc)], base.cmc)
    assert padded.cmc[-1] == 1.0


def test_cmc_is_truncated_to_gallery_size():
    rng = np.random.default_rng(9)
    g_ids = np.arange(6) % 3
    report = evaluate(rng.normal(size=(3, 2)), _meta([0, 1, 2], [0, 0, 0]),
                      rng.normal(size=(6, 2)), _meta(g_ids, np.ones(6, dtype=int)), max_rank=20)
    assert len(report.cmc) == 6
    assert report.cmc[-1] == 1.0


def test_queries_without_a_match_are_skipped_and_counted():
    report = evaluate(np.array([[0.0], [1.0]]), _meta([1, 5], [0, 0]),
                      np.array([[0.0], [3.0]]), _meta([1, 2], [1, 1]))
    assert report.skipped_queries == 1
    assert report.query_index == [0]
    assert len(report.cmc) == 2


def test_empty_gallery_and_dimension_mismatch_are_rejected():
    with pytest.raises(EvaluationError):
        evaluate(np.ones((1, 2)), _meta([1], [0]), np.zeros((0, 2)), _meta([], []))
    with pytest.raises(DimensionError):
        evaluate(np.ones((1, 2)), _meta([1], [0]), np.ones((1, 3)), _meta([1], [1]))
    with pytest.raises(EvaluationError, match="valid gallery match"):
        evaluate(np.ones((1, 2)), _meta([1], [0]), np.ones((1, 2)), _meta([2], [1]))


def test_expert_and_ensemble_reports(tiny_experts, tiny_domains, tmp_path):
    _, target = tiny_domains
    single = evaluate_expert(tiny_experts[0], target, epoch=3)
    ensemble = evaluate_ensemble(tiny_experts, target)
    assert single.expert == "tiny-mlp"
    assert single.epoch == 3
    assert ensemble.expert == "ensemble"
    assert 0.0 <= ensemble.mean_ap <= 1.0
    assert set(single.summary()) == {"mAP", "cmc1", "cmc5", "cmc10"}

    path = write_per_query_ap(tmp_path / "ap.csv", single, target.query)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "query,identity,camera,ap"
    assert len(lines) == len(target.query) + 1

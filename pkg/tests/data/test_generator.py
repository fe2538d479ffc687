import numpy as np
import pytest

from meb.core.errors import ConfigError
from meb.data.generator import (
    build_shift,
    generate,
    identities_per_domain,
    identity_subspace,
    nearest_centroid_accuracy,
)
from meb.data.records import label_index
from meb.evaluation.retrieval import RetrievalMeta, evaluate
from meb.schemas.enums import Domain, ShiftKind
from meb.schemas.generator import DomainShiftConfig, GeneratorConfig
from tests.stubs import tiny_generator


def test_same_seed_gives_identical_datasets():
    cfg = tiny_generator()
    first, second = generate(cfg), generate(cfg)
    assert first[0] == second[0]
    assert first[1] == second[1]


def test_different_seed_changes_the_data():
    a, _ = generate(tiny_generator(seed=1))
    b, _ = generate(tiny_generator(seed=2))
    assert a != b


def test_split_sizes_follow_the_config():
    cfg = tiny_generator()
    source, target = generate(cfg)
    for ds in (source, target):
        assert len(ds.train) == cfg.num_identities * cfg.samples_per_identity
        assert len(ds.query) == cfg.num_test_identities * cfg.queries_per_identity
        assert len(ds.gallery) == cfg.num_test_identities * (cfg.test_samples_per_identity - cfg.queries_per_identity)
        assert ds.input_dim == cfg.input_dim
        assert ds.num_identities == cfg.num_identities
    assert source.domain == Domain.SOURCE
    assert target.domain == Domain.TARGET


def test_identity_ranges_are_disjoint_across_domains_and_splits():
    cfg = tiny_generator(distractor_identities=2)
    source, target = generate(cfg)
    assert not source.identity_set() & target.identity_set()
    for ds in (source, target):
        assert not set(ds.train.identities.tolist()) & set(ds.query.identities.tolist())
        assert set(ds.query.identities.tolist()) <= set(ds.gallery.identities.tolist())
    assert min(target.identity_set()) == identities_per_domain(cfg)


def test_distractors_are_single_camera_gallery_identities():
    cfg = tiny_generator(distractor_identities=3)
    _, target = generate(cfg)
    distractors = set(target.gallery.identities.tolist()) - set(target.query.identities.tolist())
    assert len(distractors) == 3
    for identity in distractors:
        assert np.unique(target.gallery.cameras[target.gallery.identities == identity]).size == 1


def test_queries_have_a_cross_camera_match():
    _, target = generate(tiny_generator())
    for identity, camera in zip(target.query.identities, target.query.cameras):
        matches = target.gallery.cameras[target.gallery.identities == identity]
        assert np.any(matches != camera)


def test_random_shift_respects_the_condition_number_bound():
    cfg = GeneratorConfig(input_dim=16, domain_shift=DomainShiftConfig(condition_number=4.0))
    assert build_shift(cfg).condition_number <= 4.0 + 1e-9


def test_identity_shift_keeps_the_target_prototypes_unmoved():
    cfg = tiny_generator(domain_shift=DomainShiftConfig(kind=ShiftKind.IDENTITY))
    shift = build_shift(cfg)
    np.testing.assert_array_equal(shift.matrix, np.eye(cfg.input_dim))
    np.testing.assert_array_equal(shift.offset, np.zeros(cfg.input_dim))


def test_explicit_shift_is_checked_against_the_input_dim():
    cfg = tiny_generator(domain_shift=DomainShiftConfig(kind=ShiftKind.EXPLICIT, matrix=[[1.0]], offset=[0.0]))
    with pytest.raises(ConfigError):
        build_shift(cfg)


def test_one_dimensional_inputs_are_rejected():
    with pytest.raises(ConfigError):
        generate(tiny_generator(input_dim=1))


def test_identities_are_well_separated_within_a_domain():
    source, _ = generate(GeneratorConfig(num_identities=20, seed=5))
    assert nearest_centroid_accuracy(source.train) > 0.9


def test_label_index_is_contiguous():
    labels, classes = label_index(np.array([40, 7, 40, 12]))
    np.testing.assert_array_equal(classes, [7, 12, 40])
    np.testing.assert_array_equal(labels, [2, 0, 2, 1])


def test_degenerate_shift_gives_perfect_nearest_centroid_on_both_domains():
    cfg = tiny_generator(noise_sd=0.0, camera_jitter_sd=0.0, nuisance_sd=0.0,
                         domain_shift=DomainShiftConfig(kind=ShiftKind.IDENTITY))
    source, target = generate(cfg)
    assert nearest_centroid_accuracy(source.train) == 1.0
    assert nearest_centroid_accuracy(target.train) == 1.0


def test_identity_rank_follows_the_fraction():
    assert GeneratorConfig(input_dim=32).identity_rank == 16
    assert GeneratorConfig(input_dim=32, identity_fraction=1.0).identity_rank == 32
    assert GeneratorConfig(input_dim=3, identity_fraction=0.1).identity_rank == 1


def test_identity_subspaces_are_orthonormal_and_differ_across_domains():
    cfg = GeneratorConfig(input_dim=16)
    source_basis = identity_subspace(cfg)
    target_basis = identity_subspace(cfg, build_shift(cfg))
    for basis in (source_basis, target_basis):
        assert basis.shape == (16, 8)
        np.testing.assert_allclose(basis.T @ basis, np.eye(8), atol=1e-9)
    # principal cosines below one: the target identity directions leave the source subspace
    cosines = np.linalg.svd(source_basis.T @ target_basis, compute_uv=False)
    assert cosines.min() < 0.9


def test_nuisance_stays_outside_the_identity_subspace():
    cfg = GeneratorConfig(num_identities=10, noise_sd=0.0, camera_jitter_sd=0.0, seed=2)
    source, _ = generate(cfg)
    basis = identity_subspace(cfg)
    coords = source.train.features @ basis
    for identity in np.unique(source.train.identities):
        rows = coords[source.train.identities == identity]
        np.testing.assert_allclose(rows, np.broadcast_to(rows[0], rows.shape), atol=1e-4)


def _projected_map(split, basis):
    return evaluate(split.query.features @ basis, RetrievalMeta.of(split.query),
                    split.gallery.features @ basis, RetrievalMeta.of(split.gallery)).mean_ap


@pytest.mark.parametrize("seed", [0, 1])
def test_source_directions_transfer_poorly_to_the_target(seed):
    cfg = GeneratorConfig(seed=seed)
    source, target = generate(cfg)
    source_basis = identity_subspace(cfg)
    target_basis = identity_subspace(cfg, build_shift(cfg))
    assert _projected_map(source, source_basis) > 0.9
    within_target = _projected_map(target, target_basis)
    assert within_target > 0.9
    assert _projected_map(target, source_basis) < within_target - 0.15

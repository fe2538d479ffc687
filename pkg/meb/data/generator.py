"""Synthetic re-identification benchmark with a controllable source→target shift.

Every identity is a Gaussian cloud around a random prototype drawn inside a
low-rank identity subspace. Source records are ``prototype + camera offset +
nuisance + noise``; target records push the prototype through an affine domain
shift before the camera offset, nuisance and noise are added. The nuisance is
per-record variation confined to the orthogonal complement of each domain's
own identity subspace, so directions a source model learned to ignore carry
identity on the target and vice versa. Source and target use disjoint identity
ranges.
"""
from dataclasses import dataclass

import numpy as np
from scipy.stats import ortho_group

from meb.core.errors import ConfigError
from meb.core.logger import log_execution_time
from meb.core.utils import make_rng
from meb.data.records import SampleSet, SplitDataset
from meb.schemas.enums import Domain, ShiftKind
from meb.schemas.generator import GeneratorConfig


@dataclass(frozen=True)
class AffineShift:
    matrix: np.ndarray
    offset: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        return x @ self.matrix.T + self.offset

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.matrix))


def build_shift(cfg: GeneratorConfig) -> AffineShift:
    D = cfg.input_dim
    shift = cfg.domain_shift
    if shift.kind == ShiftKind.IDENTITY:
        return AffineShift(np.eye(D), np.zeros(D))
    if shift.kind == ShiftKind.EXPLICIT:
        matrix = np.asarray(shift.matrix, dtype=np.float64)
        offset = np.asarray(shift.offset, dtype=np.float64)
        if matrix.shape != (D, D) or offset.shape != (D,):
            raise ConfigError(f"explicit domain shift must be {D}x{D} plus {D} offsets")
        return AffineShift(matrix, offset)

    rng = make_rng(cfg.seed, "domain_shift")
    left = ortho_group.rvs(D, random_state=rng)
    right = ortho_group.rvs(D, random_state=rng)
    half = np.log(shift.condition_number) / 2
    singular = np.exp(rng.uniform(-half, half, size=D))
    return AffineShift(left @ np.diag(singular) @ right, rng.normal(0.0, shift.offset_scale, size=D))


def identity_subspace(cfg: GeneratorConfig, shift: AffineShift | None = None) -> np.ndarray:
    """Orthonormal ``(D, r)`` basis of the directions that carry identity in one domain."""
    D, r = cfg.input_dim, cfg.identity_rank
    if r == D:
        basis = np.eye(D)
    else:
        basis = ortho_group.rvs(D, random_state=make_rng(cfg.seed, "identity_subspace"))[:, :r]
    if shift is None:
        return basis
    return np.linalg.qr(shift.matrix @ basis)[0]


def _nuisance_projector(basis: np.ndarray) -> np.ndarray | None:
    D, r = basis.shape
    if r == D:
        return None
    return np.eye(D) - basis @ basis.T


def _identity_clouds(
        rng: np.random.Generator,
        domain: Domain,
        prototypes: np.ndarray,
        first_id: int,
        samples: int,
        camera_offsets: np.ndarray,
        noise_sd: float,
        single_camera: bool = False,
        nuisance: np.ndarray | None = None,
        nuisance_sd: float = 0.0,
) -> SampleSet:
    n_ids, D = prototypes.shape
    n_cams = camera_offsets.shape[0]
    features, identities, cameras = [], [], []
    for i in range(n_ids):
        start = int(rng.integers(n_cams))
        cams = np.full(samples, start) if single_camera else (start + np.arange(samples)) % n_cams
        noise = rng.normal(0.0, 1.0, size=(samples, D)) * noise_sd
        if nuisance is not None and nuisance_sd > 0:
            noise = noise + rng.normal(0.0, nuisance_sd, size=(samples, D)) @ nuisance
        features.append(prototypes[i] + camera_offsets[cams] + noise)
        identities.append(np.full(samples, first_id + i))
        cameras.append(cams)
    if not features:
        return SampleSet(np.zeros((0, D)), np.zeros(0), np.zeros(0), domain)
    return SampleSet(np.concatenate(features), np.concatenate(identities), np.concatenate(cameras), domain)


def _split_queries(test: SampleSet, per_identity: int, samples: int) -> tuple[SampleSet, SampleSet]:
    position = np.arange(len(test)) % samples
    query = position < per_identity
    return test.subset(np.flatnonzero(query)), test.subset(np.flatnonzero(~query))


def _domain_split(cfg: GeneratorConfig, domain: Domain, first_id: int, shift: AffineShift | None) -> SplitDataset:
    D = cfg.input_dim
    rng = make_rng(cfg.seed, domain.value)
    n_train, n_test = cfg.num_identities, cfg.num_test_identities

    n_total = n_train + n_test + cfg.distractor_identities
    if cfg.identity_rank == D:
        prototypes = rng.normal(0.0, cfg.identity_separation, size=(n_total, D))
    else:
        coords = rng.normal(0.0, cfg.identity_separation, size=(n_total, cfg.identity_rank))
        prototypes = coords @ identity_subspace(cfg).T
    if shift is not None:
        prototypes = shift.apply(prototypes)
    camera_offsets = rng.normal(0.0, cfg.camera_jitter_sd, size=(cfg.cameras_per_domain, D))
    clouds = dict(
        noise_sd=cfg.noise_sd,
        nuisance=_nuisance_projector(identity_subspace(cfg, shift)),
        nuisance_sd=cfg.nuisance_sd,
    )

    train = _identity_clouds(rng, domain, prototypes[:n_train], first_id, cfg.samples_per_identity,
                             camera_offsets, **clouds)
    test = _identity_clouds(rng, domain, prototypes[n_train:n_train + n_test], first_id + n_train,
                            cfg.test_samples_per_identity, camera_offsets, **clouds)
    query, gallery = _split_queries(test, cfg.queries_per_identity, cfg.test_samples_per_identity)
    if cfg.distractor_identities:
        distractors = _identity_clouds(rng, domain, prototypes[n_train + n_test:], first_id + n_train + n_test,
                                       cfg.test_samples_per_identity, camera_offsets, single_camera=True, **clouds)
        gallery = SampleSet(
            np.concatenate([gallery.features, distractors.features]),
            np.concatenate([gallery.identities, distractors.identities]),
            np.concatenate([gallery.cameras, distractors.cameras]),
            domain,
        )
    return SplitDataset(domain=domain, train=train, query=query, gallery=gallery)


def identities_per_domain(cfg: GeneratorConfig) -> int:
    return cfg.num_identities + cfg.num_test_identities + cfg.distractor_identities


@log_execution_time("generate synthetic benchmark")
def generate(cfg: GeneratorConfig) -> tuple[SplitDataset, SplitDataset]:
    """Build (source, target) datasets; a pure function of ``cfg``."""
    if cfg.input_dim < 2:
        raise ConfigError(f"input_dim must be at least 2, got {cfg.input_dim}")
    source = _domain_split(cfg, Domain.SOURCE, first_id=0, shift=None)
    target = _domain_split(cfg, Domain.TARGET, first_id=identities_per_domain(cfg), shift=build_shift(cfg))
    return source, target


def nearest_centroid_accuracy(samples: SampleSet) -> float:
    """Share of records whose nearest identity mean is their own identity."""
    ids = np.unique(samples.identities)
    means = np.stack([samples.features[samples.identities == i].mean(axis=0, dtype=np.float64) for i in ids])
    dist = ((samples.features[:, None, :].astype(np.float64) - means[None, :, :]) ** 2).sum(axis=2)
    predicted = ids[np.argmin(dist, axis=1)]
    return float(np.mean(predicted == samples.identities))

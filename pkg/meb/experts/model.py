from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from meb.core.errors import ConfigError, DegenerateClusterError, DimensionError
from meb.core.logger import logger
from meb.core.utils import make_rng
from meb.experts.architectures import encode, init_encoder
from meb.numcore import Tensor, affine
from meb.schemas.enums import ParamSet
from meb.schemas.experts import ArchitectureSpec

SOURCE_HEAD = "source_head"
TARGET_HEAD = "target_head"

ParameterSet = dict[str, Tensor]


class ExpertOutput(NamedTuple):
    features: Tensor
    logits_src: Tensor
    logits_tgt: Tensor | None


@dataclass(eq=False)
class ExpertModel:
    """One expert: encoder plus heads, in a trained (theta) and a temporally averaged (theta_avg) copy."""

    arch: ArchitectureSpec
    input_dim: int
    theta: ParameterSet
    theta_avg: ParameterSet
    meta: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.arch.name

    @property
    def feature_dim(self) -> int:
        return self.arch.feature_dim

    @property
    def num_source_classes(self) -> int:
        return self.theta[f"{SOURCE_HEAD}.weight"].shape[1]

    @property
    def num_target_classes(self) -> int | None:
        head = self.theta.get(f"{TARGET_HEAD}.weight")
        return None if head is None else head.shape[1]

    @property
    def parameter_count(self) -> int:
        return sum(t.data.size for t in self.theta.values())

    def params(self, which: ParamSet) -> ParameterSet:
        return self.theta if ParamSet(which) == ParamSet.THETA else self.theta_avg

    def trainable(self) -> list[str]:
        return list(self.theta)


def _tensor_set(arrays: dict[str, np.ndarray]) -> ParameterSet:
    return {name: Tensor(np.array(value, dtype=np.float32), requires_grad=True, name=name)
            for name, value in arrays.items()}


def _same_topology(a: ArchitectureSpec, b: ArchitectureSpec) -> bool:
    return a.model_dump(exclude={"name"}) == b.model_dump(exclude={"name"})


def build_experts(
        specs: Sequence[ArchitectureSpec],
        seed: int,
        input_dim: int,
        num_source_classes: int,
) -> list[ExpertModel]:
    if len(specs) < 2:
        raise ConfigError(f"at least two expert architectures are required, got {len(specs)}")
    names = [spec.name for spec in specs]
    if len(set(names)) != len(names):
        raise ConfigError(f"expert names must be distinct: {names}")
    for i, a in enumerate(specs):
        for b in specs[i + 1:]:
            if _same_topology(a, b):
                raise ConfigError(f"experts '{a.name}' and '{b.name}' share one architecture")
    widths = {spec.feature_dim for spec in specs}
    if len(widths) != 1:
        raise ConfigError(f"experts disagree on feature_dim: {sorted(widths)}")
    if input_dim < 1 or num_source_classes < 1:
        raise ConfigError("input_dim and num_source_classes must be positive")

    experts = []
    for spec in specs:
        rng = make_rng(seed, "init", spec.name)
        arrays = init_encoder(spec, input_dim, rng)
        F = spec.feature_dim
        arrays[f"{SOURCE_HEAD}.weight"] = rng.normal(0.0, np.sqrt(1.0 / F), size=(F, num_source_classes)).astype(np.float32)
        arrays[f"{SOURCE_HEAD}.bias"] = np.zeros(num_source_classes, dtype=np.float32)
        expert = ExpertModel(arch=spec, input_dim=input_dim, theta=_tensor_set(arrays), theta_avg=_tensor_set(arrays))
        logger.debug("Built expert", expert=spec.name, parameters=expert.parameter_count)
        experts.append(expert)
    return experts


def forward(m: ExpertModel, which: ParamSet, x: Tensor) -> ExpertOutput:
    if x.ndim != 2 or x.shape[1] != m.input_dim:
        raise DimensionError(f"{m.name}: expected input [B, {m.input_dim}], got {x.shape}")
    params = m.params(which)
    features = encode(m.arch, params, x)
    logits_src = affine(features, params[f"{SOURCE_HEAD}.weight"], params[f"{SOURCE_HEAD}.bias"])
    logits_tgt = None
    if f"{TARGET_HEAD}.weight" in params:
        logits_tgt = affine(features, params[f"{TARGET_HEAD}.weight"], params[f"{TARGET_HEAD}.bias"])
    return ExpertOutput(features, logits_src, logits_tgt)


def ema_update(m: ExpertModel, alpha: float) -> None:
    """theta_avg <- alpha * theta_avg + (1 - alpha) * theta, heads included."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"EMA momentum must lie in [0, 1], got {alpha}")
    for name, current in m.theta.items():
        average = m.theta_avg[name]
        if average.shape != current.shape:
            raise DimensionError(f"{m.name}: theta_avg['{name}'] has shape {average.shape}, theta {current.shape}")
        if alpha == 0.0:
            average.data = current.data.copy()
        elif alpha < 1.0:
            mixed = alpha * average.data.astype(np.float64) + (1.0 - alpha) * current.data.astype(np.float64)
            average.data = mixed.astype(average.data.dtype)


def sync_average(m: ExpertModel) -> None:
    ema_update(m, 0.0)


def reset_target_head(m: ExpertModel, centroids: np.ndarray, num_classes: int | None = None) -> None:
    """Point the target head at L2-normalised ``centroids`` [M_t, F] with zero bias, in both parameter sets."""
    centroids = np.asarray(centroids, dtype=np.float64)
    if centroids.ndim != 2 or centroids.shape[1] != m.feature_dim:
        raise DimensionError(f"{m.name}: centroids must be [M_t, {m.feature_dim}], got {centroids.shape}")
    if num_classes is not None and centroids.shape[0] != num_classes:
        raise DimensionError(f"{m.name}: expected {num_classes} centroids, got {centroids.shape[0]}")
    norms = np.linalg.norm(centroids, axis=1)
    if np.any(norms == 0):
        raise DegenerateClusterError(f"{m.name}: centroid rows {np.flatnonzero(norms == 0).tolist()} are all zero")
    weight = (centroids / norms[:, None]).T.astype(np.float32)
    bias = np.zeros(centroids.shape[0], dtype=np.float32)
    for params in (m.theta, m.theta_avg):
        params[f"{TARGET_HEAD}.weight"] = Tensor(weight.copy(), requires_grad=True, name=f"{TARGET_HEAD}.weight")
        params[f"{TARGET_HEAD}.bias"] = Tensor(bias.copy(), requires_grad=True, name=f"{TARGET_HEAD}.bias")


def clone_experts(experts: Sequence[ExpertModel]) -> list[ExpertModel]:
    return [
        ExpertModel(
            arch=m.arch,
            input_dim=m.input_dim,
            theta=_tensor_set({k: v.data for k, v in m.theta.items()}),
            theta_avg=_tensor_set({k: v.data for k, v in m.theta_avg.items()}),
            meta=dict(m.meta),
        )
        for m in experts
    ]

from pydantic import BaseModel, ConfigDict, Field, field_validator

from meb.schemas.enums import Ablation


class LossConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epsilon: float = Field(default=0.1, ge=0.0, lt=1.0)
    use_authority: bool = True
    weights: list[float] | None = None
    mutual_identity: bool = True
    mutual_triplet: bool = True

    @field_validator("weights")
    @classmethod
    def positive_weights(cls, value):
        if value is not None and any(w <= 0 for w in value):
            raise ValueError("authority weights must be positive")
        return value


class ClusterConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    iters: int = Field(default=50, ge=1)
    batch_size: int | None = Field(default=None, ge=1)
    seeding_sample: int | None = Field(default=None, ge=1)

    def resolved_batch_size(self, n: int) -> int:
        return min(self.batch_size or 256, n)


class PretrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(default=80, ge=0)
    lr: float = Field(default=0.00035, gt=0.0)
    lr_milestones: list[int] = Field(default_factory=lambda: [40, 70])
    lr_gamma: float = Field(default=0.1, gt=0.0)
    weight_decay: float = Field(default=0.0005, ge=0.0)
    P: int = Field(default=16, ge=2)
    K: int = Field(default=4, ge=1)
    epsilon: float = Field(default=0.1, ge=0.0, lt=1.0)
    iterations_per_epoch: int | None = Field(default=None, ge=1)
    eval_every: int = Field(default=1, ge=0)
    seed: int | None = None


class AdaptConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(default=40, ge=0)
    iterations_per_epoch: int = Field(default=800, ge=1)
    alpha: float = Field(default=0.999, ge=0.0, le=1.0)
    num_clusters: int = Field(default=20, ge=2)
    lr: float = Field(default=0.00035, gt=0.0)
    weight_decay: float = Field(default=0.0005, ge=0.0)
    P: int = Field(default=16, ge=2)
    K: int = Field(default=4, ge=1)
    epsilon: float = Field(default=0.1, ge=0.0, lt=1.0)
    ablations: list[Ablation] = Field(default_factory=list)
    cluster: ClusterConfig = Field(default_factory=ClusterConfig)
    checkpoint_every: int = Field(default=0, ge=0)
    eval_every: int = Field(default=1, ge=1)
    seed: int | None = None

    def has(self, ablation: Ablation) -> bool:
        return ablation in self.ablations

    @property
    def mutual_enabled(self) -> bool:
        return not any(self.has(a) for a in (Ablation.VOTING_ONLY, Ablation.BASELINE_ENSEMBLE, Ablation.SINGLE_TRANSFER))

    @property
    def temporal_average(self) -> bool:
        return not (self.has(Ablation.NO_EMA) or self.has(Ablation.BASELINE_ENSEMBLE))

    @property
    def authority_enabled(self) -> bool:
        return self.mutual_enabled and not self.has(Ablation.NO_AR)

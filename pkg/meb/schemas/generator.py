from pydantic import BaseModel, ConfigDict, Field, model_validator

from meb.schemas.enums import ShiftKind


class DomainShiftConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: ShiftKind = ShiftKind.RANDOM
    condition_number: float = Field(default=4.0, ge=1.0, le=5.0)
    offset_scale: float = Field(default=1.0, ge=0.0)
    matrix: list[list[float]] | None = None
    offset: list[float] | None = None

    @model_validator(mode="after")
    def check_explicit(self):
        if self.kind == ShiftKind.EXPLICIT and (self.matrix is None or self.offset is None):
            raise ValueError("explicit domain shift needs both matrix and offset")
        return self


class GeneratorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    num_identities: int = Field(default=50, ge=1)
    cameras_per_domain: int = Field(default=4, ge=1)
    samples_per_identity: int = Field(default=20, ge=1)
    input_dim: int = Field(default=32, ge=1)
    identity_separation: float = Field(default=1.0, ge=0.0)
    # share of the input dimensions that carries identity; the rest holds per-domain nuisance
    identity_fraction: float = Field(default=0.5, gt=0.0, le=1.0)
    nuisance_sd: float = Field(default=1.0, ge=0.0)
    camera_jitter_sd: float = Field(default=0.3, ge=0.0)
    noise_sd: float = Field(default=0.3, ge=0.0)
    domain_shift: DomainShiftConfig = Field(default_factory=DomainShiftConfig)

    test_identities: int | None = Field(default=None, ge=1)
    test_samples_per_identity: int = Field(default=10, ge=2)
    queries_per_identity: int = Field(default=2, ge=1)
    distractor_identities: int = Field(default=0, ge=0)
    seed: int = 0

    @property
    def num_test_identities(self) -> int:
        return self.test_identities if self.test_identities is not None else self.num_identities

    @property
    def identity_rank(self) -> int:
        return min(self.input_dim, max(1, round(self.identity_fraction * self.input_dim)))

    @model_validator(mode="after")
    def check_queries(self):
        if self.queries_per_identity >= self.test_samples_per_identity:
            raise ValueError("queries_per_identity must leave at least one gallery sample per identity")
        return self

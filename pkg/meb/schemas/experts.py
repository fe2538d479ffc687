from pydantic import BaseModel, ConfigDict, Field, model_validator

from meb.schemas.enums import Activation, SkipPattern


class ArchitectureSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str
    hidden_widths: list[int] = Field(min_length=1)
    activation: Activation | list[Activation] = Activation.RELU
    skip: SkipPattern = SkipPattern.NONE
    branch_widths: list[int] = Field(default_factory=list)
    branch_activations: list[Activation] = Field(default_factory=list)
    embed_dim: int = Field(ge=1)
    feature_dim: int = Field(default=64, ge=1)

    @property
    def activations(self) -> list[Activation]:
        if isinstance(self.activation, list):
            return list(self.activation)
        return [self.activation] * len(self.hidden_widths)

    @model_validator(mode="after")
    def check_layout(self):
        if isinstance(self.activation, list) and len(self.activation) != len(self.hidden_widths):
            raise ValueError(f"{self.name}: one activation per hidden layer expected")
        if any(w < 1 for w in self.hidden_widths + self.branch_widths):
            raise ValueError(f"{self.name}: layer widths must be positive")
        if self.skip == SkipPattern.RESIDUAL and len(set(self.hidden_widths)) != 1:
            raise ValueError(f"{self.name}: residual layers need equal widths")
        if self.branch_activations and len(self.branch_activations) != len(self.branch_widths):
            raise ValueError(f"{self.name}: one activation per branch expected")
        if self.embed_dim > self.feature_dim:
            raise ValueError(f"{self.name}: embed_dim {self.embed_dim} exceeds feature_dim {self.feature_dim}")
        return self


def default_architectures(feature_dim: int = 64) -> list[ArchitectureSpec]:
    return [
        ArchitectureSpec(
            name="dense-mlp",
            hidden_widths=[64, 64, 64],
            skip=SkipPattern.DENSE_CONCAT,
            embed_dim=48,
            feature_dim=feature_dim,
        ),
        ArchitectureSpec(
            name="res-mlp",
            hidden_widths=[128, 128],
            skip=SkipPattern.RESIDUAL,
            embed_dim=feature_dim,
            feature_dim=feature_dim,
        ),
        ArchitectureSpec(
            name="incept-mlp",
            hidden_widths=[96],
            branch_widths=[32, 32, 64],
            branch_activations=[Activation.RELU, Activation.TANH, Activation.RELU],
            embed_dim=56,
            feature_dim=feature_dim,
        ),
    ]

import json
import re
import tomllib
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from meb.config import settings
from meb.core.errors import ConfigError
from meb.core.utils import derive_seed
from meb.schemas.enums import Ablation, variant_name
from meb.schemas.experts import ArchitectureSpec, default_architectures
from meb.schemas.generator import GeneratorConfig
from meb.schemas.training import AdaptConfig, PretrainConfig

DEFAULT_VARIANTS = [
    [],
    [Ablation.VOTING_ONLY],
    [Ablation.NO_EMA],
    [Ablation.NO_MID],
    [Ablation.NO_MTRI],
    [Ablation.NO_AR],
    [Ablation.BASELINE_ENSEMBLE],
    [Ablation.SINGLE_TRANSFER],
]


class SweepConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seeds: list[int] = Field(default_factory=lambda: [0, 1, 2], min_length=1)
    variants: list[list[Ablation]] = Field(default_factory=lambda: [list(v) for v in DEFAULT_VARIANTS])
    supervised: bool = True

    @field_validator("variants", mode="before")
    @classmethod
    def split_names(cls, value):
        # "no_ar" or "no_ema+no_ar" name a variant as well as a list of flags
        if isinstance(value, list):
            return [[] if v == "full" else v.split("+") if isinstance(v, str) else v for v in value]
        return value

    @property
    def variant_names(self) -> list[str]:
        return [variant_name(v) for v in self.variants]


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    output_dir: str = Field(default_factory=lambda: f"{settings.OUTPUT_ROOT}/default")
    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)
    experts: list[ArchitectureSpec] = Field(default_factory=default_architectures)
    pretrain: PretrainConfig = Field(default_factory=PretrainConfig)
    adapt: AdaptConfig = Field(default_factory=AdaptConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)

    @model_validator(mode="after")
    def check_experts(self):
        if len(self.experts) < 2:
            raise ValueError("at least two experts are required")
        return self

    def stage_seed(self, stage: str) -> int:
        explicit = {"pretrain": self.pretrain.seed, "adapt": self.adapt.seed}.get(stage)
        return explicit if explicit is not None else derive_seed(self.seed, stage)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Copy driven entirely by ``seed``: the generator and every stage derive from it."""
        return self.model_copy(update={
            "seed": seed,
            "generator": self.generator.model_copy(update={"seed": seed}),
            "pretrain": self.pretrain.model_copy(update={"seed": None}),
            "adapt": self.adapt.model_copy(update={"seed": None}),
        })

    def with_ablations(self, ablations: list[Ablation]) -> "ExperimentConfig":
        return self.model_copy(update={"adapt": self.adapt.model_copy(update={"ablations": list(ablations)})})

    def resolved(self) -> dict:
        return self.model_dump(mode="json")


def _key_line(text: str, loc: tuple, is_toml: bool) -> int | None:
    keys = [str(part) for part in loc if not isinstance(part, int)]
    if not keys:
        return None
    lines = text.splitlines()
    if is_toml:
        table: list[str] = []
        for number, line in enumerate(lines, start=1):
            stripped = line.strip()
            header = re.match(r"^\[\[?\s*([^\]]+?)\s*\]\]?", stripped)
            if header:
                table = [p.strip() for p in header.group(1).split(".")]
                if table == keys:
                    return number
                continue
            key = re.match(r"^([A-Za-z0-9_\-\.\"]+)\s*=", stripped)
            if key:
                path = table + [p.strip('"') for p in key.group(1).split(".")]
                if path == keys:
                    return number
        return None
    pattern = re.compile(r'"%s"\s*:' % re.escape(keys[-1]))
    for number, line in enumerate(lines, start=1):
        if pattern.search(line):
            return number
    return None


def _describe(exc: ValidationError, text: str, is_toml: bool, path: Path) -> str:
    problems = []
    for err in exc.errors():
        dotted = ".".join(str(p) for p in err["loc"])
        line = _key_line(text, err["loc"], is_toml)
        where = f"{path}:{line}" if line else str(path)
        if err["type"] == "extra_forbidden":
            problems.append(f"{where}: unknown key '{dotted}'")
        else:
            problems.append(f"{where}: {dotted}: {err['msg']}")
    return "; ".join(problems)


def load_experiment_config(path: Path | str) -> ExperimentConfig:
    """Read a TOML (or ``.json``) experiment config; unknown keys are rejected with their line."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    text = path.read_text(encoding="utf-8")
    is_toml = path.suffix.lower() != ".json"
    try:
        raw = tomllib.loads(text) if is_toml else json.loads(text)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: cannot parse ({exc})")
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_describe(exc, text, is_toml, path))

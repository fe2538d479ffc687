from pydantic import BaseModel, Field


class LossBreakdown(BaseModel):
    mid: float = 0.0
    mtri: float = 0.0
    id: float = 0.0
    tri: float = 0.0
    total: float = 0.0

    @property
    def vot(self) -> float:
        return self.id + self.tri

    def as_dict(self) -> dict[str, float]:
        return {"mid": self.mid, "mtri": self.mtri, "id": self.id, "tri": self.tri, "vot": self.vot, "total": self.total}

    @classmethod
    def average(cls, items: list["LossBreakdown"]) -> "LossBreakdown":
        if not items:
            return cls()
        n = len(items)
        return cls(**{key: sum(getattr(item, key) for item in items) / n for key in ("mid", "mtri", "id", "tri", "total")})


class MetricsReport(BaseModel):
    mean_ap: float = Field(ge=0.0, le=1.0)
    cmc: list[float]
    per_query_ap: list[float]
    query_index: list[int] = Field(default_factory=list)
    skipped_queries: int = 0
    expert: str | None = None
    epoch: int | None = None

    def rank(self, r: int) -> float:
        """CMC@r with 1-based r; ranks past the curve end repeat its last value."""
        return self.cmc[min(r, len(self.cmc)) - 1]

    def summary(self) -> dict[str, float]:
        return {"mAP": self.mean_ap, "cmc1": self.rank(1), "cmc5": self.rank(5), "cmc10": self.rank(10)}


class ExpertAuthority(BaseModel):
    expert: str
    s_intra: float
    s_inter: float
    j: float
    w: float
    floored: bool = False


class AuthorityReport(BaseModel):
    epoch: int
    experts: list[ExpertAuthority]

    @property
    def weights(self) -> list[float]:
        return [e.w for e in self.experts]

from pydantic import BaseModel, Field


class TopNRow(BaseModel):
    k: int = Field(ge=1)
    precision: float = Field(ge=0, le=1)
    recall: float = Field(ge=0, le=1)
    users: int = Field(ge=0)


class MetricReport(BaseModel):
    """Rating accuracy plus macro-averaged top-N precision/recall per k."""

    rmse: float = Field(ge=0)
    mae: float = Field(ge=0)
    pairs: int = Field(ge=0)
    skipped: int = Field(default=0, ge=0)
    topn: list[TopNRow] = Field(default_factory=list)

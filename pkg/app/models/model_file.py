from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.models.constants import Algorithm, EnsembleKind, FeedbackKind
from app.models.fm_model import EncoderSpec


class ModelHeader(BaseModel):
    format_version: int
    algorithm: Algorithm
    created_at: str
    rating_scale: tuple[float, float]
    feedback: FeedbackKind = FeedbackKind.EXPLICIT
    library: str = "recofactor"


class EnsembleBlock(BaseModel):
    kind: EnsembleKind
    weights: list[float]
    intercept: float = 0.0
    members: list["ModelFile"]
    metadata: dict[str, Any] = Field(default_factory=dict)


class ModelFile(BaseModel):
    """Versioned JSON document holding one trained model.

    ``users``/``items`` are the index maps (position = dense index);
    ``params`` is the algorithm's parameter block as nested lists.
    """

    model_config = ConfigDict(extra="forbid")

    header: ModelHeader
    users: list[str]
    items: list[str]
    params: dict[str, Any] = Field(default_factory=dict)
    encoder: Optional[EncoderSpec] = None
    ensemble: Optional[EnsembleBlock] = None


EnsembleBlock.model_rebuild()
ModelFile.model_rebuild()

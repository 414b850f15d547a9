import math
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.constants import EnsembleKind


class BlendModel(BaseModel):
    """Members combined as ``intercept + sum_m weights[m] * member_m``.

    Blend and bag weights lie on the simplex; stacking coefficients are free.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    kind: EnsembleKind = EnsembleKind.BLEND
    members: list[Any]
    weights: list[float]
    intercept: float = 0.0
    metadata: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_weights(self) -> "BlendModel":
        if not self.members:
            raise ValueError("an ensemble needs at least one member")
        if len(self.weights) != len(self.members):
            raise ValueError("one weight per member is required")
        if not all(math.isfinite(w) for w in self.weights):
            raise ValueError("weights must be finite")
        if self.kind is not EnsembleKind.STACK:
            if any(w < 0 for w in self.weights) or not math.isclose(
                math.fsum(self.weights), 1.0, abs_tol=1e-9
            ):
                raise ValueError("blend weights must be nonnegative and sum to 1")
            if self.intercept != 0.0:
                raise ValueError("only stacking has an intercept")
        return self

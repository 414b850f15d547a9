from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.models.constants import OptimizerKind


class OptimizerConfig(BaseModel):
    """Instantiation and hyperparameters of the four-step optimizer.

    ``beta1``/``beta2`` defaults are conventional choices; ``epsilon``
    protects the adaptive denominator.
    """

    model_config = ConfigDict(frozen=True)

    kind: OptimizerKind = OptimizerKind.SGD
    alpha: float = Field(default=0.01, gt=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    epsilon: float = Field(default=1e-8, gt=0)


class OptimizerState(BaseModel):
    """First (m) and second (V) momentum per named parameter tensor."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: OptimizerConfig = Field(default_factory=OptimizerConfig)
    t: int = 0
    m: dict[str, np.ndarray] = Field(default_factory=dict)
    V: dict[str, np.ndarray] = Field(default_factory=dict)

    def to_document(self) -> dict[str, Any]:
        return {
            "config": self.config.model_dump(mode="json"),
            "t": self.t,
            "m": {name: array.tolist() for name, array in self.m.items()},
            "V": {name: array.tolist() for name, array in self.V.items()},
        }

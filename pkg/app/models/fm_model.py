import math
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.constants import ColumnKind, LossKind, OptimizerKind
from app.models.optim_model import OptimizerConfig


class FeatureVector(BaseModel):
    """Sparse input x: nonzero (index, value) pairs of an n-dimensional vector.

    ``fields[t]`` is the field of feature ``indices[t]`` (FFM only).
    """

    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1)
    indices: list[int] = Field(default_factory=list)
    values: list[float] = Field(default_factory=list)
    fields: Optional[list[int]] = None

    @model_validator(mode="after")
    def check_entries(self) -> "FeatureVector":
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values differ in length")
        if self.fields is not None and len(self.fields) != len(self.indices):
            raise ValueError("one field id per nonzero feature is required")
        for a, b in zip(self.indices, self.indices[1:]):
            if a >= b:
                raise ValueError("indices must be strictly increasing")
        if self.indices and not 0 <= self.indices[0] <= self.indices[-1] < self.n:
            raise ValueError(f"feature index outside [0, {self.n})")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("feature values must be finite")
        return self

    @classmethod
    def from_dense(cls, x: Any, fields: Optional[list[int]] = None) -> "FeatureVector":
        """Keeps the nonzero entries of a dense vector; ``fields`` is per feature."""
        x = np.asarray(x, dtype=np.float64).ravel()
        nonzero = [int(i) for i in np.flatnonzero(x)]
        return cls(
            n=x.size,
            indices=nonzero,
            values=[float(x[i]) for i in nonzero],
            fields=[fields[i] for i in nonzero] if fields is not None else None,
        )

    def to_dense(self) -> np.ndarray:
        x = np.zeros(self.n)
        x[self.indices] = self.values
        return x


class FmModel(BaseModel):
    """2-way factorization machine: global bias w0, weights w (n), latents V (n x k)."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    w0: float = 0.0
    w: np.ndarray
    V: np.ndarray

    @model_validator(mode="after")
    def check_layout(self) -> "FmModel":
        if self.V.ndim != 2 or self.V.shape[1] < 1 or self.w.shape != (self.V.shape[0],):
            raise ValueError("expected w of length n and V of shape (n, k), k >= 1")
        return self

    @property
    def n(self) -> int:
        return int(self.V.shape[0])

    @property
    def k(self) -> int:
        return int(self.V.shape[1])

    def is_finite(self) -> bool:
        return bool(math.isfinite(self.w0) and np.all(np.isfinite(self.w)) and np.all(np.isfinite(self.V)))


class FfmModel(BaseModel):
    """Field-aware FM: V[j, f] is feature j's latent vector against field f."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    w0: float = 0.0
    w: np.ndarray
    V: np.ndarray

    @model_validator(mode="after")
    def check_layout(self) -> "FfmModel":
        if self.V.ndim != 3 or self.V.shape[2] < 1 or self.w.shape != (self.V.shape[0],):
            raise ValueError("expected w of length n and V of shape (n, F, k)")
        return self

    @property
    def n(self) -> int:
        return int(self.V.shape[0])

    @property
    def n_fields(self) -> int:
        return int(self.V.shape[1])

    @property
    def k(self) -> int:
        return int(self.V.shape[2])

    def is_finite(self) -> bool:
        return bool(math.isfinite(self.w0) and np.all(np.isfinite(self.w)) and np.all(np.isfinite(self.V)))


class ColumnSpec(BaseModel):
    """One input column. Categorical columns take ``len(categories) + 1`` slots,
    the last being the reserved unknown index; numeric columns take one."""

    model_config = ConfigDict(frozen=True)

    name: str
    kind: ColumnKind = ColumnKind.CATEGORICAL
    categories: list[str] = Field(default_factory=list)

    @property
    def width(self) -> int:
        return len(self.categories) + 1 if self.kind is ColumnKind.CATEGORICAL else 1


class EncoderSpec(BaseModel):
    """Column layout of the feature space; the field of a feature is its column."""

    model_config = ConfigDict(frozen=True)

    columns: list[ColumnSpec]

    @model_validator(mode="after")
    def check_columns(self) -> "EncoderSpec":
        names = [column.name for column in self.columns]
        if not names or len(set(names)) != len(names):
            raise ValueError("column names must be present and unique")
        return self

    @property
    def offsets(self) -> list[int]:
        offsets, start = [], 0
        for column in self.columns:
            offsets.append(start)
            start += column.width
        return offsets

    @property
    def dimension(self) -> int:
        return sum(column.width for column in self.columns)

    @property
    def n_fields(self) -> int:
        return len(self.columns)

    def field_of(self, index: int) -> int:
        for field, (offset, column) in enumerate(zip(self.offsets, self.columns)):
            if offset <= index < offset + column.width:
                return field
        raise IndexError(index)

    @classmethod
    def for_ratings(cls, ds: Any) -> "EncoderSpec":
        """User one-hot (field 0) followed by item one-hot (field 1)."""
        return cls(
            columns=[
                ColumnSpec(name="user", categories=list(ds.users)),
                ColumnSpec(name="item", categories=list(ds.items)),
            ]
        )


class FmTrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int = Field(default=4, ge=1)
    alpha: float = Field(default=0.01, gt=0)
    reg: float = Field(default=0.0, ge=0)
    epochs: int = Field(default=20, ge=0)
    seed: int = 42
    loss: LossKind = LossKind.SQUARED
    optimizer: OptimizerKind = OptimizerKind.SGD
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    epsilon: float = Field(default=1e-8, gt=0)

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            kind=self.optimizer,
            alpha=self.alpha,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.epsilon,
        )


class FmGradient(BaseModel):
    """d y_hat / d theta, sparse over the nonzero features of x.

    ``V`` has one row per entry of ``indices``: shape (z, k) for FM and
    (z, F, k) for FFM.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    w0: float = 1.0
    indices: np.ndarray
    w: np.ndarray
    V: np.ndarray

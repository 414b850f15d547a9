from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.exceptions import ArgumentError
from app.models.constants import (
    FactorKind,
    FunkStrategy,
    ImputeStrategy,
    OptimizerKind,
    RankRuleKind,
    SimilarityMode,
    UpdateOrder,
)
from app.models.linalg_model import DenseMatrix, MaskMatrix
from app.models.optim_model import OptimizerConfig


class TrainConfig(BaseModel):
    """Hyperparameters for the SGD factor-model trainers.

    ``reg`` is the regularization weight lambda; ``alpha`` the learning rate.
    """

    model_config = ConfigDict(frozen=True)

    f: int = Field(default=10, ge=1)
    alpha: float = Field(default=0.01, gt=0)
    reg: float = Field(default=0.02, ge=0)
    epochs: int = Field(default=20, ge=1)
    seed: int = 42
    optimizer: OptimizerKind = OptimizerKind.SGD
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    epsilon: float = Field(default=1e-8, gt=0)
    update_order: UpdateOrder = UpdateOrder.SEQUENTIAL
    strategy: FunkStrategy = FunkStrategy.ALL_FEATURES
    freeze_implicit: bool = False

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            kind=self.optimizer,
            alpha=self.alpha,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.epsilon,
        )


class FactorModel(BaseModel):
    """Latent factors of a Funk-SVD or SVD++ model.

    P is f x m (user factors as columns), Q is f x n. SVD++ models also carry
    the bias block (mu, b_u, b_i) and the implicit item factors Y (f x n).
    ``rated[u]`` is N(u), the items user u interacted with.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    kind: FactorKind = FactorKind.FUNK
    P: DenseMatrix
    Q: DenseMatrix
    rated: list[list[int]]
    mu: Optional[float] = None
    b_u: Optional[np.ndarray] = None
    b_i: Optional[np.ndarray] = None
    Y: Optional[DenseMatrix] = None

    @model_validator(mode="after")
    def check_layout(self) -> "FactorModel":
        if self.P.ndim != 2 or self.Q.ndim != 2 or self.P.shape[0] != self.Q.shape[0]:
            raise ValueError("P and Q must be f x m and f x n")
        has_bias = all(x is not None for x in (self.mu, self.b_u, self.b_i, self.Y))
        if (self.kind is FactorKind.SVDPP) != has_bias:
            raise ValueError("bias block and Y are present iff the model is SVD++")
        if len(self.rated) != self.P.shape[1]:
            raise ValueError("rated sets must cover every user")
        n = self.Q.shape[1]
        for items in self.rated:
            if any(not 0 <= i < n for i in items):
                raise ValueError("rated set refers to an unknown item")
        return self

    @property
    def f(self) -> int:
        return int(self.P.shape[0])

    @property
    def n_users(self) -> int:
        return int(self.P.shape[1])

    @property
    def n_items(self) -> int:
        return int(self.Q.shape[1])

    def is_finite(self) -> bool:
        tensors = [self.P, self.Q]
        if self.kind is FactorKind.SVDPP:
            tensors += [self.b_u, self.b_i, self.Y]
        return all(bool(np.all(np.isfinite(t))) for t in tensors)

    def copy(self) -> "FactorModel":
        return self.model_copy(
            update={
                name: np.array(getattr(self, name))
                for name in ("P", "Q", "b_u", "b_i", "Y")
                if getattr(self, name) is not None
            }
            | {"rated": [list(items) for items in self.rated]}
        )


class TrainingResult(BaseModel):
    """A trained model plus its per-epoch training trace."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    model: Any
    rmse_trace: list[float] = Field(default_factory=list)
    loss_trace: list[float] = Field(default_factory=list)


class RankRule(BaseModel):
    """How the retained rank f is chosen: energy(threshold), ratio(c) or fixed(f)."""

    model_config = ConfigDict(frozen=True)

    kind: RankRuleKind = RankRuleKind.ENERGY
    value: float = 0.95

    @classmethod
    def parse(cls, text: str) -> "RankRule":
        """Parses ``energy:0.95``, ``ratio:10`` or ``fixed:2``."""
        kind, _, raw = text.partition(":")
        try:
            rule_kind = RankRuleKind(kind.strip().lower())
        except ValueError as e:
            raise ArgumentError(f"unknown rank rule '{kind}'") from e
        defaults = {RankRuleKind.ENERGY: 0.95, RankRuleKind.RATIO: 10.0}
        if not raw:
            if rule_kind not in defaults:
                raise ArgumentError("fixed rank rule needs a value, e.g. fixed:2")
            return cls(kind=rule_kind, value=defaults[rule_kind])
        try:
            value = float(raw)
        except ValueError as e:
            raise ArgumentError(f"bad rank rule value '{raw}'") from e
        if rule_kind is RankRuleKind.FIXED and (value < 1 or value != int(value)):
            raise ArgumentError("fixed rank must be a positive integer")
        return cls(kind=rule_kind, value=value)

    def __str__(self) -> str:
        if self.kind is RankRuleKind.FIXED:
            return f"fixed:{int(self.value)}"
        return f"{self.kind.value}:{self.value:g}"


class SvdCfModel(BaseModel):
    """Reconstruction R* with the observation mask it was fitted on."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    r_star: DenseMatrix
    mask: MaskMatrix
    f: int = Field(ge=1)
    similarity_mode: SimilarityMode = SimilarityMode.PAPER_DOT
    neighborhood: Optional[int] = Field(default=None, ge=1)
    impute: Optional[ImputeStrategy] = None
    singular_values: Optional[list[float]] = None

    @model_validator(mode="after")
    def check_shapes(self) -> "SvdCfModel":
        if self.r_star.shape != self.mask.shape or self.r_star.ndim != 2:
            raise ValueError("r_star and mask dimensions differ")
        return self

    @classmethod
    def from_reconstruction(
        cls,
        r_star: Any,
        mask: Any,
        f: Optional[int] = None,
        similarity_mode: SimilarityMode = SimilarityMode.PAPER_DOT,
        neighborhood: Optional[int] = None,
    ) -> "SvdCfModel":
        """Wraps an already reconstructed R* (e.g. a printed one) with its mask."""
        r_star = np.array(r_star, dtype=np.float64)
        mask = np.array(mask, dtype=np.float64)
        return cls(
            r_star=r_star,
            mask=mask,
            f=f or min(r_star.shape),
            similarity_mode=similarity_mode,
            neighborhood=neighborhood,
        )


class ItemCfModel(BaseModel):
    """Co-occurrence similarities w_ij = |N(i) & N(j)| / |N(i)| and user ratings."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    W: DenseMatrix
    K: int = Field(default=20, ge=1)
    ratings: dict[int, dict[int, float]]
    n_users: int

    @property
    def n_items(self) -> int:
        return int(self.W.shape[0])


class Prediction(BaseModel):
    """A prediction together with how it was obtained."""

    value: float
    fallback: bool = False
    reason: Optional[str] = None
    similarity_total: Optional[float] = None

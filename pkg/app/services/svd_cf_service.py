"""Traditional SVD recommender with item-based prediction over R*.

Pipeline: impute the rating matrix, decompose it, keep the leading f factors,
reconstruct R* and predict a missing cell from the user's R* row weighted by
item similarities of the masked R* columns.
"""

import logging
import math
from typing import Optional

import numpy as np

from app.exceptions import (
    ContractViolationError,
    InputError,
    RangeError,
    UndefinedSimilarityError,
)
from app.models.constants import FeedbackKind, ImputeStrategy, RankRuleKind, SimilarityMode
from app.models.factor_model import Prediction, RankRule, SvdCfModel
from app.models.rating_model import RatingDataset
from app.services import linalg_service, ratings_service
from app.services.base import BasePredictor, rank_items

logger = logging.getLogger(__name__)


def choose_rank(singular_values: np.ndarray, rule: RankRule) -> int:
    if rule.kind is RankRuleKind.ENERGY:
        return linalg_service.rank_by_energy(singular_values, rule.value)
    if rule.kind is RankRuleKind.RATIO:
        return linalg_service.rank_by_ratio(singular_values, rule.value)
    f = int(rule.value)
    if f > len(singular_values):
        raise RangeError(f"fixed rank {f} exceeds matrix rank {len(singular_values)}")
    return f


def fit(
    ds: RatingDataset,
    impute: ImputeStrategy | str = ImputeStrategy.USER,
    rank_rule: RankRule | str = RankRule(),
    similarity_mode: SimilarityMode | str = SimilarityMode.PAPER_DOT,
    neighborhood: Optional[int] = None,
) -> SvdCfModel:
    if ds.kind is not FeedbackKind.EXPLICIT:
        raise InputError("the SVD recommender needs explicit ratings")
    if isinstance(rank_rule, str):
        rank_rule = RankRule.parse(rank_rule)
    matrix, mask = ratings_service.to_dense(ds)
    filled = ratings_service.impute(matrix, mask, impute)
    decomposition = linalg_service.svd(filled)
    f = choose_rank(decomposition.singular_values, rank_rule)
    truncated = linalg_service.truncate(decomposition, f)
    logger.info(
        "rank %d by %s keeps %.2f%% of the singular energy",
        f,
        rank_rule,
        100 * linalg_service.energy(decomposition.singular_values, f),
    )
    return SvdCfModel(
        r_star=truncated.reconstruct(),
        mask=mask,
        f=f,
        similarity_mode=SimilarityMode(similarity_mode),
        neighborhood=neighborhood,
        impute=ImputeStrategy(impute),
        singular_values=decomposition.singular_values.tolist(),
    )


def _check_item(model: SvdCfModel, i: int) -> None:
    if not 0 <= i < model.r_star.shape[1]:
        raise RangeError(f"item index {i} out of range")


def masked_item_similarity(model: SvdCfModel, i: int, j: int) -> float:
    """Similarity of R* columns i and j, each restricted to its observed cells."""
    _check_item(model, i)
    _check_item(model, j)
    if i == j:
        raise ContractViolationError("similarity of an item with itself is not defined")
    col_i = linalg_service.hadamard(model.r_star[:, i], model.mask[:, i])
    col_j = linalg_service.hadamard(model.r_star[:, j], model.mask[:, j])
    if model.similarity_mode is SimilarityMode.PAPER_DOT:
        return linalg_service.dot(col_i, col_j)
    try:
        return linalg_service.cosine(col_i, col_j)
    except UndefinedSimilarityError:
        logger.debug("items %d/%d: zero masked column, similarity 0", i, j)
        return 0.0


def _neighbours(model: SvdCfModel, i: int) -> dict[int, float]:
    weights = {}
    for j in range(model.r_star.shape[1]):
        if j == i:
            continue
        sim = masked_item_similarity(model, i, j)
        # Negative similarities carry no weight.
        if sim > 0:
            weights[j] = sim
    if model.neighborhood is not None:
        kept = rank_items(weights, model.neighborhood)
        weights = {j: weights[j] for j in kept}
    return weights


def predict_detailed(model: SvdCfModel, u: int, i: int) -> Prediction:
    if not 0 <= u < model.r_star.shape[0]:
        raise RangeError(f"user index {u} out of range")
    _check_item(model, i)
    weights = _neighbours(model, i)
    total = math.fsum(weights.values())
    if total == 0:
        logger.warning("user %d item %d: zero similarity total, using R* row mean", u, i)
        return Prediction(
            value=float(np.mean(model.r_star[u])),
            fallback=True,
            reason="zero similarity total",
            similarity_total=0.0,
        )
    value = math.fsum(w * model.r_star[u, j] for j, w in sorted(weights.items())) / total
    return Prediction(value=value, similarity_total=total)


def predict(model: SvdCfModel, u: int, i: int) -> float:
    return predict_detailed(model, u, i).value


def round_to_scale(value: float, scale: tuple[float, float] = (1.0, 5.0)) -> int:
    """Nearest integer rating, halves away from zero, clamped to the scale."""
    lo, hi = scale
    rounded = math.floor(abs(value) + 0.5) * (1 if value >= 0 else -1)
    return int(min(max(rounded, math.ceil(lo)), math.floor(hi)))


def recommend(model: SvdCfModel, u: int, k: int) -> list[int]:
    if k < 1:
        raise RangeError("k must be at least 1")
    missing = [i for i in range(model.mask.shape[1]) if model.mask[u, i] == 0]
    return rank_items({i: predict(model, u, i) for i in missing}, k)


class SvdCfPredictor(BasePredictor):
    def __init__(self, model: SvdCfModel, users, items, scale):
        seen = {
            u: [int(i) for i in np.flatnonzero(model.mask[u])]
            for u in range(model.mask.shape[0])
        }
        super().__init__(users, items, scale, seen)
        self.model = model

    def predict(self, u: int, i: int) -> float:
        return predict(self.model, u, i)

    def recommend(self, u: int, k: int) -> list[int]:
        return recommend(self.model, u, k)

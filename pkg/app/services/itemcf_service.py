"""Item co-occurrence baseline: p_uj = sum over N(u) & S(j, K) of w_ji * r_ui."""

import logging
from typing import Optional

import numpy as np

from app.config import settings
from app.exceptions import CapacityError, RangeError
from app.models.factor_model import ItemCfModel, Prediction
from app.models.rating_model import RatingDataset
from app.services.base import BasePredictor, rank_items

logger = logging.getLogger(__name__)


def itemcf_similarity(ds: RatingDataset, K: int = 20) -> ItemCfModel:
    """w_ij = |N(i) & N(j)| / |N(i)| with N(i) the users who rated item i.

    Items nobody rated get an all-zero row; the diagonal is 0.
    """
    n = ds.n_items
    if n * n > settings.DENSE_CELL_CAP:
        raise CapacityError(f"{n} x {n} similarity matrix exceeds the dense cap")
    incidence = np.zeros((ds.n_users, n))
    for u, i, _ in ds.triples:
        incidence[u, i] = 1.0
    overlap = incidence.T @ incidence
    raters = np.diag(overlap).copy()
    W = np.divide(overlap, raters[:, None], out=np.zeros_like(overlap), where=raters[:, None] > 0)
    np.fill_diagonal(W, 0.0)
    return ItemCfModel(
        W=W,
        K=K,
        ratings=dict(ds.user_ratings()),
        n_users=ds.n_users,
    )


def neighbours(model: ItemCfModel, j: int) -> list[int]:
    """S(j, K): the K items most similar to j."""
    return rank_items({i: model.W[j, i] for i in range(model.n_items) if i != j}, model.K)


def itemcf_predict_detailed(
    model: ItemCfModel, u: int, j: int, ds: Optional[RatingDataset] = None
) -> Prediction:
    if not 0 <= j < model.n_items:
        raise RangeError(f"item index {j} out of range")
    rated = ds.user_ratings().get(u, {}) if ds is not None else model.ratings.get(u, {})
    overlap = [i for i in neighbours(model, j) if i in rated]
    weight = float(sum(model.W[j, i] for i in overlap))
    if not overlap or weight == 0.0:
        # neighbours the user rated but with zero similarity leave nothing to sum
        return Prediction(
            value=0.0, fallback=True, reason="empty neighbourhood", similarity_total=weight
        )
    value = float(sum(model.W[j, i] * rated[i] for i in sorted(overlap)))
    return Prediction(value=value, similarity_total=weight)


def itemcf_predict(
    model: ItemCfModel, u: int, j: int, ds: Optional[RatingDataset] = None
) -> float:
    return itemcf_predict_detailed(model, u, j, ds).value


class ItemCfPredictor(BasePredictor):
    """``seen`` defaults to the rated items; implicit training passes every
    observed pair, sampled negatives included."""

    def __init__(self, model: ItemCfModel, users, items, scale, seen=None):
        if seen is None:
            seen = {u: list(r) for u, r in model.ratings.items()}
        super().__init__(users, items, scale, seen)
        self.model = model

    def predict(self, u: int, i: int) -> float:
        return itemcf_predict(self.model, u, i)

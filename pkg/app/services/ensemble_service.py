"""Vote, weighted blending, bagging and stacking over trained predictors."""

import logging
from collections import defaultdict
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from app.config import settings
from app.exceptions import (
    ConditioningError,
    ContractViolationError,
    InputError,
    MemberError,
    RangeError,
    RecofactorError,
)
from app.models.constants import EnsembleKind
from app.models.ensemble_model import BlendModel
from app.models.rating_model import RatingDataset, Triple
from app.services.base import BasePredictor, IPredictor

logger = logging.getLogger(__name__)

Trainer = Callable[[RatingDataset], IPredictor]
Resampler = Callable[[RatingDataset, np.random.Generator], RatingDataset]

MAX_CONDITION = 1e15


def _member_prediction(member: IPredictor, index: int, u: int, i: int) -> float:
    try:
        return member.predict(u, i)
    except RecofactorError as e:
        raise MemberError(e.detail, index) from e
    except Exception as e:
        raise MemberError(str(e), index) from e


def blend_predict(model: BlendModel, u: int, i: int) -> float:
    total = model.intercept
    for m, (member, weight) in enumerate(zip(model.members, model.weights)):
        total += weight * _member_prediction(member, m, u, i)
    return float(total)


def make_blend(members: Sequence[IPredictor], weights: Optional[Sequence[float]] = None) -> BlendModel:
    """Blend with the given weights, or uniform ones."""
    if weights is None:
        weights = [1.0 / len(members)] * len(members) if members else []
    return BlendModel(kind=EnsembleKind.BLEND, members=list(members), weights=list(weights))


def observed_items(members: Sequence[IPredictor], u: int) -> set[int]:
    """Union of the items any member saw for user u in training."""
    items: set[int] = set()
    for member in members:
        items |= set(getattr(member, "seen", {}).get(u, ()))
    return items


def vote_recommend(
    members: Sequence[IPredictor],
    u: int,
    k: int,
    observed: Optional[Iterable[int]] = None,
) -> list[int]:
    """Items ordered by how many members put them in their own top-k.

    Items any member observed for u (sampled negatives included) or listed in
    ``observed`` never receive votes. Ties go to the better mean rank among
    the members that listed the item, then to the lower item index.
    """
    if k < 1:
        raise RangeError("k must be at least 1")
    excluded = observed_items(members, u) | set(observed or ())
    ranks: dict[int, list[int]] = defaultdict(list)
    for m, member in enumerate(members):
        try:
            listed = member.recommend(u, k + len(excluded))
        except RecofactorError as e:
            raise MemberError(e.detail, m) from e
        top = [item for item in listed if item not in excluded][:k]
        for rank, item in enumerate(top, start=1):
            ranks[item].append(rank)
    ordered = sorted(
        ranks.items(),
        key=lambda entry: (-len(entry[1]), sum(entry[1]) / len(entry[1]), entry[0]),
    )
    return [item for item, _ in ordered[:k]]


def bootstrap(ds: RatingDataset, rng: np.random.Generator) -> RatingDataset:
    """Same-size resample of the triples, drawn with replacement."""
    rows = rng.integers(0, len(ds), size=len(ds))
    return ds.with_triples(
        [ds.triples[r] for r in rows],
        multiset=True,
        metadata={"bootstrap_of": len(ds)},
    )


def bag_train(
    trainer: Trainer,
    ds: RatingDataset,
    B: int,
    seed: Optional[int] = None,
    resampler: Resampler = bootstrap,
) -> BlendModel:
    if B < 1:
        raise RangeError("B must be at least 1")
    rng = np.random.default_rng(settings.DEFAULT_SEED if seed is None else seed)
    members = []
    for b in range(B):
        sample = resampler(ds, rng)
        try:
            members.append(trainer(sample))
        except RecofactorError as e:
            raise MemberError(e.detail, b) from e
        logger.info("bagged member %d/%d trained on %d ratings", b + 1, B, len(sample))
    return BlendModel(
        kind=EnsembleKind.BAG,
        members=members,
        weights=[1.0 / B] * B,
        metadata={"seed": seed, "B": B},
    )


def stack_fit(
    members: Sequence[IPredictor],
    holdout: Sequence[Triple],
    ridge: Optional[float] = None,
) -> BlendModel:
    """Least-squares coefficients (with intercept) of the holdout ratings on
    member predictions, solved from ridge-damped normal equations."""
    ridge = settings.STACK_RIDGE if ridge is None else ridge
    if not members:
        raise InputError("stacking needs at least one member")
    if len(holdout) < len(members):
        raise InputError(
            f"stacking {len(members)} members needs at least as many holdout ratings, "
            f"got {len(holdout)}"
        )
    for m, member in enumerate(members):
        seen = getattr(member, "seen", {})
        overlap = sum(1 for u, i, _ in holdout if i in seen.get(u, ()))
        if overlap:
            raise ContractViolationError(
                f"{overlap} holdout pair(s) were in the training data of member {m}; "
                "stacking needs ratings the members never saw"
            )
    X = np.ones((len(holdout), len(members) + 1))
    y = np.empty(len(holdout))
    for row, (u, i, r) in enumerate(holdout):
        for m, member in enumerate(members):
            X[row, m + 1] = _member_prediction(member, m, u, i)
        y[row] = r
    gram = X.T @ X + ridge * np.eye(X.shape[1])
    condition = np.linalg.cond(gram)
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise ConditioningError(f"stacking design is ill-conditioned (cond={condition:.3e})")
    coefficients = np.linalg.solve(gram, X.T @ y)
    if not np.all(np.isfinite(coefficients)):
        raise ConditioningError("stacking produced non-finite coefficients")
    logger.info("stacking coefficients %s", np.array2string(coefficients, precision=4))
    return BlendModel(
        kind=EnsembleKind.STACK,
        members=list(members),
        weights=[float(c) for c in coefficients[1:]],
        intercept=float(coefficients[0]),
        metadata={"holdout": len(holdout)},
    )


class EnsemblePredictor(BasePredictor):
    """A BlendModel as a predictor; candidates exclude what any member saw."""

    def __init__(self, model: BlendModel, users, items, scale):
        seen = {u: observed_items(model.members, u) for u in range(len(users))}
        super().__init__(users, items, scale, seen)
        self.model = model

    def predict(self, u: int, i: int) -> float:
        return blend_predict(self.model, u, i)

"""Rating accuracy (RMSE, MAE) and macro top-N precision/recall."""

import logging
from collections import defaultdict
from typing import Mapping, Optional, Sequence

import numpy as np

from app.exceptions import NoDataError, RangeError, ShapeError
from app.models.constants import FeedbackKind
from app.models.metric_model import MetricReport, TopNRow
from app.models.rating_model import RatingDataset
from app.services.base import BasePredictor

logger = logging.getLogger(__name__)


def _errors(preds: Sequence[float], truths: Sequence[float]) -> np.ndarray:
    preds = np.asarray(preds, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if preds.shape != truths.shape:
        raise ShapeError(f"{preds.size} predictions for {truths.size} ratings")
    if preds.size == 0:
        raise NoDataError("no pairs to score")
    return preds - truths


def rmse(preds: Sequence[float], truths: Sequence[float]) -> float:
    err = _errors(preds, truths)
    return float(np.sqrt(np.mean(err * err)))


def mae(preds: Sequence[float], truths: Sequence[float]) -> float:
    return float(np.mean(np.abs(_errors(preds, truths))))


def topn_metrics(
    recommendations: Mapping[int, Sequence[int]],
    positives: Mapping[int, set[int]],
    k: int,
) -> tuple[float, float]:
    """Precision and recall at k, averaged over users with positives."""
    if k < 1:
        raise RangeError("k must be at least 1")
    users = [u for u, items in positives.items() if items]
    if not users:
        raise NoDataError("no user has held-out positives")
    precision = recall = 0.0
    for u in users:
        hits = len(set(list(recommendations.get(u, []))[:k]) & positives[u])
        precision += hits / k
        recall += hits / len(positives[u])
    return precision / len(users), recall / len(users)


def default_threshold(ds: RatingDataset) -> float:
    """1 for implicit data; the top quarter of the scale for explicit ratings."""
    if ds.kind is FeedbackKind.IMPLICIT:
        return 1.0
    lo, hi = ds.scale
    return lo + 0.75 * (hi - lo)


def evaluate_predictor(
    predictor: BasePredictor,
    test: RatingDataset,
    ks: Sequence[int] = (10,),
    relevance_threshold: Optional[float] = None,
) -> MetricReport:
    """Scores ``predictor`` on ``test``; ids unknown to the predictor are skipped."""
    threshold = default_threshold(test) if relevance_threshold is None else relevance_threshold
    user_index = {user: u for u, user in enumerate(predictor.users)}
    item_index = {item: i for i, item in enumerate(predictor.items)}

    preds, truths = [], []
    positives: dict[int, set[int]] = defaultdict(set)
    skipped = 0
    for user, item, rating in test.raw_triples():
        u, i = user_index.get(user), item_index.get(item)
        if u is None or i is None:
            skipped += 1
            continue
        preds.append(predictor.predict(u, i))
        truths.append(rating)
        if rating >= threshold:
            positives[u].add(i)
    if skipped:
        logger.warning("%d test pair(s) with unknown ids were skipped", skipped)

    rows = []
    if positives:
        for k in ks:
            recommendations = {u: predictor.recommend(u, k) for u in positives}
            precision, recall = topn_metrics(recommendations, positives, k)
            rows.append(TopNRow(k=k, precision=precision, recall=recall, users=len(positives)))
    return MetricReport(
        rmse=rmse(preds, truths),
        mae=mae(preds, truths),
        pairs=len(preds),
        skipped=skipped,
        topn=rows,
    )


def render_table(report: MetricReport) -> str:
    lines = [
        f"{'metric':<12}{'value':>12}",
        f"{'rmse':<12}{report.rmse:>12.6f}",
        f"{'mae':<12}{report.mae:>12.6f}",
        f"{'pairs':<12}{report.pairs:>12d}",
    ]
    if report.skipped:
        lines.append(f"{'skipped':<12}{report.skipped:>12d}")
    if report.topn:
        lines.append("")
        lines.append(f"{'k':>4}{'precision':>12}{'recall':>12}{'users':>8}")
        for row in report.topn:
            lines.append(f"{row.k:>4d}{row.precision:>12.6f}{row.recall:>12.6f}{row.users:>8d}")
    return "\n".join(lines)


def render_json(report: MetricReport) -> str:
    return report.model_dump_json(indent=2)


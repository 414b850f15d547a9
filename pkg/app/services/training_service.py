"""Turns a RunConfig into a trained predictor for any algorithm."""

import logging
from enum import Enum
from typing import Optional, Type, TypeVar

from app.config import RunConfig, settings
from app.exceptions import ArgumentError
from app.models.constants import (
    Algorithm,
    FeedbackKind,
    FunkStrategy,
    ImputeStrategy,
    LossKind,
    OptimizerKind,
    SimilarityMode,
    UpdateOrder,
)
from app.models.factor_model import RankRule, TrainConfig, TrainingResult
from app.models.fm_model import EncoderSpec, FmTrainConfig
from app.models.rating_model import CsvSchema, RatingDataset
from app.services import (
    fm_service,
    funk_service,
    itemcf_service,
    ratings_service,
    svd_cf_service,
    svdpp_service,
)
from app.services.base import BasePredictor

logger = logging.getLogger(__name__)

E = TypeVar("E", bound=Enum)

IMPLICIT_ALGORITHMS = (Algorithm.ITEMCF, Algorithm.FM, Algorithm.FFM)


def choice(enum: Type[E], value: str, key: str) -> E:
    try:
        return enum(value)
    except ValueError as e:
        allowed = ", ".join(member.value for member in enum)
        raise ArgumentError(f"--{key.replace('_', '-')} must be one of: {allowed}") from e


def parse_scale(text: Optional[str], feedback: FeedbackKind) -> tuple[float, float]:
    if feedback is FeedbackKind.IMPLICIT:
        return (0.0, 1.0)
    if not text:
        return settings.DEFAULT_RATING_SCALE
    try:
        lo, hi = (float(part) for part in text.split(","))
    except ValueError as e:
        raise ArgumentError(f"--scale expects 'lo,hi', got '{text}'") from e
    if not lo < hi:
        raise ArgumentError("--scale needs lo < hi")
    return lo, hi


def schema_for(config: RunConfig) -> CsvSchema:
    feedback = choice(FeedbackKind, config.feedback, "feedback")
    return CsvSchema(
        has_header=config.header,
        kind=feedback,
        scale=parse_scale(config.scale, feedback),
    )


def seed_of(config: RunConfig) -> int:
    return settings.DEFAULT_SEED if config.seed is None else config.seed


def train_config(config: RunConfig) -> TrainConfig:
    return TrainConfig(
        f=config.factors,
        alpha=config.alpha,
        reg=config.reg,
        epochs=config.epochs,
        seed=seed_of(config),
        optimizer=choice(OptimizerKind, config.optimizer, "optimizer"),
        beta1=config.beta1,
        beta2=config.beta2,
        epsilon=config.epsilon,
        update_order=choice(UpdateOrder, config.update_order, "update_order"),
        strategy=choice(FunkStrategy, config.strategy, "strategy"),
    )


def fm_train_config(config: RunConfig, feedback: FeedbackKind) -> FmTrainConfig:
    default_loss = LossKind.LOGISTIC if feedback is FeedbackKind.IMPLICIT else LossKind.SQUARED
    return FmTrainConfig(
        k=config.factors,
        alpha=config.alpha,
        reg=config.reg,
        epochs=config.epochs,
        seed=seed_of(config),
        loss=choice(LossKind, config.loss, "loss") if config.loss else default_loss,
        optimizer=choice(OptimizerKind, config.optimizer, "optimizer"),
        beta1=config.beta1,
        beta2=config.beta2,
        epsilon=config.epsilon,
    )


class TrainingService:
    """Trains the algorithm named by ``config.algo`` on a rating dataset."""

    def __init__(self, config: RunConfig):
        self.config = config
        if config.algo is None:
            raise ArgumentError("--algo is required")
        self.algorithm = choice(Algorithm, config.algo, "algo")
        if self.algorithm is Algorithm.ENSEMBLE:
            raise ArgumentError("use the ensemble command to build ensembles")

    def train(self, ds: RatingDataset) -> tuple[BasePredictor, Optional[TrainingResult]]:
        algorithm, config = self.algorithm, self.config
        context = (ds.users, ds.items, ds.scale)
        if ds.kind is FeedbackKind.IMPLICIT and algorithm not in IMPLICIT_ALGORITHMS:
            raise ArgumentError(
                f"{algorithm.value} needs explicit ratings; implicit feedback "
                "works with itemcf, fm and ffm"
            )
        logger.info("training %s on %d ratings", algorithm.value, len(ds))

        if algorithm is Algorithm.SVD:
            model = svd_cf_service.fit(
                ds,
                impute=choice(ImputeStrategy, config.impute, "impute"),
                rank_rule=RankRule.parse(config.rank_rule),
                similarity_mode=choice(SimilarityMode, config.similarity_mode, "similarity_mode"),
                neighborhood=config.neighborhood,
            )
            return svd_cf_service.SvdCfPredictor(model, *context), None
        if algorithm is Algorithm.FUNK:
            result = funk_service.funk_train(ds, train_config(config))
            return funk_service.FunkPredictor(result.model, *context), result
        if algorithm is Algorithm.SVDPP:
            result = svdpp_service.svdpp_train(ds, train_config(config))
            return svdpp_service.SvdppPredictor(result.model, *context), result
        if algorithm is Algorithm.ITEMCF:
            positives = ds
            if ds.kind is FeedbackKind.IMPLICIT:
                positives = ds.with_triples([t for t in ds.triples if t[2] == 1.0])
            model = itemcf_service.itemcf_similarity(positives, K=config.neighborhood or 20)
            return itemcf_service.ItemCfPredictor(model, *context, seen=ds.user_items()), None
        return self._train_fm(ds)

    def _train_fm(self, ds: RatingDataset) -> tuple[BasePredictor, TrainingResult]:
        config = self.config
        fm_config = fm_train_config(config, ds.kind)
        sample_source = ds
        if ds.kind is FeedbackKind.IMPLICIT:
            sample_source = ratings_service.negative_sample(ds, config.neg_ratio, seed_of(config))
        seen = sample_source.user_items()
        spec = EncoderSpec.for_ratings(ds)
        encoder = fm_service.FeatureEncoder(spec)
        samples = fm_service.rating_samples(sample_source, encoder)
        if self.algorithm is Algorithm.FFM:
            result = fm_service.ffm_train(samples, fm_config, n_fields=spec.n_fields)
        else:
            result = fm_service.fm_train(samples, fm_config)
        predictor = fm_service.FmPredictor(
            result.model, spec, ds.users, ds.items, ds.scale, seen=seen, loss=fm_config.loss
        )
        return predictor, result

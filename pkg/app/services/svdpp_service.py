"""SVD++: biased latent factors plus implicit feedback from N(u).

    r_ui = mu + b_u + b_i + q_i . (p_u + |N(u)|^-1/2 * sum_{j in N(u)} y_j)

The implicit term is 0 when N(u) is empty. mu stays fixed at the training
mean; b_u, b_i, P, Q and Y are learned by per-sample SGD with every gradient
taken at the pre-update values.
"""

import logging
from typing import Optional, Sequence

import numpy as np

from app.exceptions import DivergenceError, GradientError, InputError
from app.models.constants import FactorKind, FeedbackKind
from app.models.factor_model import FactorModel, Prediction, TrainConfig, TrainingResult
from app.models.rating_model import RatingDataset, Triple
from app.services.base import BasePredictor, ITrainer
from app.services.funk_service import check_pair, init_factors
from app.services.optim_service import FrameworkOptimizer

logger = logging.getLogger(__name__)

PARAMS = ("b_u", "b_i", "P", "Q", "Y")


def _implicit_sum(model: FactorModel, u: int) -> tuple[np.ndarray, float]:
    """(|N(u)|^-1/2 * sum of y_j, the scale |N(u)|^-1/2); zeros for empty N(u)."""
    rated = model.rated[u]
    if not rated:
        return np.zeros(model.f), 0.0
    scale = 1.0 / np.sqrt(len(rated))
    return scale * model.Y[:, rated].sum(axis=1), scale


def svdpp_implicit_predict(model: FactorModel, u: int, i: int) -> float:
    """The implicit-only score with x tied to q."""
    check_pair(model, u, i)
    z, _ = _implicit_sum(model, u)
    return float(np.dot(model.Q[:, i], z))


def svdpp_predict_detailed(model: FactorModel, u: int, i: int) -> Prediction:
    known_user = 0 <= u < model.n_users
    known_item = 0 <= i < model.n_items
    if not (known_user and known_item):
        value = model.mu
        if known_user:
            value += float(model.b_u[u])
        if known_item:
            value += float(model.b_i[i])
        logger.info("cold start for user %d item %d", u, i)
        return Prediction(value=value, fallback=True, reason="cold start")
    z, _ = _implicit_sum(model, u)
    value = (
        model.mu
        + float(model.b_u[u])
        + float(model.b_i[i])
        + float(np.dot(model.Q[:, i], model.P[:, u] + z))
    )
    return Prediction(value=value)


def svdpp_predict(model: FactorModel, u: int, i: int) -> float:
    return svdpp_predict_detailed(model, u, i).value


def svdpp_sample_gradient(
    model: FactorModel, u: int, i: int, r: float, reg: float
) -> dict[str, np.ndarray]:
    """Half-gradient of one pair's loss term; ``Y`` covers the columns of N(u)."""
    z, scale = _implicit_sum(model, u)
    p, q = model.P[:, u], model.Q[:, i]
    err = r - (model.mu + model.b_u[u] + model.b_i[i] + np.dot(q, p + z))
    Y_rated = model.Y[:, model.rated[u]]
    return {
        "b_u": -(err - reg * model.b_u[u]),
        "b_i": -(err - reg * model.b_i[i]),
        "P": -(err * q - reg * p),
        "Q": -(err * (p + z) - reg * q),
        "Y": -(err * scale * q[:, None] - reg * Y_rated),
    }


def svdpp_loss(model: FactorModel, triples: Sequence[Triple], reg: float) -> float:
    total = 0.0
    for u, i, r in triples:
        err = r - svdpp_predict(model, u, i)
        rated = model.rated[u]
        penalty = (
            model.b_u[u] ** 2
            + model.b_i[i] ** 2
            + np.sum(model.P[:, u] ** 2)
            + np.sum(model.Q[:, i] ** 2)
            + np.sum(model.Y[:, rated] ** 2)
        )
        total += err * err + reg * penalty
    return float(total)


def svdpp_loss_gradient(
    model: FactorModel, triples: Sequence[Triple], reg: float
) -> dict[str, np.ndarray]:
    """Exact gradient of ``svdpp_loss``: twice the summed sample half-gradients."""
    grads = {name: np.zeros_like(getattr(model, name)) for name in PARAMS}
    for u, i, r in triples:
        sample = svdpp_sample_gradient(model, u, i, r, reg)
        grads["b_u"][u] += 2.0 * sample["b_u"]
        grads["b_i"][i] += 2.0 * sample["b_i"]
        grads["P"][:, u] += 2.0 * sample["P"]
        grads["Q"][:, i] += 2.0 * sample["Q"]
        grads["Y"][:, model.rated[u]] += 2.0 * sample["Y"]
    return grads


def training_rmse(model: FactorModel, triples: Sequence[Triple]) -> float:
    if not triples:
        return 0.0
    errors = [r - svdpp_predict(model, u, i) for u, i, r in triples]
    return float(np.sqrt(np.mean(np.square(errors))))


class SvdppTrainer(ITrainer):
    def __init__(
        self,
        optimizer: FrameworkOptimizer | None = None,
        implicit: Optional[RatingDataset] = None,
    ):
        self.optimizer = optimizer
        self.implicit = implicit

    def init_model(self, ds: RatingDataset, config: TrainConfig) -> FactorModel:
        """Biases at 0, P, Q and Y uniform(0, 1) / sqrt(f); Y stays 0 when frozen."""
        rng = np.random.default_rng(config.seed)
        P, Q = init_factors(ds.n_users, ds.n_items, config.f, rng)
        if config.freeze_implicit:
            Y = np.zeros((config.f, ds.n_items))
        else:
            Y = rng.random((config.f, ds.n_items)) / np.sqrt(config.f)
        source = self.implicit or ds
        if not source.same_index_space(ds):
            raise InputError("implicit feedback must share the training id space")
        rated = source.user_items()
        return FactorModel(
            kind=FactorKind.SVDPP,
            P=P,
            Q=Q,
            Y=Y,
            mu=ds.mean_rating(),
            b_u=np.zeros(ds.n_users),
            b_i=np.zeros(ds.n_items),
            rated=[rated.get(u, []) for u in range(ds.n_users)],
        )

    def train(self, ds: RatingDataset, config: TrainConfig) -> TrainingResult:
        if ds.kind is not FeedbackKind.EXPLICIT:
            raise InputError("SVD++ needs explicit ratings")
        model = self.init_model(ds, config)
        optimizer = self.optimizer or FrameworkOptimizer(config.optimizer_config())
        state = optimizer.init_state({name: getattr(model, name) for name in PARAMS})
        result = TrainingResult(model=model)

        with np.errstate(over="ignore", invalid="ignore"):
            for epoch in range(1, config.epochs + 1):
                try:
                    self.run_epoch(ds.triples, config, model, optimizer, state)
                except GradientError as e:
                    raise DivergenceError(epoch) from e
                loss = svdpp_loss(model, ds.triples, config.reg)
                rmse = training_rmse(model, ds.triples)
                if not (np.isfinite(loss) and np.isfinite(rmse)):
                    raise DivergenceError(epoch)
                result.loss_trace.append(loss)
                result.rmse_trace.append(rmse)
                logger.info("epoch=%d loss=%.6f rmse=%.6f", epoch, loss, rmse)
        return result

    @staticmethod
    def run_epoch(triples, config, model, optimizer, state) -> None:
        for u, i, r in triples:
            grads = svdpp_sample_gradient(model, u, i, r, config.reg)
            optimizer.step_at(state, "b_u", model.b_u, grads["b_u"], u)
            optimizer.step_at(state, "b_i", model.b_i, grads["b_i"], i)
            optimizer.step_at(state, "P", model.P, grads["P"], (slice(None), u))
            optimizer.step_at(state, "Q", model.Q, grads["Q"], (slice(None), i))
            if not config.freeze_implicit and model.rated[u]:
                optimizer.step_at(
                    state, "Y", model.Y, grads["Y"], (slice(None), model.rated[u])
                )
            optimizer.advance(state)


def svdpp_train(
    ds: RatingDataset,
    config: TrainConfig,
    optimizer: FrameworkOptimizer | None = None,
    implicit: Optional[RatingDataset] = None,
) -> TrainingResult:
    return SvdppTrainer(optimizer, implicit).train(ds, config)


class SvdppPredictor(BasePredictor):
    def __init__(self, model: FactorModel, users, items, scale):
        super().__init__(users, items, scale, dict(enumerate(model.rated)))
        self.model = model

    def predict(self, u: int, i: int) -> float:
        return svdpp_predict(self.model, u, i)

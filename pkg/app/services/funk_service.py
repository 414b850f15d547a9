"""Funk-SVD: R is approximated by P^T Q, learned by SGD with L2 regularization.

The loss sums the regularizer once per training pair:

    C(p, q) = sum_(u,i) (r_ui - p_u . q_i)^2 + reg * (|p_u|^2 + |q_i|^2)

Updates follow the half-gradient convention, so with plain SGD one step is

    p_uk <- p_uk + alpha * (q_ik * err_ui - reg * p_uk)
    q_ik <- q_ik + alpha * (p_uk * err_ui - reg * q_ik)
"""

import logging
from typing import Sequence

import numpy as np

from app.exceptions import DivergenceError, GradientError, InputError, RangeError
from app.models.constants import FactorKind, FeedbackKind, FunkStrategy, UpdateOrder
from app.models.factor_model import FactorModel, TrainConfig, TrainingResult
from app.models.rating_model import RatingDataset, Triple
from app.services.base import BasePredictor, ITrainer
from app.services.optim_service import FrameworkOptimizer

logger = logging.getLogger(__name__)


def triple_arrays(triples: Sequence[Triple]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not triples:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int), np.zeros(0)
    us, items, ratings = zip(*triples)
    return np.array(us, dtype=int), np.array(items, dtype=int), np.array(ratings, dtype=float)


def init_factors(
    n_users: int, n_items: int, f: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """P (f x m) then Q (f x n), entries uniform(0, 1) / sqrt(f)."""
    P = rng.random((f, n_users)) / np.sqrt(f)
    Q = rng.random((f, n_items)) / np.sqrt(f)
    return P, Q


def check_pair(model: FactorModel, u: int, i: int) -> None:
    if not 0 <= u < model.n_users:
        raise RangeError(f"user index {u} out of range [0, {model.n_users})")
    if not 0 <= i < model.n_items:
        raise RangeError(f"item index {i} out of range [0, {model.n_items})")


def funk_predict(model: FactorModel, u: int, i: int) -> float:
    check_pair(model, u, i)
    return float(np.dot(model.P[:, u], model.Q[:, i]))


def funk_loss(model: FactorModel, triples: Sequence[Triple], reg: float) -> float:
    us, items, ratings = triple_arrays(triples)
    Pu, Qi = model.P[:, us], model.Q[:, items]
    err = ratings - np.einsum("ku,ku->u", Pu, Qi)
    return float(np.sum(err * err) + reg * (np.sum(Pu * Pu) + np.sum(Qi * Qi)))


def funk_loss_gradient(
    model: FactorModel, triples: Sequence[Triple], reg: float
) -> tuple[np.ndarray, np.ndarray]:
    """Exact gradient of ``funk_loss`` with respect to (P, Q)."""
    grad_P = np.zeros_like(model.P)
    grad_Q = np.zeros_like(model.Q)
    for u, i, r in triples:
        p, q = model.P[:, u], model.Q[:, i]
        err = r - float(np.dot(p, q))
        grad_P[:, u] += -2.0 * err * q + 2.0 * reg * p
        grad_Q[:, i] += -2.0 * err * p + 2.0 * reg * q
    return grad_P, grad_Q


def training_rmse(model: FactorModel, triples: Sequence[Triple]) -> float:
    us, items, ratings = triple_arrays(triples)
    if us.size == 0:
        return 0.0
    err = ratings - np.einsum("ku,ku->u", model.P[:, us], model.Q[:, items])
    return float(np.sqrt(np.mean(err * err)))


class FunkTrainer(ITrainer):
    """Trains Funk-SVD over the dataset's triples in dataset order.

    Every parameter change goes through the optimizer, so the ``sgd``
    instantiation is plain SGD and the others swap in momentum or adaptive
    steps without touching the loop.
    """

    def __init__(self, optimizer: FrameworkOptimizer | None = None):
        self.optimizer = optimizer

    def train(self, ds: RatingDataset, config: TrainConfig) -> TrainingResult:
        if ds.kind is not FeedbackKind.EXPLICIT:
            raise InputError("Funk-SVD needs explicit ratings")
        rng = np.random.default_rng(config.seed)
        P, Q = init_factors(ds.n_users, ds.n_items, config.f, rng)
        rated = ds.user_items()
        model = FactorModel(
            kind=FactorKind.FUNK,
            P=P,
            Q=Q,
            rated=[rated.get(u, []) for u in range(ds.n_users)],
        )
        optimizer = self.optimizer or FrameworkOptimizer(config.optimizer_config())
        state = optimizer.init_state({"P": model.P, "Q": model.Q})
        result = TrainingResult(model=model)

        with np.errstate(over="ignore", invalid="ignore"):
            if config.strategy is FunkStrategy.FEATURE_WISE:
                self._train_feature_wise(ds, config, model, optimizer, state, result)
            else:
                for epoch in range(1, config.epochs + 1):
                    try:
                        self.run_epoch(ds.triples, config, model, optimizer, state)
                    except GradientError as e:
                        raise DivergenceError(epoch) from e
                    self._record(epoch, ds.triples, config, model, result)
        return result

    @staticmethod
    def run_epoch(triples, config, model, optimizer, state) -> None:
        P, Q, reg = model.P, model.Q, config.reg
        sequential = config.update_order is UpdateOrder.SEQUENTIAL
        for u, i, r in triples:
            err = r - np.dot(P[:, u], Q[:, i])
            grad_p = -(Q[:, i] * err - reg * P[:, u])
            if sequential:
                optimizer.step_at(state, "P", P, grad_p, (slice(None), u))
                grad_q = -(P[:, u] * err - reg * Q[:, i])
            else:
                grad_q = -(P[:, u] * err - reg * Q[:, i])
                optimizer.step_at(state, "P", P, grad_p, (slice(None), u))
            optimizer.step_at(state, "Q", Q, grad_q, (slice(None), i))
            optimizer.advance(state)

    def _train_feature_wise(self, ds, config, model, optimizer, state, result) -> None:
        """One feature at a time against cached residuals of all other features."""
        P, Q, reg = model.P, model.Q, config.reg
        us, items, ratings = triple_arrays(ds.triples)
        epoch_no = 0
        for k in range(config.f):
            others = np.einsum("ku,ku->u", P[:, us], Q[:, items]) - P[k, us] * Q[k, items]
            for _ in range(config.epochs):
                epoch_no += 1
                try:
                    for t, (u, i, r) in enumerate(ds.triples):
                        err = r - (others[t] + P[k, u] * Q[k, i])
                        optimizer.step_at(state, "P", P, -(Q[k, i] * err - reg * P[k, u]), (k, u))
                        optimizer.step_at(state, "Q", Q, -(P[k, u] * err - reg * Q[k, i]), (k, i))
                        optimizer.advance(state)
                except GradientError as e:
                    raise DivergenceError(epoch_no) from e
                self._record(epoch_no, ds.triples, config, model, result)
            logger.debug("feature %d trained", k)

    @staticmethod
    def _record(epoch, triples, config, model, result) -> None:
        loss = funk_loss(model, triples, config.reg)
        rmse = training_rmse(model, triples)
        if not (np.isfinite(loss) and np.isfinite(rmse)):
            raise DivergenceError(epoch)
        result.loss_trace.append(loss)
        result.rmse_trace.append(rmse)
        logger.info("epoch=%d loss=%.6f rmse=%.6f", epoch, loss, rmse)


def funk_train(
    ds: RatingDataset, config: TrainConfig, optimizer: FrameworkOptimizer | None = None
) -> TrainingResult:
    return FunkTrainer(optimizer).train(ds, config)


class FunkPredictor(BasePredictor):
    def __init__(self, model: FactorModel, users, items, scale):
        super().__init__(users, items, scale, dict(enumerate(model.rated)))
        self.model = model

    def predict(self, u: int, i: int) -> float:
        return funk_predict(self.model, u, i)

"""Factorization machines (2-way) and field-aware factorization machines.

    y(x) = w0 + sum_i w_i x_i + sum_{i<j} <v_i, v_j> x_i x_j

The pairwise term is evaluated in O(k z) for z nonzeros through

    1/2 * sum_f ((sum_i v_if x_i)^2 - sum_i v_if^2 x_i^2)

FFM replaces <v_i, v_j> by <v_{i, field(j)}, v_{j, field(i)}>, which has no such
identity and costs O(z^2 k). Training chains the loss derivative with the
model gradient through the shared optimizer.
"""

import logging
import math
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from app.exceptions import (
    DivergenceError,
    EmptyDatasetError,
    EncodingError,
    GradientError,
    InputError,
    ShapeError,
)
from app.models.constants import ColumnKind, LossKind
from app.models.fm_model import (
    EncoderSpec,
    FeatureVector,
    FfmModel,
    FmGradient,
    FmModel,
    FmTrainConfig,
)
from app.models.factor_model import TrainingResult
from app.models.rating_model import RatingDataset
from app.services.base import BasePredictor
from app.services.optim_service import FrameworkOptimizer

logger = logging.getLogger(__name__)

Sample = tuple[FeatureVector, float]


def as_features(x: Any) -> FeatureVector:
    return x if isinstance(x, FeatureVector) else FeatureVector.from_dense(x)


def _active(model: FmModel | FfmModel, x: Any) -> tuple[FeatureVector, np.ndarray, np.ndarray]:
    x = as_features(x)
    if x.n != model.n:
        raise ShapeError(f"feature vector has dimension {x.n}, model expects {model.n}")
    return x, np.asarray(x.indices, dtype=int), np.asarray(x.values, dtype=np.float64)


# --- FM ---
def fm_predict_naive(model: FmModel, x: Any) -> float:
    """Reference evaluator: explicit loop over every feature pair."""
    x, idx, vals = _active(model, x)
    total = model.w0
    for a in range(len(idx)):
        total += model.w[idx[a]] * vals[a]
    for a in range(len(idx)):
        for b in range(a + 1, len(idx)):
            total += float(np.dot(model.V[idx[a]], model.V[idx[b]])) * vals[a] * vals[b]
    return float(total)


def fm_predict_fast(model: FmModel, x: Any) -> float:
    x, idx, vals = _active(model, x)
    if idx.size == 0:
        return float(model.w0)
    Vx = model.V[idx] * vals[:, None]
    sums = Vx.sum(axis=0)
    pairs = 0.5 * float(np.dot(sums, sums) - np.sum(Vx * Vx))
    return float(model.w0 + np.dot(model.w[idx], vals) + pairs)


def fm_gradient(model: FmModel, x: Any) -> FmGradient:
    """dy/dw0 = 1, dy/dw_i = x_i, dy/dv_if = x_i sum_j v_jf x_j - v_if x_i^2."""
    x, idx, vals = _active(model, x)
    V = model.V[idx]
    sums = (V * vals[:, None]).sum(axis=0)
    grad_V = vals[:, None] * sums[None, :] - V * (vals * vals)[:, None]
    return FmGradient(w0=1.0, indices=idx, w=vals.copy(), V=grad_V)


# --- FFM ---
def _fields(model: FfmModel, x: FeatureVector) -> list[int]:
    if x.fields is None and x.indices:
        raise EncodingError("FFM input needs a field id for every active feature")
    fields = list(x.fields or [])
    for field in fields:
        if not 0 <= field < model.n_fields:
            raise EncodingError(f"field id {field} outside [0, {model.n_fields})")
    return fields


def ffm_predict(model: FfmModel, x: Any) -> float:
    x, idx, vals = _active(model, x)
    fields = _fields(model, x)
    total = model.w0 + float(np.dot(model.w[idx], vals))
    for a in range(len(idx)):
        for b in range(a + 1, len(idx)):
            latent = float(np.dot(model.V[idx[a], fields[b]], model.V[idx[b], fields[a]]))
            total += latent * vals[a] * vals[b]
    return float(total)


def ffm_gradient(model: FfmModel, x: Any) -> FmGradient:
    """dy/dv_{j1, f2} = sum over j2 != j1 in field f2 of v_{j2, f1} x_j1 x_j2."""
    x, idx, vals = _active(model, x)
    fields = _fields(model, x)
    grad_V = np.zeros((len(idx), model.n_fields, model.k))
    for a in range(len(idx)):
        for b in range(len(idx)):
            if a != b:
                grad_V[a, fields[b]] += model.V[idx[b], fields[a]] * vals[a] * vals[b]
    return FmGradient(w0=1.0, indices=idx, w=vals.copy(), V=grad_V)


# --- losses ---
def sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def loss_derivative(y_hat: float, target: float, loss: LossKind) -> float:
    """d loss / d y_hat; squared loss is taken as 1/2 (y_hat - y)^2."""
    if loss is LossKind.LOGISTIC:
        return sigmoid(y_hat) - target
    return y_hat - target


def sample_loss(y_hat: float, target: float, loss: LossKind) -> float:
    if loss is LossKind.LOGISTIC:
        # log(1 + e^-z) for y = 1, log(1 + e^z) for y = 0
        z = y_hat if target == 1.0 else -y_hat
        return max(-z, 0.0) + math.log1p(math.exp(-abs(z)))
    return (y_hat - target) ** 2


def fm_loss(
    model: FmModel | FfmModel, samples: Sequence[Sample], loss: LossKind = LossKind.SQUARED
) -> float:
    """Mean squared error or mean log-loss over the samples."""
    if not samples:
        raise EmptyDatasetError("no samples")
    predict = ffm_predict if isinstance(model, FfmModel) else fm_predict_fast
    return math.fsum(sample_loss(predict(model, x), y, loss) for x, y in samples) / len(samples)


# --- training ---
def _check_samples(samples: Sequence[Sample], loss: LossKind) -> int:
    if not samples:
        raise EmptyDatasetError("no training samples")
    n = samples[0][0].n
    for x, y in samples:
        if x.n != n:
            raise ShapeError(f"mixed feature dimensions {x.n} and {n}")
        if loss is LossKind.LOGISTIC and y not in (0.0, 1.0):
            raise InputError(f"logistic loss needs 0/1 targets, got {y:g}")
    return n


def init_fm(n: int, config: FmTrainConfig) -> FmModel:
    """w0 = 0, w = 0, V ~ uniform(0, 1/sqrt(k))."""
    rng = np.random.default_rng(config.seed)
    V = rng.uniform(0.0, 1.0 / np.sqrt(config.k), size=(n, config.k))
    return FmModel(w0=0.0, w=np.zeros(n), V=V)


def init_ffm(n: int, n_fields: int, config: FmTrainConfig) -> FfmModel:
    rng = np.random.default_rng(config.seed)
    V = rng.uniform(0.0, 1.0 / np.sqrt(config.k), size=(n, n_fields, config.k))
    return FfmModel(w0=0.0, w=np.zeros(n), V=V)


def _sgd(model, samples, config, optimizer, predict, gradient) -> TrainingResult:
    optimizer = optimizer or FrameworkOptimizer(config.optimizer_config())
    w0 = np.array([model.w0])
    state = optimizer.init_state({"w0": w0, "w": model.w, "V": model.V})
    result = TrainingResult(model=model)
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, config.epochs + 1):
            try:
                for x, y in samples:
                    model.w0 = float(w0[0])
                    g = loss_derivative(predict(model, x), y, config.loss)
                    grad = gradient(model, x)
                    idx = grad.indices
                    reg_V = model.V[idx] * config.reg
                    optimizer.step_at(state, "w0", w0, g * grad.w0, 0)
                    optimizer.step_at(state, "w", model.w, g * grad.w + config.reg * model.w[idx], idx)
                    optimizer.step_at(state, "V", model.V, g * grad.V + reg_V, idx)
                    optimizer.advance(state)
            except (GradientError, OverflowError) as e:
                raise DivergenceError(epoch) from e
            model.w0 = float(w0[0])
            loss = fm_loss(model, samples, config.loss)
            if not math.isfinite(loss):
                raise DivergenceError(epoch)
            result.loss_trace.append(loss)
            logger.info("epoch=%d loss=%.6f", epoch, loss)
    return result


def fm_train(
    samples: Sequence[Sample],
    config: FmTrainConfig,
    optimizer: FrameworkOptimizer | None = None,
    model: FmModel | None = None,
) -> TrainingResult:
    n = _check_samples(samples, config.loss)
    model = model or init_fm(n, config)
    return _sgd(model, samples, config, optimizer, fm_predict_fast, fm_gradient)


def ffm_train(
    samples: Sequence[Sample],
    config: FmTrainConfig,
    optimizer: FrameworkOptimizer | None = None,
    model: FfmModel | None = None,
    n_fields: Optional[int] = None,
) -> TrainingResult:
    n = _check_samples(samples, config.loss)
    if model is None:
        fields = [f for x, _ in samples for f in (x.fields or [])]
        model = init_ffm(n, n_fields or (max(fields) + 1 if fields else 1), config)
    return _sgd(model, samples, config, optimizer, ffm_predict, ffm_gradient)


# --- encoding ---
class FeatureEncoder:
    """Maps raw records to feature vectors under an ``EncoderSpec``."""

    def __init__(self, spec: EncoderSpec):
        self.spec = spec
        self._lookup = [
            {category: pos for pos, category in enumerate(column.categories)}
            for column in spec.columns
        ]

    def encode(self, record: Mapping[str, Any]) -> FeatureVector:
        indices, values, fields = [], [], []
        for field, (offset, column) in enumerate(zip(self.spec.offsets, self.spec.columns)):
            if column.name not in record:
                raise EncodingError(f"record has no '{column.name}' column")
            raw = record[column.name]
            if column.kind is ColumnKind.CATEGORICAL:
                # unseen categories share the block's last slot
                pos = self._lookup[field].get(str(raw), len(column.categories))
                indices.append(offset + pos)
                values.append(1.0)
                fields.append(field)
            else:
                try:
                    value = float(raw)
                except (TypeError, ValueError) as e:
                    raise EncodingError(f"column '{column.name}': not a number: {raw!r}") from e
                if value != 0.0:
                    indices.append(offset)
                    values.append(value)
                    fields.append(field)
        return FeatureVector(
            n=self.spec.dimension, indices=indices, values=values, fields=fields
        )


def encode(record: Mapping[str, Any], spec: EncoderSpec) -> FeatureVector:
    return FeatureEncoder(spec).encode(record)


def rating_samples(ds: RatingDataset, encoder: FeatureEncoder) -> list[Sample]:
    return [
        (encoder.encode({"user": user, "item": item}), rating)
        for user, item, rating in ds.raw_triples()
    ]


class FmPredictor(BasePredictor):
    """Scores (user, item) pairs of a rating dataset through the encoder.

    Logistic models report the click probability.
    """

    def __init__(
        self,
        model: FmModel | FfmModel,
        spec: EncoderSpec,
        users,
        items,
        scale,
        seen=None,
        loss: LossKind = LossKind.SQUARED,
    ):
        super().__init__(users, items, scale, seen)
        self.model = model
        self.spec = spec
        self.encoder = FeatureEncoder(spec)
        self.loss = loss

    def predict(self, u: int, i: int) -> float:
        x = self.encoder.encode({"user": self.users[u], "item": self.items[i]})
        if isinstance(self.model, FfmModel):
            y_hat = ffm_predict(self.model, x)
        else:
            y_hat = fm_predict_fast(self.model, x)
        return sigmoid(y_hat) if self.loss is LossKind.LOGISTIC else y_hat

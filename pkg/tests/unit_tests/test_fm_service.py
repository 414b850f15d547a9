import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.exceptions import EmptyDatasetError, EncodingError, InputError, ShapeError
from app.models.constants import ColumnKind, LossKind
from app.models.fm_model import (
    ColumnSpec,
    EncoderSpec,
    FeatureVector,
    FfmModel,
    FmModel,
    FmTrainConfig,
)
from app.models.factor_model import TrainConfig
from app.services import fm_service, funk_service
from app.services.fm_service import FeatureEncoder, FmPredictor

from tests.unit_tests.conftest import low_rank_dataset, numeric_gradient, relative_error


@pytest.fixture
def rng():
    return np.random.default_rng(12)


@pytest.fixture
def fm_model(rng):
    """Six features, k = 3."""
    return FmModel(w0=0.3, w=rng.normal(size=6), V=rng.normal(size=(6, 3)))


@pytest.fixture
def ffm_model(rng):
    """Six features in three fields, k = 2."""
    return FfmModel(w0=-0.2, w=rng.normal(size=6), V=rng.normal(size=(6, 3, 2)))


@pytest.fixture
def x():
    return FeatureVector(n=6, indices=[0, 2, 3, 5], values=[1.0, 0.5, -2.0, 1.5], fields=[0, 1, 1, 2])


class TestFeatureVector:
    def test_from_dense(self):
        x = FeatureVector.from_dense([0.0, 2.0, 0.0, -1.0], fields=[0, 0, 1, 1])
        assert x.indices == [1, 3]
        assert x.values == [2.0, -1.0]
        assert x.fields == [0, 1]
        np.testing.assert_array_equal(x.to_dense(), [0.0, 2.0, 0.0, -1.0])

    @pytest.mark.parametrize(
        "entries",
        [
            {"indices": [2, 1], "values": [1.0, 1.0]},
            {"indices": [0, 6], "values": [1.0, 1.0]},
            {"indices": [0], "values": [math.inf]},
            {"indices": [0, 1], "values": [1.0]},
            {"indices": [0], "values": [1.0], "fields": [0, 1]},
        ],
    )
    def test_validation(self, entries):
        with pytest.raises(ValidationError):
            FeatureVector(n=6, **entries)


def random_fm(seed: int, max_n: int = 64, max_k: int = 8) -> tuple[FmModel, np.ndarray]:
    """An FM with n <= max_n features, k <= max_k factors and a sparse input."""
    rng = np.random.default_rng(seed)
    n, k = int(rng.integers(1, max_n + 1)), int(rng.integers(1, max_k + 1))
    model = FmModel(w0=float(rng.normal()), w=rng.normal(size=n), V=rng.normal(size=(n, k)))
    dense = rng.normal(size=n) * (rng.random(n) < rng.uniform(0.1, 1.0))
    return model, dense


class TestFm:
    @pytest.mark.parametrize("seed", range(1000))
    def test_fast_matches_naive(self, seed):
        model, dense = random_fm(seed)
        naive = fm_service.fm_predict_naive(model, dense)
        assert fm_service.fm_predict_fast(model, dense) == pytest.approx(naive, rel=1e-10, abs=1e-10)

    def test_empty_input_is_bias(self, fm_model):
        assert fm_service.fm_predict_fast(fm_model, np.zeros(6)) == 0.3
        assert fm_service.fm_predict_naive(fm_model, np.zeros(6)) == 0.3

    def test_dimension_mismatch(self, fm_model):
        with pytest.raises(ShapeError):
            fm_service.fm_predict_fast(fm_model, np.ones(5))

    @pytest.mark.parametrize("seed", range(50))
    def test_gradient_matches_finite_differences(self, seed):
        model, dense = random_fm(seed, max_n=16)
        x = FeatureVector.from_dense(dense)
        grad = fm_service.fm_gradient(model, x)
        analytic = np.zeros_like(model.V)
        analytic[grad.indices] = grad.V

        def predict():
            return fm_service.fm_predict_fast(model, x)

        assert relative_error(analytic, numeric_gradient(predict, model.V, h=1e-5)) <= 1e-6
        dense_w = np.zeros_like(model.w)
        dense_w[grad.indices] = grad.w
        assert relative_error(dense_w, numeric_gradient(predict, model.w, h=1e-5)) <= 1e-6
        assert grad.w0 == 1.0

    def test_linear_in_each_weight(self, fm_model, x):
        """Shifting w0 or one w_i by d moves the prediction by d or d * x_i."""
        base = fm_service.fm_predict_fast(fm_model, x)
        shifted = fm_model.model_copy(update={"w0": fm_model.w0 + 2.0})
        assert fm_service.fm_predict_fast(shifted, x) == pytest.approx(base + 2.0)
        w = fm_model.w.copy()
        w[3] += 0.5
        moved = fm_model.model_copy(update={"w": w})
        assert fm_service.fm_predict_fast(moved, x) == pytest.approx(base + 0.5 * -2.0)


class TestFfm:
    def test_prediction(self, ffm_model, x):
        idx, vals, fields = x.indices, x.values, x.fields
        expected = ffm_model.w0 + sum(ffm_model.w[j] * v for j, v in zip(idx, vals))
        for a in range(4):
            for b in range(a + 1, 4):
                latent = ffm_model.V[idx[a], fields[b]] @ ffm_model.V[idx[b], fields[a]]
                expected += latent * vals[a] * vals[b]
        assert fm_service.ffm_predict(ffm_model, x) == pytest.approx(expected)

    def test_single_field_collapses_to_fm(self, fm_model, rng):
        """With one field FFM is FM with V[j] = V[j, 0]."""
        ffm = FfmModel(w0=fm_model.w0, w=fm_model.w, V=fm_model.V[:, None, :])
        dense = rng.normal(size=6)
        x = FeatureVector.from_dense(dense, fields=[0] * 6)
        assert fm_service.ffm_predict(ffm, x) == pytest.approx(fm_service.fm_predict_fast(fm_model, x))

    @pytest.mark.parametrize("seed", range(50))
    def test_gradient_matches_finite_differences(self, seed):
        """Random six-feature, three-field instances."""
        rng = np.random.default_rng(seed)
        k = int(rng.integers(1, 4))
        model = FfmModel(w0=float(rng.normal()), w=rng.normal(size=6), V=rng.normal(size=(6, 3, k)))
        dense = rng.normal(size=6) * (rng.random(6) < 0.7)
        x = FeatureVector.from_dense(dense, fields=[int(f) for f in rng.integers(0, 3, 6)])
        grad = fm_service.ffm_gradient(model, x)
        analytic = np.zeros_like(model.V)
        analytic[grad.indices] = grad.V

        def predict():
            return fm_service.ffm_predict(model, x)

        assert relative_error(analytic, numeric_gradient(predict, model.V, h=1e-5)) <= 1e-6

    def test_needs_fields(self, ffm_model):
        with pytest.raises(EncodingError):
            fm_service.ffm_predict(ffm_model, FeatureVector(n=6, indices=[1], values=[1.0]))

    def test_field_out_of_range(self, ffm_model):
        x = FeatureVector(n=6, indices=[1], values=[1.0], fields=[3])
        with pytest.raises(EncodingError):
            fm_service.ffm_predict(ffm_model, x)


class TestLosses:
    def test_sigmoid_is_stable(self):
        assert fm_service.sigmoid(1000.0) == 1.0
        assert fm_service.sigmoid(-1000.0) == 0.0
        assert fm_service.sigmoid(0.0) == 0.5

    def test_logistic_loss(self):
        assert fm_service.sample_loss(0.0, 1.0, LossKind.LOGISTIC) == pytest.approx(math.log(2))
        assert fm_service.sample_loss(800.0, 0.0, LossKind.LOGISTIC) == pytest.approx(800.0)
        assert fm_service.loss_derivative(0.0, 1.0, LossKind.LOGISTIC) == -0.5

    def test_squared_loss(self):
        assert fm_service.sample_loss(3.0, 1.0, LossKind.SQUARED) == 4.0
        assert fm_service.loss_derivative(3.0, 1.0, LossKind.SQUARED) == 2.0

    def test_mean_loss_needs_samples(self, fm_model):
        with pytest.raises(EmptyDatasetError):
            fm_service.fm_loss(fm_model, [])


class TestEncoder:
    @pytest.fixture
    def spec(self):
        """Categorical user (2 known), numeric age, categorical genre (1 known)."""
        return EncoderSpec(
            columns=[
                ColumnSpec(name="user", categories=["ann", "bob"]),
                ColumnSpec(name="age", kind=ColumnKind.NUMERIC),
                ColumnSpec(name="genre", categories=["drama"]),
            ]
        )

    def test_layout(self, spec):
        assert spec.offsets == [0, 3, 4]
        assert spec.dimension == 6
        assert spec.n_fields == 3
        assert spec.field_of(4) == 2

    def test_encode(self, spec):
        x = fm_service.encode({"user": "bob", "age": 31, "genre": "drama"}, spec)
        assert x.n == 6
        assert x.indices == [1, 3, 4]
        assert x.values == [1.0, 31.0, 1.0]
        assert x.fields == [0, 1, 2]

    def test_unknown_category_uses_reserved_slot(self, spec):
        x = FeatureEncoder(spec).encode({"user": "cat", "age": 0, "genre": "noir"})
        assert x.indices == [2, 5]
        assert x.fields == [0, 2]

    def test_missing_column(self, spec):
        with pytest.raises(EncodingError):
            fm_service.encode({"user": "ann", "age": 1}, spec)

    def test_bad_numeric(self, spec):
        with pytest.raises(EncodingError):
            fm_service.encode({"user": "ann", "age": "old", "genre": "drama"}, spec)

    def test_rating_samples(self, sparse_ds):
        spec = EncoderSpec.for_ratings(sparse_ds)
        samples = fm_service.rating_samples(sparse_ds, FeatureEncoder(spec))
        assert len(samples) == len(sparse_ds)
        x, y = samples[0]
        assert x.indices == [0, 5]
        assert y == 1.0


class TestTraining:
    @pytest.fixture
    def samples(self, sparse_ds):
        spec = EncoderSpec.for_ratings(sparse_ds)
        return fm_service.rating_samples(sparse_ds, FeatureEncoder(spec))

    def test_fm_reduces_squared_loss(self, samples):
        config = FmTrainConfig(k=2, alpha=0.05, epochs=50, seed=1)
        result = fm_service.fm_train(samples, config)
        assert len(result.loss_trace) == 50
        assert result.loss_trace[-1] < result.loss_trace[0]
        assert result.model.is_finite()

    def test_ffm_reduces_squared_loss(self, samples):
        config = FmTrainConfig(k=2, alpha=0.05, epochs=50, seed=1)
        result = fm_service.ffm_train(samples, config, n_fields=2)
        assert result.model.n_fields == 2
        assert result.loss_trace[-1] < result.loss_trace[0]

    def test_zero_epochs_returns_initial_model(self, samples):
        config = FmTrainConfig(k=2, epochs=0, seed=4)
        result = fm_service.fm_train(samples, config)
        np.testing.assert_array_equal(result.model.V, fm_service.init_fm(samples[0][0].n, config).V)
        assert result.loss_trace == []

    def test_collapsed_fields_follow_fm_trajectory(self, samples):
        """FFM with every feature in one field retraces FM under the same seed."""
        one_field = [
            (x.model_copy(update={"fields": [0] * len(x.indices)}), y) for x, y in samples
        ]
        config = FmTrainConfig(k=2, alpha=0.05, reg=0.01, epochs=5, seed=6)
        fm = fm_service.fm_train(samples, config)
        ffm = fm_service.ffm_train(one_field, config, n_fields=1)
        assert ffm.loss_trace == pytest.approx(fm.loss_trace, rel=1e-9)
        np.testing.assert_allclose(ffm.model.V[:, 0, :], fm.model.V, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(ffm.model.w, fm.model.w, rtol=1e-9, atol=1e-12)

    def test_one_hot_ratings_fit_like_funk(self):
        """User and item one-hots with k = 2 fit the rank-2 fixture as well as Funk-SVD."""
        ds = low_rank_dataset(50, 40, rank=2, density=0.6, seed=42)
        samples = fm_service.rating_samples(ds, FeatureEncoder(EncoderSpec.for_ratings(ds)))
        fm_config = FmTrainConfig(k=2, alpha=0.01, reg=0.02, epochs=200, seed=42)
        fm = fm_service.fm_train(samples, fm_config)
        funk = funk_service.funk_train(ds, TrainConfig(f=2, alpha=0.01, reg=0.02, epochs=200, seed=42))
        assert math.sqrt(fm.loss_trace[-1]) <= funk.rmse_trace[-1] + 0.05

    def test_initialization(self):
        config = FmTrainConfig(k=4, seed=3)
        model = fm_service.init_fm(10, config)
        assert model.w0 == 0.0
        np.testing.assert_array_equal(model.w, 0.0)
        assert np.all((model.V >= 0) & (model.V < 0.5))

    def test_logistic_training(self):
        positives = [(FeatureVector(n=2, indices=[0], values=[1.0]), 1.0)] * 5
        negatives = [(FeatureVector(n=2, indices=[1], values=[1.0]), 0.0)] * 5
        config = FmTrainConfig(k=2, alpha=0.1, epochs=30, loss=LossKind.LOGISTIC)
        model = fm_service.fm_train(positives + negatives, config).model
        assert fm_service.sigmoid(fm_service.fm_predict_fast(model, [1.0, 0.0])) > 0.8
        assert fm_service.sigmoid(fm_service.fm_predict_fast(model, [0.0, 1.0])) < 0.2

    def test_logistic_needs_binary_targets(self, samples):
        with pytest.raises(InputError):
            fm_service.fm_train(samples, FmTrainConfig(loss=LossKind.LOGISTIC))

    def test_mixed_dimensions(self):
        samples = [(FeatureVector(n=2), 1.0), (FeatureVector(n=3), 1.0)]
        with pytest.raises(ShapeError):
            fm_service.fm_train(samples, FmTrainConfig())

    def test_no_samples(self):
        with pytest.raises(EmptyDatasetError):
            fm_service.fm_train([], FmTrainConfig())


class TestFmPredictor:
    def test_scores_user_item_pairs(self, sparse_ds):
        spec = EncoderSpec.for_ratings(sparse_ds)
        model = fm_service.init_fm(spec.dimension, FmTrainConfig(k=2))
        predictor = FmPredictor(model, spec, sparse_ds.users, sparse_ds.items, sparse_ds.scale)
        x = fm_service.encode({"user": "u1", "item": "i2"}, spec)
        assert predictor.predict(1, 2) == pytest.approx(fm_service.fm_predict_fast(model, x))

    def test_logistic_reports_probability(self, sparse_ds):
        spec = EncoderSpec.for_ratings(sparse_ds)
        model = fm_service.init_fm(spec.dimension, FmTrainConfig(k=2))
        predictor = FmPredictor(
            model, spec, sparse_ds.users, sparse_ds.items, sparse_ds.scale, loss=LossKind.LOGISTIC
        )
        x = fm_service.encode({"user": "u0", "item": "i3"}, spec)
        assert predictor.predict(0, 3) == pytest.approx(
            fm_service.sigmoid(fm_service.fm_predict_fast(model, x))
        )

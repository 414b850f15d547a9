import json
from abc import ABC, abstractmethod
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from app.config import settings
from app.exceptions import InputError, ModelFormatError
from app.models.constants import Algorithm, FactorKind, FeedbackKind, LossKind
from app.models.ensemble_model import BlendModel
from app.models.factor_model import FactorModel, ItemCfModel, SvdCfModel
from app.models.fm_model import FfmModel, FmModel
from app.models.model_file import EnsembleBlock, ModelFile, ModelHeader
from app.services.base import BaseDataManager, BasePredictor
from app.services.ensemble_service import EnsemblePredictor
from app.services.fm_service import FmPredictor
from app.services.funk_service import FunkPredictor
from app.services.itemcf_service import ItemCfPredictor
from app.services.svd_cf_service import SvdCfPredictor
from app.services.svdpp_service import SvdppPredictor


def _array(values, ndim: int) -> np.ndarray:
    array = np.asarray(values, dtype=np.float64)
    if array.ndim != ndim:
        raise ModelFormatError(f"expected a {ndim}-D parameter block, got {array.ndim}-D")
    return array


class ModelCodec:
    """Maps predictors to ``ModelFile`` documents and back."""

    def __init__(self, feedback: FeedbackKind = FeedbackKind.EXPLICIT):
        self.feedback = feedback

    def algorithm_of(self, predictor: BasePredictor) -> Algorithm:
        if isinstance(predictor, SvdCfPredictor):
            return Algorithm.SVD
        if isinstance(predictor, FunkPredictor):
            return Algorithm.FUNK
        if isinstance(predictor, SvdppPredictor):
            return Algorithm.SVDPP
        if isinstance(predictor, ItemCfPredictor):
            return Algorithm.ITEMCF
        if isinstance(predictor, FmPredictor):
            return Algorithm.FFM if isinstance(predictor.model, FfmModel) else Algorithm.FM
        if isinstance(predictor, EnsemblePredictor):
            return Algorithm.ENSEMBLE
        raise InputError(f"cannot serialize {type(predictor).__name__}")

    def encode(self, predictor: BasePredictor) -> ModelFile:
        algorithm = self.algorithm_of(predictor)
        header = ModelHeader(
            format_version=settings.MODEL_FORMAT_VERSION,
            algorithm=algorithm,
            created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            rating_scale=predictor.scale,
            feedback=self.feedback,
        )
        document = ModelFile(header=header, users=predictor.users, items=predictor.items)
        model = predictor.model
        if algorithm is Algorithm.SVD:
            document.params = {
                "r_star": model.r_star.tolist(),
                "mask": model.mask.tolist(),
                "f": model.f,
                "similarity_mode": model.similarity_mode.value,
                "neighborhood": model.neighborhood,
                "impute": model.impute.value if model.impute else None,
                "singular_values": model.singular_values,
            }
        elif algorithm in (Algorithm.FUNK, Algorithm.SVDPP):
            document.params = {"P": model.P.tolist(), "Q": model.Q.tolist(), "rated": model.rated}
            if algorithm is Algorithm.SVDPP:
                document.params |= {
                    "mu": model.mu,
                    "b_u": model.b_u.tolist(),
                    "b_i": model.b_i.tolist(),
                    "Y": model.Y.tolist(),
                }
        elif algorithm is Algorithm.ITEMCF:
            document.params = {
                "W": model.W.tolist(),
                "K": model.K,
                "ratings": [
                    [u, i, r] for u in sorted(model.ratings) for i, r in sorted(model.ratings[u].items())
                ],
                "seen": [sorted(predictor.seen.get(u, ())) for u in range(predictor.n_users)],
            }
        elif algorithm in (Algorithm.FM, Algorithm.FFM):
            document.params = {
                "w0": model.w0,
                "w": model.w.tolist(),
                "V": model.V.tolist(),
                "loss": predictor.loss.value,
                "seen": [sorted(predictor.seen.get(u, ())) for u in range(predictor.n_users)],
            }
            document.encoder = predictor.spec
        else:
            document.ensemble = EnsembleBlock(
                kind=model.kind,
                weights=model.weights,
                intercept=model.intercept,
                members=[self.encode(member) for member in model.members],
                metadata=model.metadata,
            )
        return document

    def decode(self, document: ModelFile) -> BasePredictor:
        header = document.header
        if header.format_version != settings.MODEL_FORMAT_VERSION:
            raise ModelFormatError(f"unsupported model format_version {header.format_version}")
        params = document.params
        context = (document.users, document.items, header.rating_scale)
        try:
            algorithm = header.algorithm
            if algorithm is Algorithm.SVD:
                model = SvdCfModel(
                    r_star=_array(params["r_star"], 2),
                    mask=_array(params["mask"], 2),
                    f=params["f"],
                    similarity_mode=params["similarity_mode"],
                    neighborhood=params.get("neighborhood"),
                    impute=params.get("impute"),
                    singular_values=params.get("singular_values"),
                )
                return SvdCfPredictor(model, *context)
            if algorithm is Algorithm.FUNK:
                model = FactorModel(
                    kind=FactorKind.FUNK,
                    P=_array(params["P"], 2),
                    Q=_array(params["Q"], 2),
                    rated=params["rated"],
                )
                return FunkPredictor(model, *context)
            if algorithm is Algorithm.SVDPP:
                model = FactorModel(
                    kind=FactorKind.SVDPP,
                    P=_array(params["P"], 2),
                    Q=_array(params["Q"], 2),
                    Y=_array(params["Y"], 2),
                    mu=params["mu"],
                    b_u=_array(params["b_u"], 1),
                    b_i=_array(params["b_i"], 1),
                    rated=params["rated"],
                )
                return SvdppPredictor(model, *context)
            if algorithm is Algorithm.ITEMCF:
                ratings: dict[int, dict[int, float]] = {}
                for u, i, r in params["ratings"]:
                    ratings.setdefault(int(u), {})[int(i)] = float(r)
                model = ItemCfModel(
                    W=_array(params["W"], 2),
                    K=params["K"],
                    ratings=ratings,
                    n_users=len(document.users),
                )
                seen = params.get("seen")
                return ItemCfPredictor(
                    model, *context, seen=dict(enumerate(seen)) if seen is not None else None
                )
            if algorithm in (Algorithm.FM, Algorithm.FFM):
                if document.encoder is None:
                    raise ModelFormatError("factorization machine file without encoder spec")
                cls = FfmModel if algorithm is Algorithm.FFM else FmModel
                model = cls(
                    w0=params["w0"],
                    w=_array(params["w"], 1),
                    V=_array(params["V"], 3 if cls is FfmModel else 2),
                )
                return FmPredictor(
                    model,
                    document.encoder,
                    *context,
                    seen=dict(enumerate(params.get("seen", []))),
                    loss=LossKind(params.get("loss", LossKind.SQUARED)),
                )
            block = document.ensemble
            if block is None:
                raise ModelFormatError("ensemble file without ensemble block")
            model = BlendModel(
                kind=block.kind,
                members=[self.decode(member) for member in block.members],
                weights=block.weights,
                intercept=block.intercept,
                metadata=block.metadata,
            )
            return EnsemblePredictor(model, *context)
        except KeyError as e:
            raise ModelFormatError(f"missing parameter {e.args[0]!r}") from e
        except ValidationError as e:
            raise ModelFormatError(f"invalid parameters: {e.errors()[0]['msg']}") from e


class IModelDataManager(ABC):
    @abstractmethod
    def save(self, document: ModelFile) -> None:
        pass

    @abstractmethod
    def load(self) -> ModelFile:
        pass


class JsonModelDataManager(BaseDataManager, IModelDataManager):
    def save(self, document: ModelFile) -> None:
        self.write_text(document.model_dump_json(indent=2) + "\n")

    def load(self) -> ModelFile:
        if not self.exists():
            raise InputError(f"model file not found: {self.path}")
        try:
            raw = json.loads(self.read_text())
        except json.JSONDecodeError as e:
            raise ModelFormatError(f"{self.path} is not valid JSON: {e.msg}") from e
        version = raw.get("header", {}).get("format_version") if isinstance(raw, dict) else None
        if version != settings.MODEL_FORMAT_VERSION:
            raise ModelFormatError(f"unsupported model format_version {version!r}")
        try:
            return ModelFile.model_validate(raw)
        except ValidationError as e:
            first = e.errors()[0]
            location = ".".join(str(part) for part in first["loc"])
            raise ModelFormatError(f"{location}: {first['msg']}") from e


class IPersistenceService(ABC):
    @abstractmethod
    def save(self, predictor: BasePredictor) -> ModelFile:
        pass

    @abstractmethod
    def load(self) -> BasePredictor:
        pass


class PersistenceService(IPersistenceService):
    def __init__(self, data_manager: IModelDataManager, codec: ModelCodec | None = None):
        self.data_manager = data_manager
        self.codec = codec or ModelCodec()

    def save(self, predictor: BasePredictor) -> ModelFile:
        document = self.codec.encode(predictor)
        self.data_manager.save(document)
        return document

    def load(self) -> BasePredictor:
        return self.codec.decode(self.data_manager.load())

    def load_document(self) -> ModelFile:
        return self.data_manager.load()


def model_store(path: str | Path, feedback: FeedbackKind = FeedbackKind.EXPLICIT) -> PersistenceService:
    return PersistenceService(JsonModelDataManager(path), ModelCodec(feedback))

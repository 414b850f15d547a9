from .factor_model import FactorModel, ItemCfModel, SvdCfModel, TrainConfig
from .fm_model import EncoderSpec, FeatureVector, FfmModel, FmModel
from .model_file import ModelFile
from .rating_model import RatingDataset

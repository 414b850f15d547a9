from enum import Enum


class Algorithm(str, Enum):
    SVD = "svd"
    FUNK = "funk"
    SVDPP = "svdpp"
    ITEMCF = "itemcf"
    FM = "fm"
    FFM = "ffm"
    ENSEMBLE = "ensemble"


class FeedbackKind(str, Enum):
    EXPLICIT = "explicit"
    IMPLICIT = "implicit"


class DuplicatePolicy(str, Enum):
    KEEP_LAST = "keep_last"
    ERROR = "error"


class ImputeStrategy(str, Enum):
    GLOBAL = "global"
    USER = "user"
    ITEM = "item"


class SimilarityMode(str, Enum):
    PAPER_DOT = "paper-dot"
    COSINE = "cosine"


class RankRuleKind(str, Enum):
    ENERGY = "energy"
    RATIO = "ratio"
    FIXED = "fixed"


class FactorKind(str, Enum):
    FUNK = "funk"
    SVDPP = "svdpp"


class UpdateOrder(str, Enum):
    SEQUENTIAL = "sequential"
    SIMULTANEOUS = "simultaneous"


class FunkStrategy(str, Enum):
    ALL_FEATURES = "all_features"
    FEATURE_WISE = "feature_wise"


class OptimizerKind(str, Enum):
    SGD = "sgd"
    MOMENTUM = "momentum"
    ADAPTIVE = "adaptive"


class LossKind(str, Enum):
    SQUARED = "squared"
    LOGISTIC = "logistic"


class ColumnKind(str, Enum):
    CATEGORICAL = "categorical"
    NUMERIC = "numeric"


class EnsembleKind(str, Enum):
    BLEND = "blend"
    BAG = "bag"
    STACK = "stack"

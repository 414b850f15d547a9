import argparse
from typing import Any

from app.config import RunConfig, build_run_config, read_config_file
from app.exceptions import ArgumentError, UnknownIdError
from app.services.base import BasePredictor
from app.services.persistence_service import model_store

# Flags that map onto RunConfig keys.
TRAINING_KEYS = [key if key != "lambda" else "reg" for key in RunConfig.known_keys()]


def add_training_arguments(parser: argparse.ArgumentParser) -> None:
    """Flags shared by ``train`` and ``ensemble bag``; unset flags stay None
    so values from --config can fill them."""
    parser.add_argument("--algo", help="svd, funk, svdpp, itemcf, fm or ffm")
    parser.add_argument("--input", help="ratings CSV: user,item,rating[,timestamp]")
    parser.add_argument("--output", help="model file to write")
    parser.add_argument("--feedback", help="explicit (default) or implicit")
    parser.add_argument("--scale", help="explicit rating scale as lo,hi (default 1,5)")
    parser.add_argument("--header", action="store_true", default=None, help="CSV has a header row")
    parser.add_argument("--factors", type=int, help="latent dimension f (k for fm/ffm)")
    parser.add_argument("--alpha", type=float, help="learning rate")
    parser.add_argument("--lambda", dest="reg", type=float, help="regularization weight")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--optimizer", help="sgd, momentum or adaptive")
    parser.add_argument("--beta1", type=float)
    parser.add_argument("--beta2", type=float)
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--impute", help="svd: global, user or item average")
    parser.add_argument("--rank-rule", help="svd: energy:0.95, ratio:10 or fixed:f")
    parser.add_argument("--similarity-mode", help="svd: paper-dot or cosine")
    parser.add_argument("--neighborhood", type=int, help="svd/itemcf neighbourhood size")
    parser.add_argument("--neg-ratio", type=float, help="negatives per positive (implicit)")
    parser.add_argument("--loss", help="fm/ffm: squared or logistic")
    parser.add_argument("--update-order", help="funk: sequential or simultaneous")
    parser.add_argument("--strategy", help="funk: all_features or feature_wise")
    parser.add_argument("--holdout", type=float, help="fraction held out for evaluation")


def run_config_from(args: argparse.Namespace) -> RunConfig:
    file_values: dict[str, Any] = read_config_file(args.config) if args.config else {}
    flags = {key: getattr(args, key) for key in TRAINING_KEYS if hasattr(args, key)}
    return build_run_config(file_values, flags)


def load_predictor(path: str) -> BasePredictor:
    return model_store(path).load()


def resolve(predictor: BasePredictor, user: str, item: str | None = None) -> tuple[int, int | None]:
    """Dense indices of raw ids; unknown ids are data errors."""
    try:
        u = predictor.users.index(user)
    except ValueError as e:
        raise UnknownIdError(f"unknown user '{user}'") from e
    if item is None:
        return u, None
    try:
        i = predictor.items.index(item)
    except ValueError as e:
        raise UnknownIdError(f"unknown item '{item}'") from e
    return u, i


def positive_k(value: int) -> int:
    if value < 1:
        raise ArgumentError("k must be at least 1")
    return value

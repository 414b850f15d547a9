import argparse

from app.commands.shared import load_predictor, resolve
from app.services.svd_cf_service import round_to_scale


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("predict", help="predict one user's rating of an item")
    parser.add_argument("model", help="model file written by train")
    parser.add_argument("user")
    parser.add_argument("item")
    parser.set_defaults(handler=handle, parser=parser)


def handle(args: argparse.Namespace) -> int:
    predictor = load_predictor(args.model)
    u, i = resolve(predictor, args.user, args.item)
    value = predictor.predict(u, i)
    print(f"{value:.2f} (rounded: {round_to_scale(value, predictor.scale)})")
    return 0

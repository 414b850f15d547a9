import argparse
import logging

from app.commands.shared import load_predictor, positive_k, resolve

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("recommend", help="top-k unrated items for a user")
    parser.add_argument("model", help="model file written by train")
    parser.add_argument("user")
    parser.add_argument("-k", "--k", type=int, default=10, help="list length (default 10)")
    parser.set_defaults(handler=handle, parser=parser)


def handle(args: argparse.Namespace) -> int:
    k = positive_k(args.k)
    predictor = load_predictor(args.model)
    u, _ = resolve(predictor, args.user)
    ranked = predictor.recommend(u, k)
    if not ranked:
        logger.info("user %s has no unrated items", args.user)
    for rank, i in enumerate(ranked, start=1):
        print(f"{rank}\t{predictor.items[i]}\t{predictor.predict(u, i):.4f}")
    return 0

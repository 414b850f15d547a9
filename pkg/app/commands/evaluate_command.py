import argparse

from app.commands.shared import positive_k
from app.exceptions import ArgumentError
from app.models.constants import FeedbackKind
from app.models.rating_model import CsvSchema
from app.services import eval_service, ratings_service
from app.services.persistence_service import model_store


def parse_ks(text: str) -> list[int]:
    try:
        ks = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ArgumentError(f"--k expects a comma separated list, got '{text}'") from e
    if not ks:
        raise ArgumentError("--k needs at least one value")
    return [positive_k(k) for k in ks]


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("evaluate", help="score a model on a test CSV")
    parser.add_argument("model", help="model file written by train")
    parser.add_argument("test", help="ratings CSV to score against")
    parser.add_argument("--k", default="10", help="comma separated list, e.g. 5,10")
    parser.add_argument("--format", choices=["table", "json"], default="table")
    parser.add_argument("--threshold", type=float, help="rating counted as relevant")
    parser.add_argument("--header", action="store_true", help="test CSV has a header row")
    parser.set_defaults(handler=handle, parser=parser)


def handle(args: argparse.Namespace) -> int:
    ks = parse_ks(args.k)
    store = model_store(args.model)
    header = store.load_document().header
    predictor = store.load()
    schema = CsvSchema(
        has_header=args.header,
        kind=header.feedback,
        scale=header.rating_scale if header.feedback is FeedbackKind.EXPLICIT else (0.0, 1.0),
    )
    test = ratings_service.read_csv(args.test, schema)
    report = eval_service.evaluate_predictor(predictor, test, ks, args.threshold)
    if args.format == "json":
        print(eval_service.render_json(report))
    else:
        print(eval_service.render_table(report))
    return 0

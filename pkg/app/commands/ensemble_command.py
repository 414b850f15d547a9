import argparse
import logging

from app.commands.shared import add_training_arguments, positive_k, resolve, run_config_from
from app.exceptions import ArgumentError, InputError
from app.models.constants import FeedbackKind
from app.models.rating_model import CsvSchema
from app.services import ensemble_service, ratings_service
from app.services.base import BasePredictor
from app.services.ensemble_service import EnsemblePredictor
from app.services.persistence_service import model_store
from app.services.training_service import TrainingService, schema_for, seed_of

logger = logging.getLogger(__name__)


def split_list(text: str | None, flag: str) -> list[str]:
    parts = [part.strip() for part in (text or "").split(",") if part.strip()]
    if not parts:
        raise ArgumentError(f"{flag} needs at least one value")
    return parts


def load_members(paths: list[str]) -> tuple[list[BasePredictor], FeedbackKind]:
    """Members must share one user and item index space."""
    members, feedback = [], FeedbackKind.EXPLICIT
    for n, path in enumerate(paths):
        store = model_store(path)
        if n == 0:
            feedback = store.load_document().header.feedback
        member = store.load()
        if members and (member.users != members[0].users or member.items != members[0].items):
            raise InputError(f"{path} was trained on different users or items than {paths[0]}")
        members.append(member)
    return members, feedback


def _save(predictor: EnsemblePredictor, output: str | None, feedback: FeedbackKind) -> None:
    output = output or "ensemble.json"
    model_store(output, feedback).save(predictor)
    print(f"{predictor.model.kind.value} of {len(predictor.model.members)} members written to {output}")


def handle_blend(args: argparse.Namespace) -> int:
    members, feedback = load_members(split_list(args.models, "--models"))
    weights = None
    if args.weights:
        try:
            weights = [float(w) for w in split_list(args.weights, "--weights")]
        except ValueError as e:
            raise ArgumentError(f"--weights expects numbers, got '{args.weights}'") from e
        if len(weights) != len(members):
            raise ArgumentError(f"{len(members)} models but {len(weights)} weights")
    try:
        model = ensemble_service.make_blend(members, weights)
    except ValueError as e:
        raise ArgumentError(f"invalid blend weights: {e}") from e
    first = members[0]
    _save(EnsemblePredictor(model, first.users, first.items, first.scale), args.output, feedback)
    return 0


def handle_vote(args: argparse.Namespace) -> int:
    k = positive_k(args.k)
    members, _ = load_members(split_list(args.models, "--models"))
    u, _ = resolve(members[0], args.user)
    for rank, i in enumerate(ensemble_service.vote_recommend(members, u, k), start=1):
        print(f"{rank}\t{members[0].items[i]}")
    return 0


def handle_bag(args: argparse.Namespace) -> int:
    config = run_config_from(args)
    if not config.input:
        raise ArgumentError("--input is required")
    service = TrainingService(config)
    ds = ratings_service.read_csv(config.input, schema_for(config))
    seed = args.bag_seed if args.bag_seed is not None else seed_of(config)
    model = ensemble_service.bag_train(lambda sample: service.train(sample)[0], ds, args.B, seed)
    _save(EnsemblePredictor(model, ds.users, ds.items, ds.scale), config.output, ds.kind)
    return 0


def handle_stack(args: argparse.Namespace) -> int:
    members, feedback = load_members(split_list(args.models, "--models"))
    first = members[0]
    scale = first.scale if feedback is FeedbackKind.EXPLICIT else (0.0, 1.0)
    holdout = ratings_service.read_csv(
        args.holdout_file, CsvSchema(has_header=args.header, kind=feedback, scale=scale)
    )
    users = {user: u for u, user in enumerate(first.users)}
    items = {item: i for i, item in enumerate(first.items)}
    triples = []
    for u, i, r in holdout.raw_triples():
        if u in users and i in items:
            triples.append((users[u], items[i], r))
    skipped = len(holdout) - len(triples)
    if skipped:
        logger.warning("skipped %d holdout ratings with ids unknown to the members", skipped)
    model = ensemble_service.stack_fit(members, triples)
    _save(EnsemblePredictor(model, first.users, first.items, first.scale), args.output, feedback)
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("ensemble", help="combine trained models")
    kinds = parser.add_subparsers(dest="kind", metavar="KIND", required=True)

    blend = kinds.add_parser("blend", help="fixed convex combination of models")
    blend.add_argument("--models", required=True, help="comma separated model files")
    blend.add_argument("--weights", help="comma separated weights (default uniform)")
    blend.add_argument("--output", help="ensemble file to write (default ensemble.json)")
    blend.set_defaults(handler=handle_blend, parser=blend)

    vote = kinds.add_parser("vote", help="recommend by top-k votes across models")
    vote.add_argument("--models", required=True, help="comma separated model files")
    vote.add_argument("--user", required=True)
    vote.add_argument("-k", "--k", type=int, default=10)
    vote.set_defaults(handler=handle_vote, parser=vote)

    bag = kinds.add_parser("bag", help="train B models on bootstrap resamples")
    add_training_arguments(bag)
    bag.add_argument("-B", type=int, default=10, help="number of resamples (default 10)")
    bag.add_argument("--bag-seed", type=int, help="resampling seed (default --seed)")
    bag.set_defaults(handler=handle_bag, parser=bag)

    stack = kinds.add_parser("stack", help="fit blend weights on a holdout CSV")
    stack.add_argument("--models", required=True, help="comma separated model files")
    stack.add_argument("--holdout-file", required=True, help="ratings CSV the weights are fit on")
    stack.add_argument("--header", action="store_true", help="holdout CSV has a header row")
    stack.add_argument("--output", help="ensemble file to write (default ensemble.json)")
    stack.set_defaults(handler=handle_stack, parser=stack)

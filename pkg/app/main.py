import argparse
import logging
import sys
from typing import Sequence

from app.commands import (
    ensemble_command,
    evaluate_command,
    predict_command,
    recommend_command,
    train_command,
)
from app.exceptions import ArgumentError, RecofactorError
from app.logging_config import configure_logging

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="recofactor",
        description="Train, query, evaluate and combine recommender models.",
    )
    parser.add_argument("--config", help="key=value file with option defaults")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="log warnings and errors only")

    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for command in (
        train_command,
        predict_command,
        recommend_command,
        evaluate_command,
        ensemble_command,
    ):
        command.register(subparsers)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    if args.verbose:
        configure_logging(logging.DEBUG)
    elif args.quiet:
        configure_logging(logging.WARNING)
    else:
        configure_logging()

    try:
        return args.handler(args)
    except RecofactorError as e:
        print(f"error: {e.detail}", file=sys.stderr)
        if isinstance(e, ArgumentError):
            args.parser.print_usage(sys.stderr)
        logger.debug("command failed", exc_info=True)
        return e.exit_code


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()

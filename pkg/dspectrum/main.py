import argparse
import json
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from . import config, schemas
from .commands import best2, cf, construct, sample, verify
from .commands.common import EXIT_EXHAUSTED, EXIT_INPUT, CommandOutcome
from .config import ConfigurationError
from .database import run_log_session
from .services.approx2d import SearchExhausted
from .services.builder import ConstructionAborted, MarginTooSmall, NoEpsilonFound
from .services.exact import PrecisionExhausted, UndecidedTie
from .services.export_service import record_run


logger = logging.getLogger(__name__)

# Precision or search ran out before a decision
EXHAUSTION_ERRORS = (
    PrecisionExhausted,
    UndecidedTie,
    SearchExhausted,
    NoEpsilonFound,
    ConstructionAborted,
    MarginTooSmall,
)
# Bad arguments or unreadable input files
INPUT_ERRORS = (
    ValueError,
    ZeroDivisionError,
    ValidationError,
    ConfigurationError,
    json.JSONDecodeError,
    OSError,
)


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dspectrum",
        description="Dirichlet spectrum toolkit: continued fractions, best approximations and constructions",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    parser.add_argument("--record", action="store_true", help="Store this run in the run log")
    subparsers = parser.add_subparsers(dest="command", required=True)

    cf.register(subparsers)
    best2.register(subparsers)
    construct.register(subparsers)
    verify.register(subparsers)
    sample.register(subparsers)

    return parser


def _arguments_of(args: argparse.Namespace) -> dict:
    return {
        key: value
        for key, value in sorted(vars(args).items())
        if key not in {"handler", "verbose", "record"}
    }


def _record(args: argparse.Namespace, outcome: CommandOutcome) -> schemas.RunLogOut:
    with run_log_session() as db:
        entry = record_run(db, args.command, _arguments_of(args), outcome.exit_code, outcome.summary)
        return schemas.RunLogOut.model_validate(entry)


def dispatch(args: argparse.Namespace) -> CommandOutcome:
    try:
        return args.handler(args)
    except EXHAUSTION_ERRORS as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return CommandOutcome(EXIT_EXHAUSTED, {"error": str(exc), "kind": type(exc).__name__})
    except INPUT_ERRORS as exc:
        logger.error("Invalid input: %s", exc)
        return CommandOutcome(EXIT_INPUT, {"error": str(exc), "kind": type(exc).__name__})


def main(argv: Optional[List[str]] = None) -> int:
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else EXIT_INPUT

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    outcome = dispatch(args)
    if args.record or config.RECORD_RUNS:
        try:
            _record(args, outcome)
        except Exception:
            logger.exception("Failed to record run")
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())

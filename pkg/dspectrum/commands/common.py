from __future__ import annotations

import argparse
from dataclasses import dataclass, field
from typing import Any, Dict


EXIT_OK = 0
EXIT_FAIL = 1
EXIT_EXHAUSTED = 2
EXIT_INPUT = 3


@dataclass
class CommandOutcome:
    exit_code: int
    summary: Dict[str, Any] = field(default_factory=dict)


def branch_mask(text: str) -> int:
    try:
        value = int(text, 16)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid hex branch mask {text!r}") from exc
    if value < 0:
        raise argparse.ArgumentTypeError("branch mask must be non-negative")
    return value


def positive_int(text: str) -> int:
    try:
        value = int(text.replace("_", ""))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from exc
    if value < 1:
        raise argparse.ArgumentTypeError(f"{value} must be positive")
    return value


def non_negative_int(text: str) -> int:
    try:
        value = int(text.replace("_", ""))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from exc
    if value < 0:
        raise argparse.ArgumentTypeError(f"{value} must be non-negative")
    return value


def add_precision_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--prec",
        type=positive_int,
        default=None,
        help="Upper rung of the precision ladder in bits (default DSPECTRUM_MAX_PRECISION)",
    )

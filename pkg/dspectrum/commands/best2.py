from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .. import schemas
from ..services import approx2d, export_service
from ..services.exact import approx, parse_expr, to_prefix
from .common import EXIT_OK, CommandOutcome, add_precision_argument, positive_int


logger = logging.getLogger(__name__)


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("best2", help="Best simultaneous approximations of a vector in R^2")
    parser.add_argument("v1", help="First coordinate in prefix form")
    parser.add_argument("v2", help="Second coordinate in prefix form")
    parser.add_argument("--qmax", type=positive_int, default=1000, help="Largest denominator")
    parser.add_argument(
        "--out",
        default=None,
        help="JSONL output path; the summary goes next to it as <out>.summary.json (default stdout/stderr)",
    )
    add_precision_argument(parser)
    parser.set_defaults(handler=run)
    return parser


def build_summary(v: approx2d.TargetVector, q_max: int, chain) -> schemas.Best2Summary:
    report = approx2d.spectrum_bounds_check(v, q_max, chain)
    return schemas.Best2Summary(
        v=[to_prefix(v.v1), to_prefix(v.v2)],
        q_max=q_max,
        records=len(chain),
        max_product=None if report.max_product is None else approx2d.exact_text(report.max_product),
        max_product_approx=None if report.max_product is None else approx(report.max_product, 12),
        max_index=report.max_index,
        below_four_over_pi=report.below_minkowski,
        below_two_over_sqrt3=report.below_mahler,
        degenerate=report.degenerate,
    )


def run(args: argparse.Namespace) -> CommandOutcome:
    v = approx2d.TargetVector(parse_expr(args.v1), parse_expr(args.v2))
    chain = approx2d.best_approx_seq(v, args.qmax, args.prec)
    rows = [schemas.BestApproxRecordOut(**record.as_dict()).model_dump() for record in chain]
    summary = build_summary(v, args.qmax, chain)
    summary_data = summary.model_dump()

    if args.out:
        export_service.write_jsonl_atomic(args.out, rows)
        export_service.write_json_atomic(Path(f"{args.out}.summary.json"), summary_data)
    else:
        for row in rows:
            sys.stdout.write(json.dumps(row, sort_keys=True) + "\n")
        sys.stderr.write(json.dumps(summary_data, sort_keys=True) + "\n")

    if summary.degenerate:
        logger.warning("Degenerate chain: exact hit at q=%s", chain[-1].q)
    return CommandOutcome(EXIT_OK, summary_data)

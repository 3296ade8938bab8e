from __future__ import annotations

import argparse
import logging
import sys

from ..services import cf1d, export_service
from ..services.exact import parse_expr, to_prefix
from .common import EXIT_OK, CommandOutcome, add_precision_argument, positive_int


logger = logging.getLogger(__name__)


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("cf", help="Continued fraction table with Dirichlet products")
    parser.add_argument("alpha", help='Real number in prefix form, e.g. "(sqrt 2)" or "355/113"')
    parser.add_argument("--n", type=positive_int, default=10, help="Number of rows")
    parser.add_argument("--out", default=None, help="CSV output path (default stdout)")
    add_precision_argument(parser)
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace) -> CommandOutcome:
    alpha = parse_expr(args.alpha)
    rows = cf1d.cf_rows(alpha, args.n, args.prec)
    frame = export_service.cf_frame(rows)
    if args.out:
        export_service.write_csv_atomic(args.out, frame)
    else:
        frame.to_csv(sys.stdout, index=False, lineterminator="\n")

    products = frame["product"].dropna()
    summary = {
        "alpha": to_prefix(alpha),
        "rows": len(frame),
        "max_product": float(products.max()) if not products.empty else None,
    }
    logger.info("cf table for %s", summary["alpha"], extra=summary)
    return CommandOutcome(EXIT_OK, summary)

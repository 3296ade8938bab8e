from __future__ import annotations

import argparse
import logging
import multiprocessing
import random
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Tuple

from .. import config, schemas
from ..services import approx2d, export_service
from ..services.exact import FOUR_OVER_PI, TWO_OVER_SQRT3, lit, to_float
from .common import EXIT_OK, CommandOutcome, positive_int


logger = logging.getLogger(__name__)

# Coordinates are drawn as k / 2**SAMPLE_BITS
SAMPLE_BITS = 128

HISTOGRAM_FILE = "histogram.csv"
SUMMARY_FILE = "summary.json"


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("sample", help="Histogram of Dirichlet products over random vectors")
    parser.add_argument("--count", type=positive_int, default=500, help="Number of random vectors")
    parser.add_argument("--qmax", type=positive_int, default=10**5, help="Largest denominator per chain")
    parser.add_argument("--seed", type=int, default=0, help="Seed of the vector generator")
    parser.add_argument("--bins", type=positive_int, default=64, help="Histogram bins over [0, 4/pi]")
    parser.add_argument("--workers", type=positive_int, default=1, help="Worker processes")
    parser.add_argument("--out", default=None, help="Output directory (default data/runs/sample)")
    parser.set_defaults(handler=run)
    return parser


def draw_tasks(count: int, q_max: int, seed: int) -> List[Tuple[int, int, int]]:
    rng = random.Random(seed)
    return [(rng.getrandbits(SAMPLE_BITS), rng.getrandbits(SAMPLE_BITS), q_max) for _ in range(count)]


def sample_one(task: Tuple[int, int, int]) -> Dict[str, object]:
    k1, k2, q_max = task
    scale = 1 << SAMPLE_BITS
    v = approx2d.TargetVector(lit(Fraction(k1, scale)), lit(Fraction(k2, scale)))
    report = approx2d.spectrum_bounds_check(v, q_max)
    return {
        "products": [to_float(p) for p in report.products],
        "above_mahler": 0 if report.below_mahler else sum(
            not approx2d.below_bound(p, TWO_OVER_SQRT3) for p in report.products
        ),
        "above_minkowski": 0 if report.below_minkowski else sum(
            not approx2d.below_bound(p, FOUR_OVER_PI) for p in report.products
        ),
    }


def run_tasks(tasks: List[Tuple[int, int, int]], workers: int) -> Iterable[Dict[str, object]]:
    """Results in task order, whatever the number of workers."""
    if workers == 1:
        return [sample_one(task) for task in tasks]
    with multiprocessing.Pool(workers) as pool:
        return list(pool.imap(sample_one, tasks, chunksize=4))


def run(args: argparse.Namespace) -> CommandOutcome:
    tasks = draw_tasks(args.count, args.qmax, args.seed)
    results = run_tasks(tasks, args.workers)

    products: List[float] = []
    above_mahler = above_minkowski = 0
    for item in results:
        products.extend(item["products"])
        above_mahler += item["above_mahler"]
        above_minkowski += item["above_minkowski"]

    out_dir = Path(args.out) if args.out else config.get_run_dir("sample")
    histogram = export_service.product_histogram(products, args.bins)
    export_service.write_csv_atomic(out_dir / HISTOGRAM_FILE, histogram)
    summary = schemas.SampleSummary(
        count=args.count,
        q_max=args.qmax,
        seed=args.seed,
        products=len(products),
        max_product=max(products) if products else None,
        above_two_over_sqrt3=above_mahler,
        above_four_over_pi=above_minkowski,
    )
    data = summary.model_dump()
    export_service.write_json_atomic(out_dir / SUMMARY_FILE, data)
    if above_minkowski:
        logger.error("%s sampled products reached 4/pi", above_minkowski)
    logger.info("Sampled %s vectors", args.count, extra={"products": len(products), "q_max": args.qmax})
    return CommandOutcome(EXIT_OK, data)

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from typing import Optional

from .. import schemas
from ..services import builder, export_service
from ..services.approx2d import BestApproxRecord, TargetVector, validate_best_approx
from ..services.exact import format_rational, lit
from .common import EXIT_FAIL, EXIT_OK, CommandOutcome


logger = logging.getLogger(__name__)


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("verify", help="Re-check a construction bundle from scratch")
    parser.add_argument("bundle", help="result.json written by construct")
    parser.add_argument("--depth", type=int, default=None, help="Chain depth to validate (default N-2)")
    parser.add_argument("--out", default=None, help="Report path (default stdout)")
    parser.set_defaults(handler=run)
    return parser


def _fail(step: Optional[int], prop: Optional[int], detail: str, **extra) -> schemas.VerifyReport:
    return schemas.VerifyReport(
        status="FAIL",
        failed_step=step,
        failed_property=prop,
        failed_name=builder.PROPERTY_NAMES.get(prop) if prop else None,
        detail=detail,
        **extra,
    )


def compare_certificates(bundle: schemas.ResultBundle, result: builder.ConstructionResult) -> Optional[schemas.VerifyReport]:
    """First disagreement between stored and recomputed certificates, as a FAIL report."""
    if bundle.n_steps != result.n_steps or len(bundle.certificates) != result.n_steps:
        return _fail(None, None, f"bundle lists {bundle.n_steps} steps for {len(bundle.points) - 1} points")
    if bundle.v != [format_rational(c) for c in result.v]:
        return _fail(result.n_steps, None, "stored v does not match the last point")
    for stored, fresh in zip(bundle.certificates, result.state.certificates):
        if not fresh.passed:
            return _fail(fresh.n, fresh.failed_property, "recomputed certificate fails")
        if stored.R2 != [format_rational(r) for r in fresh.radii2]:
            return _fail(fresh.n, 3, "stored radii differ from recomputed radii")
        if stored.V_over_pi != [format_rational(v) for v in fresh.volumes]:
            return _fail(fresh.n, 4, "stored volumes differ from recomputed volumes")
    return None


def chain_records(result: builder.ConstructionResult, depth: int) -> list:
    v = result.v
    records = []
    for n, u in enumerate(result.state.points[: depth + 1]):
        r2 = (u.x * v[0] - u.y) ** 2 + (u.x * v[1] - u.z) ** 2
        records.append(BestApproxRecord(n, u.x, (u.y, u.z), lit(Fraction(r2))))
    return records


def verify_bundle(bundle: schemas.ResultBundle, depth: Optional[int] = None) -> schemas.VerifyReport:
    result = export_service.bundle_to_result(bundle)
    depth = result.n_steps - 2 if depth is None else depth

    failure = compare_certificates(bundle, result)
    if failure is not None:
        failure.depth = depth
        return failure

    limit = builder.validate_limit(result, depth)
    extra = {
        "depth": depth,
        "error_bound": format_rational(limit.error_bound),
        "drift": limit.drift,
    }
    if not limit.passed:
        return _fail(None, None, limit.detail, mismatch_index=limit.mismatch_index, **extra)

    v = result.v
    chain = validate_best_approx(chain_records(result, depth), TargetVector(lit(v[0]), lit(v[1])))
    if not chain.passed:
        return _fail(chain.index, None, f"best-approximation condition {chain.failed_condition}: {chain.detail}", **extra)
    return schemas.VerifyReport(status="PASS", **extra)


def run(args: argparse.Namespace) -> CommandOutcome:
    bundle = export_service.load_bundle(args.bundle)
    report = verify_bundle(bundle, args.depth)
    data = report.model_dump()
    if args.out:
        export_service.write_json_atomic(args.out, data)
    else:
        sys.stdout.write(json.dumps(data, sort_keys=True) + "\n")
    if report.status == "PASS":
        logger.info("Bundle verified", extra={"depth": report.depth})
        return CommandOutcome(EXIT_OK, data)
    logger.error("Bundle failed verification: %s", report.detail)
    return CommandOutcome(EXIT_FAIL, data)

from __future__ import annotations

import argparse
import logging
from pathlib import Path
from typing import List, Optional

from .. import config
from ..services import builder, export_service
from ..services.approx2d import SearchExhausted
from ..services.exact import approx, parse_expr, to_prefix
from .common import EXIT_EXHAUSTED, EXIT_OK, CommandOutcome, branch_mask, non_negative_int, positive_int


logger = logging.getLogger(__name__)

RESULT_FILE = "result.json"
CERTIFICATES_FILE = "certificates.jsonl"
DIVERGENCE_FILE = "divergence.json"


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("construct", help="Build a vector with prescribed Dirichlet products")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--targets", default=None, help="JSON file with target intervals")
    source.add_argument("--lambda", dest="lam", default=None, help="Target centre in prefix form")
    parser.add_argument(
        "--halfwidth",
        default=None,
        help="Half-width of every target around --lambda; omitted means [lambda - 1/m, lambda + 1/m]",
    )
    parser.add_argument("--n", type=positive_int, default=None, help="Number of construction steps")
    parser.add_argument("--branch", type=branch_mask, default=None, help="Hex mask; bit n-1 picks the plane at step n")
    parser.add_argument("--kbudget", type=positive_int, default=None, help="Strips per admissible-k search")
    parser.add_argument(
        "--compare-branch",
        type=non_negative_int,
        default=None,
        metavar="BIT",
        help="Also run with branch bit BIT flipped and report where the chains part",
    )
    parser.add_argument("--out", default=None, help="Output directory (default data/runs/construct)")
    parser.set_defaults(handler=run)
    return parser


def resolve_targets(args: argparse.Namespace) -> tuple:
    """Target list and branch mask from either a targets file or --lambda/--halfwidth."""
    if args.targets:
        targets_file = export_service.load_targets(args.targets)
        if targets_file.targets is not None:
            targets = export_service.targets_from_schema(targets_file.targets)
        else:
            targets = _targets_around(targets_file.lambda_, targets_file.halfwidth, targets_file.n)
        file_branch = int(targets_file.branch, 16) if targets_file.branch else 0
        branch = args.branch if args.branch is not None else file_branch
        if args.n is not None and args.n > len(targets):
            raise ValueError(f"--n {args.n} exceeds the {len(targets)} targets in {args.targets}")
        return targets[: args.n] if args.n else targets, branch

    if args.n is None:
        raise ValueError("--n is required with --lambda")
    return _targets_around(args.lam, args.halfwidth, args.n), args.branch or 0


def _targets_around(lam: str, halfwidth: Optional[str], n: int) -> List[builder.TargetInterval]:
    centre = parse_expr(lam)
    if halfwidth is None:
        return builder.shrinking_targets(centre, n)
    return builder.constant_targets(centre, parse_expr(halfwidth), n)


def write_outputs(out_dir: Path, result: builder.ConstructionResult) -> Path:
    bundle = export_service.result_to_bundle(result)
    export_service.write_jsonl_atomic(
        out_dir / CERTIFICATES_FILE, [certificate.model_dump() for certificate in bundle.certificates]
    )
    return export_service.write_json_atomic(out_dir / RESULT_FILE, bundle.model_dump())


def compare_branches(
    out_dir: Path,
    result: builder.ConstructionResult,
    targets: List[builder.TargetInterval],
    bit: int,
    k_budget: Optional[int],
) -> Path:
    report = builder.branch_divergence(targets, result.n_steps, bit, result.branch_bits, k_budget, base=result)
    divergence = export_service.divergence_to_report(report, result.branch_bits)
    if not divergence.distinct:
        logger.warning("Flipping branch bit %s left v unchanged", bit)
    return export_service.write_json_atomic(out_dir / DIVERGENCE_FILE, divergence.model_dump())


def run(args: argparse.Namespace) -> CommandOutcome:
    targets, branch = resolve_targets(args)
    out_dir = Path(args.out) if args.out else config.get_run_dir("construct")
    out_dir.mkdir(parents=True, exist_ok=True)

    states: List[builder.ConstructionState] = []
    try:
        result = builder.construct(targets, branch, len(targets), args.kbudget, on_step=states.append)
    except (SearchExhausted, builder.ConstructionAborted) as exc:
        last: Optional[builder.ConstructionState] = states[-1] if states else None
        last_cert = last.certificates[-1] if last and last.certificates else None
        diagnostic = {
            "error": str(exc),
            "completed_steps": last.n if last else 0,
            "last_k": last_cert.k if last_cert else None,
            "last_lambda_star": to_prefix(last_cert.lambda_star) if last_cert and last_cert.lambda_star else None,
        }
        logger.error("Construction stopped: %s", exc, extra=diagnostic)
        if last is not None:
            write_outputs(out_dir, builder.ConstructionResult(last, branch))
        return CommandOutcome(EXIT_EXHAUSTED, diagnostic)

    path = write_outputs(out_dir, result)
    all_certified = all(c.passed for c in result.state.certificates)
    summary = {
        "result": str(path),
        "n_steps": result.n_steps,
        "branch": f"0x{branch:x}",
        "q_final": str(result.state.points[-1].x),
        "v_approx": [approx(c, 20) for c in result.v],
        "all_certified": all_certified,
    }
    if args.compare_branch is not None:
        summary["divergence"] = str(compare_branches(out_dir, result, targets, args.compare_branch, args.kbudget))
    logger.info("Construction finished", extra=summary)
    return CommandOutcome(EXIT_OK if all_certified else EXIT_EXHAUSTED, summary)

from __future__ import annotations

import json
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from sqlalchemy.orm import Session

from .. import models, schemas
from .builder import ConstructionResult, TargetInterval, result_from_points
from .exact import format_rational
from .lattice3 import LatticePoint


logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# Upper end of the histogram range, 4/pi
HISTOGRAM_TOP = 4 / math.pi
MAHLER_EDGE = 2 / math.sqrt(3)


class BundleError(ValueError):
    """Raised when a result bundle cannot be turned back into a construction."""


def _replace_atomic(path: PathLike, write) -> Path:
    """Write through ``write(tmp_path)`` and move the result into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_name(path.name + ".tmp")
    write(tmp_path)
    os.replace(tmp_path, path)
    return path


def write_json_atomic(path: PathLike, data: Any) -> Path:
    def write(tmp_path: Path) -> None:
        with open(tmp_path, "w", encoding="utf-8", newline="\n") as handle:
            json.dump(data, handle, indent=2, sort_keys=True)
            handle.write("\n")

    return _replace_atomic(path, write)


def write_jsonl_atomic(path: PathLike, rows: Iterable[Dict[str, Any]]) -> Path:
    def write(tmp_path: Path) -> None:
        with open(tmp_path, "w", encoding="utf-8", newline="\n") as handle:
            for row in rows:
                handle.write(json.dumps(row, sort_keys=True))
                handle.write("\n")

    return _replace_atomic(path, write)


def write_csv_atomic(path: PathLike, frame: pd.DataFrame) -> Path:
    return _replace_atomic(path, lambda tmp_path: frame.to_csv(tmp_path, index=False, lineterminator="\n"))


CF_COLUMNS = ["n", "a_n", "p_n", "q_n", "distance", "product", "relation_gap"]


def cf_frame(rows: Sequence[Dict[str, Any]]) -> pd.DataFrame:
    """Tabulate cf rows; the last row has no product column values."""
    frame = pd.DataFrame(list(rows), columns=CF_COLUMNS)
    for column in ("a_n", "p_n", "q_n"):
        frame[column] = frame[column].astype(str)
    return frame


def histogram_edges(bins: int) -> np.ndarray:
    """Fixed-width edges over [0, 4/pi] with 2/sqrt(3) inserted as an extra edge."""
    if bins < 1:
        raise ValueError("bins must be at least 1")
    edges = np.linspace(0.0, HISTOGRAM_TOP, bins + 1)
    return np.unique(np.append(edges, MAHLER_EDGE))


def product_histogram(products: Sequence[float], bins: int = 64) -> pd.DataFrame:
    edges = histogram_edges(bins)
    values = pd.Series(list(products), dtype="float64")
    binned = pd.cut(values, bins=edges, include_lowest=True, right=False)
    counts = binned.value_counts(sort=False)
    frame = pd.DataFrame(
        {
            "bin_lo": edges[:-1],
            "bin_hi": edges[1:],
            "count": counts.to_numpy(dtype="int64"),
        }
    )
    frame["above_two_over_sqrt3"] = frame["bin_lo"] >= MAHLER_EDGE
    overflow = int((values >= HISTOGRAM_TOP).sum())
    if overflow:
        logger.error("%s products at or above 4/pi left out of the histogram", overflow)
    return frame


def point_strings(u: Sequence[int]) -> List[str]:
    return [str(c) for c in u]


def result_to_bundle(result: ConstructionResult) -> schemas.ResultBundle:
    state = result.state
    return schemas.ResultBundle(
        branch=f"0x{result.branch_bits:x}",
        n_steps=result.n_steps,
        targets=[schemas.TargetIntervalSchema(**t.as_dict()) for t in state.targets],
        points=[point_strings(u) for u in state.points],
        v=[format_rational(c) for c in result.v],
        error_bound=format_rational(result.error_bound),
        all_certified=all(c.passed for c in state.certificates),
        certificates=[schemas.StepCertificateOut(**c.as_dict()) for c in state.certificates],
    )


def divergence_to_report(report: Dict[str, Any], branch_bits: int) -> schemas.DivergenceReport:
    bit = report["bit"]
    return schemas.DivergenceReport(
        bit=bit,
        branch_clear=f"0x{branch_bits & ~(1 << bit):x}",
        branch_set=f"0x{branch_bits | (1 << bit):x}",
        first_difference=report["first_difference"],
        distinct=report["distance2"] > 0,
        distance2=format_rational(report["distance2"]),
        v_clear=[format_rational(c) for c in report["v_clear"]],
        v_set=[format_rational(c) for c in report["v_set"]],
    )


def targets_from_schema(items: Sequence[schemas.TargetIntervalSchema]) -> List[TargetInterval]:
    return [TargetInterval.from_dict(item.model_dump()) for item in items]


def bundle_to_result(bundle: schemas.ResultBundle) -> ConstructionResult:
    """Rebuild (and re-certify) the construction recorded in ``bundle``."""
    try:
        points = [LatticePoint(*(int(c) for c in u)) for u in bundle.points]
        branch_bits = int(bundle.branch, 16)
    except (TypeError, ValueError) as exc:
        raise BundleError(f"malformed bundle: {exc}") from exc
    if not points or points[0] != LatticePoint(1, 0, 0):
        raise BundleError("bundle chain must start at (1, 0, 0)")
    return result_from_points(points, targets_from_schema(bundle.targets), branch_bits)


def load_bundle(path: PathLike) -> schemas.ResultBundle:
    with open(path, "r", encoding="utf-8") as handle:
        return schemas.ResultBundle.model_validate(json.load(handle))


def load_targets(path: PathLike) -> schemas.TargetsFile:
    with open(path, "r", encoding="utf-8") as handle:
        data = json.load(handle)
    if isinstance(data, list):
        data = {"targets": data}
    return schemas.TargetsFile.model_validate(data)


def record_run(
    db: Session,
    subcommand: str,
    arguments: Dict[str, Any],
    exit_code: int,
    summary: Optional[Dict[str, Any]] = None,
) -> models.RunLog:
    entry = models.RunLog(
        subcommand=subcommand,
        arguments=arguments,
        exit_code=exit_code,
        summary=summary,
    )
    db.add(entry)
    db.commit()
    db.refresh(entry)
    logger.info("Recorded run", extra={"run_id": entry.id, "subcommand": subcommand})
    return entry

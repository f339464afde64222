"""
File storage for patterns, fit results and experiment outputs.

Trials hand their rows to the output activity through per-trial staging
files rather than activity return values: a Monte Carlo study produces
thousands of rows, and Temporal's event history is meant for small
metadata, not bulk data. Every write goes to a staging file first and is
swapped into place with os.replace(), so readers see either the old file
or the complete new one.

Pattern files are JSON:

    {
      "kind": "complex",
      "points": [{"azimuth": 0.0, "elevation": 0.0}, {"position": [0, 2, 0]}],
      "values": [[1.0, 0.0], [0.5, -0.5]]
    }

Complex values are [re, im] pairs; magnitude kinds store plain numbers.
Angles are radians.
"""
import os
import json
import math
from typing import Any, Dict, List, Optional, Sequence

import aiofiles
import aiofiles.os
import numpy as np

from pattern_extrapolation.core import (
    DesignSpaceModel,
    MeasurementKind,
    SamplePoint,
    SampledPattern,
)
from pattern_extrapolation.solver import ExtrapolationResult

PARTIAL_MARKER = "PARTIAL"


class PatternFileError(ValueError):
    """A pattern file is malformed. `field` names the offending entry."""

    def __init__(self, message: str, field: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


async def write_text_atomic(path: str, text: str) -> None:
    """Write text through a staging file and swap it into place."""
    staging_file = f"{path}.tmp"
    async with aiofiles.open(staging_file, "w", encoding="utf-8", newline="") as f:
        await f.write(text)
    await aiofiles.os.replace(staging_file, path)


async def read_text(path: str) -> str:
    async with aiofiles.open(path, "r", encoding="utf-8") as f:
        return await f.read()


def write_partial_marker(out_dir: str, reason: str) -> None:
    """
    Leave a marker telling readers the output directory is incomplete.

    Called while an I/O error is already propagating, so it never raises.
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, PARTIAL_MARKER), "w", encoding="utf-8") as f:
            f.write(reason + "\n")
    except OSError:
        pass


class FileManager:
    """
    Per-trial staging files of one experiment run.

    Files are named per run and trial so concurrent trials, and concurrent
    runs sharing a staging directory, never collide.
    """

    def __init__(self, staging_dir: str, run_id: str) -> None:
        """
        Args:
            staging_dir: Base directory for staging files
            run_id: Unique experiment execution identifier
        """
        self.staging_dir = staging_dir
        self.run_id = run_id

    def get_file_path(self, trial_index: int) -> str:
        return os.path.join(self.staging_dir, f"trial_{self.run_id}_{trial_index}.json")

    async def write_atomic(self, trial_index: int, data: Dict[str, Any]) -> None:
        """
        Atomically write a trial's rows as JSON.

        Raises:
            OSError: Any file I/O error during write
        """
        await aiofiles.os.makedirs(self.staging_dir, exist_ok=True)
        await write_text_atomic(self.get_file_path(trial_index), json.dumps(data))

    async def read(self, trial_index: int) -> Dict[str, Any]:
        """
        Raises:
            OSError: If the file doesn't exist
            ValueError: If the JSON is corrupt
        """
        return json.loads(await read_text(self.get_file_path(trial_index)))

    async def delete(self, trial_index: int) -> None:
        """Delete a trial file. Silently succeeds if the file doesn't exist."""
        try:
            await aiofiles.os.remove(self.get_file_path(trial_index))
        except FileNotFoundError:
            pass


# Pattern and result files
# ------------------------

def encode_value(value: complex, kind: MeasurementKind) -> Any:
    if kind is MeasurementKind.COMPLEX_FIELD:
        return [float(value.real), float(value.imag)]
    return float(np.real(value))


def _decode_number(raw: Any, field: str) -> float:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise PatternFileError(f"expected a number, got {raw!r}", field)
    if not math.isfinite(raw):
        raise PatternFileError(f"expected a finite number, got {raw!r}", field)
    return float(raw)


def _decode_value(raw: Any, kind: MeasurementKind, field: str) -> Any:
    if kind is MeasurementKind.COMPLEX_FIELD:
        if not isinstance(raw, list) or len(raw) != 2:
            raise PatternFileError(f"expected an [re, im] pair, got {raw!r}", field)
        return complex(_decode_number(raw[0], f"{field}[0]"), _decode_number(raw[1], f"{field}[1]"))
    return _decode_number(raw, field)


def _decode_point(raw: Any, field: str) -> SamplePoint:
    if not isinstance(raw, dict):
        raise PatternFileError(f"expected an object, got {raw!r}", field)
    try:
        if "position" in raw:
            position = raw["position"]
            if not isinstance(position, list) or len(position) != 3:
                raise PatternFileError(f"expected [x, y, z], got {position!r}", f"{field}.position")
            return SamplePoint.near(*(_decode_number(c, f"{field}.position") for c in position))
        if "azimuth" not in raw or "elevation" not in raw:
            raise PatternFileError("needs azimuth and elevation, or position", field)
        return SamplePoint.far(
            _decode_number(raw["azimuth"], f"{field}.azimuth"),
            _decode_number(raw["elevation"], f"{field}.elevation"),
        )
    except PatternFileError:
        raise
    except ValueError as e:
        raise PatternFileError(str(e), field) from e


def pattern_to_record(pattern: SampledPattern) -> Dict[str, Any]:
    points: List[Dict[str, Any]] = []
    for point in pattern.points:
        if point.direction is not None:
            points.append({"azimuth": point.direction.azimuth, "elevation": point.direction.elevation})
        else:
            points.append({"position": list(point.position)})
    return {
        "kind": pattern.kind.value,
        "points": points,
        "values": [encode_value(v, pattern.kind) for v in pattern.values],
    }


def pattern_from_record(record: Any) -> SampledPattern:
    """
    Raises:
        PatternFileError: naming the first malformed field
    """
    if not isinstance(record, dict):
        raise PatternFileError("expected a JSON object", "<root>")
    try:
        kind = MeasurementKind(record.get("kind", MeasurementKind.COMPLEX_FIELD.value))
    except ValueError as e:
        raise PatternFileError(f"unknown measurement kind {record.get('kind')!r}", "kind") from e

    raw_points = record.get("points")
    raw_values = record.get("values")
    if not isinstance(raw_points, list) or not raw_points:
        raise PatternFileError("expected a nonempty list", "points")
    if not isinstance(raw_values, list):
        raise PatternFileError("expected a list", "values")
    if len(raw_values) != len(raw_points):
        raise PatternFileError(
            f"has {len(raw_values)} entries but there are {len(raw_points)} points", "values"
        )

    points = tuple(_decode_point(p, f"points[{i}]") for i, p in enumerate(raw_points))
    values = tuple(_decode_value(v, kind, f"values[{i}]") for i, v in enumerate(raw_values))
    try:
        return SampledPattern(points=points, values=values, kind=kind)
    except ValueError as e:
        raise PatternFileError(str(e), "points") from e


async def load_pattern(path: str) -> SampledPattern:
    """
    Raises:
        OSError: If the file can't be read
        PatternFileError: If the file isn't a valid pattern
    """
    text = await read_text(path)
    try:
        record = json.loads(text)
    except json.JSONDecodeError as e:
        raise PatternFileError(f"invalid JSON ({e.msg} at line {e.lineno})", "<root>") from e
    return pattern_from_record(record)


async def save_pattern(path: str, pattern: SampledPattern) -> None:
    await write_text_atomic(path, json.dumps(pattern_to_record(pattern), indent=2) + "\n")


def result_to_record(
    model: DesignSpaceModel,
    result: ExtrapolationResult,
    kind: MeasurementKind,
    queries: Optional[Sequence[SamplePoint]] = None,
) -> Dict[str, Any]:
    """JSON form of an extrapolation result; predicted values keep the observed kind."""
    record: Dict[str, Any] = {
        "model": model.name,
        "kind": kind.value,
        "config": list(result.config.values),
        "excitation": [[v.real, v.imag] for v in result.excitation.values],
        "residual": result.residual,
        "residual_history": list(result.residual_history),
        "converged": result.converged,
        "undersampled": result.undersampled,
        "restart": result.restart,
        "skipped_candidates": result.skipped_candidates,
    }
    if queries:
        predicted = SampledPattern(points=tuple(queries), values=tuple(result.predicted), kind=kind)
        record["predicted"] = pattern_to_record(predicted)
    return record

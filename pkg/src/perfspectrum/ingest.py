"""Reading, validating, merging and writing run records.

Two wire formats are supported and are symmetric: json-lines (one object
per line, UTF-8, LF endings) and CSV (RFC-4180 quoting, header row first).
The canonical flat field names are::

    label, dofs, wall_time_s, flops, workers, linear_iterations,
    nonlinear_iterations, h_size, l2_error, alpha, discretization,
    l1_misses, l2_misses, l3_misses, line_size_bytes

Unknown keys are ignored; missing optional fields stay absent.  When miss
counters are present without ``line_size_bytes``, a 64-byte line is assumed
(the line size of every machine this toolkit models by default).
"""

from __future__ import annotations

import csv
import io
import json
from typing import IO, Iterable, Sequence

from .errors import MergeError, ParseError
from .records import (
    CACHE_LEVELS,
    DISCRETIZATIONS,
    LINE_SIZES,
    CacheLevelCounters,
    RunRecord,
)

FIELD_NAMES = (
    "label",
    "dofs",
    "wall_time_s",
    "flops",
    "workers",
    "linear_iterations",
    "nonlinear_iterations",
    "h_size",
    "l2_error",
    "alpha",
    "discretization",
    "l1_misses",
    "l2_misses",
    "l3_misses",
    "line_size_bytes",
)

FORMATS = ("json-lines", "csv")

_MISS_KEYS = {"L1": "l1_misses", "L2": "l2_misses", "L3": "l3_misses"}
DEFAULT_LINE_SIZE = 64


def validate_record(record: RunRecord) -> list[str]:
    """Return every invariant violation of a record; empty means valid.

    Never raises: validation reports, it does not enforce.
    """
    violations: list[str] = []
    if record.dofs < 1:
        violations.append("dofs must be >= 1")
    if not record.wall_time > 0:
        violations.append("wall_time must be > 0")
    if record.flops < 0:
        violations.append("flops must be >= 0")
    if record.workers < 1:
        violations.append("workers must be >= 1")
    if record.linear_iterations is not None and record.linear_iterations < 0:
        violations.append("linear_iterations must be >= 0")
    if record.nonlinear_iterations is not None and record.nonlinear_iterations < 0:
        violations.append("nonlinear_iterations must be >= 0")
    if record.h_size is not None and not record.h_size > 0:
        violations.append("h_size must be > 0")
    if record.l2_error is not None and record.l2_error < 0:
        violations.append("l2_error must be >= 0")
    if record.alpha is not None and record.alpha < 0:
        violations.append("alpha must be >= 0")
    if record.discretization is not None and record.discretization not in DISCRETIZATIONS:
        violations.append(
            f"discretization must be one of {'/'.join(DISCRETIZATIONS)}"
        )
    seen_levels: set[str] = set()
    for c in record.cache_counters:
        if c.level not in CACHE_LEVELS:
            violations.append(f"cache level must be one of {'/'.join(CACHE_LEVELS)}")
        if c.level in seen_levels:
            violations.append(f"duplicate cache counters for level {c.level}")
        seen_levels.add(c.level)
        if c.misses < 0:
            violations.append(f"{c.level} misses must be >= 0")
        if c.line_size not in LINE_SIZES:
            violations.append(
                "line_size must be a power of two in {32,64,128,256}"
            )
    return violations


def parse_records(
    source: bytes | str | IO[bytes] | IO[str],
    format: str = "json-lines",
    lenient: bool = False,
) -> tuple[list[RunRecord], list[str]]:
    """Parse a record stream; returns ``(records, warnings)``.

    In strict mode (default) the first bad line raises :class:`ParseError`
    with its line number.  In lenient mode bad lines are skipped and each
    contributes one warning string.
    """
    text = _as_text(source)
    if format == "json-lines":
        return _parse_jsonl(text, lenient)
    if format == "csv":
        return _parse_csv(text, lenient)
    raise ParseError(0, f"unknown format {format!r}; expected one of {FORMATS}")


def _as_text(source) -> str:
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        try:
            return source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(0, f"input is not valid UTF-8: {exc}") from None
    return source


def _parse_jsonl(text: str, lenient: bool) -> tuple[list[RunRecord], list[str]]:
    records: list[RunRecord] = []
    warnings: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, f"invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise ParseError(lineno, "expected a JSON object")
            records.append(_record_from_fields(obj, lineno))
        except ParseError as exc:
            if not lenient:
                raise
            warnings.append(str(exc))
    return records, warnings


def _parse_csv(text: str, lenient: bool) -> tuple[list[RunRecord], list[str]]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return [], []
    header = rows[0]
    records: list[RunRecord] = []
    warnings: list[str] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(cell == "" for cell in row):
            continue
        try:
            if len(row) > len(header):
                raise ParseError(
                    lineno, f"row has {len(row)} fields but header has {len(header)}"
                )
            fields = {k: v for k, v in zip(header, row) if v != ""}
            records.append(_record_from_fields(fields, lineno))
        except ParseError as exc:
            if not lenient:
                raise
            warnings.append(str(exc))
    return records, warnings


def _record_from_fields(fields: dict, lineno: int) -> RunRecord:
    def take_int(key, default=None):
        if key not in fields:
            return default
        return _coerce_int(fields[key], key, lineno)

    def take_float(key, default=None):
        if key not in fields:
            return default
        return _coerce_float(fields[key], key, lineno)

    label = fields.get("label", "")
    if not isinstance(label, str):
        raise ParseError(lineno, "label must be a string")
    discretization = fields.get("discretization")
    if discretization is not None and not isinstance(discretization, str):
        raise ParseError(lineno, "discretization must be a string")

    dofs = take_int("dofs", 0)
    wall_time = take_float("wall_time_s", 0.0)
    flops = take_int("flops", -1)
    missing = [
        key
        for key, present in (
            ("dofs", "dofs" in fields),
            ("wall_time_s", "wall_time_s" in fields),
            ("flops", "flops" in fields),
        )
        if not present
    ]

    line_size = take_int("line_size_bytes", DEFAULT_LINE_SIZE)
    counters = []
    for level in CACHE_LEVELS:
        misses = take_int(_MISS_KEYS[level])
        if misses is not None:
            counters.append(CacheLevelCounters(level=level, misses=misses, line_size=line_size))

    record = RunRecord(
        label=label,
        dofs=dofs,
        wall_time=wall_time,
        flops=flops,
        workers=take_int("workers", 1),
        cache_counters=tuple(counters),
        linear_iterations=take_int("linear_iterations"),
        nonlinear_iterations=take_int("nonlinear_iterations"),
        h_size=take_float("h_size"),
        l2_error=take_float("l2_error"),
        alpha=take_float("alpha"),
        discretization=discretization,
    )
    violations = validate_record(record)
    violations += [f"missing required field {k}" for k in missing]
    if violations:
        raise ParseError(lineno, "; ".join(violations))
    return record


def _coerce_int(value, key: str, lineno: int) -> int:
    if isinstance(value, bool):
        raise ParseError(lineno, f"{key} must be an integer")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if value.is_integer():
            return int(value)
        raise ParseError(lineno, f"{key} must be an integer, got {value}")
    if isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            raise ParseError(lineno, f"{key} must be an integer, got {value!r}") from None
    raise ParseError(lineno, f"{key} must be an integer")


def _coerce_float(value, key: str, lineno: int) -> float:
    if isinstance(value, bool):
        raise ParseError(lineno, f"{key} must be a number")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            raise ParseError(lineno, f"{key} must be a number, got {value!r}") from None
    raise ParseError(lineno, f"{key} must be a number")


def record_to_fields(record: RunRecord) -> dict:
    """Flatten a record into the canonical field mapping (absent = omitted)."""
    fields: dict = {
        "label": record.label,
        "dofs": record.dofs,
        "wall_time_s": record.wall_time,
        "flops": record.flops,
        "workers": record.workers,
    }
    if record.linear_iterations is not None:
        fields["linear_iterations"] = record.linear_iterations
    if record.nonlinear_iterations is not None:
        fields["nonlinear_iterations"] = record.nonlinear_iterations
    if record.h_size is not None:
        fields["h_size"] = record.h_size
    if record.l2_error is not None:
        fields["l2_error"] = record.l2_error
    if record.alpha is not None:
        fields["alpha"] = record.alpha
    if record.discretization is not None:
        fields["discretization"] = record.discretization
    if record.cache_counters:
        sizes = {c.line_size for c in record.cache_counters}
        if len(sizes) > 1:
            raise MergeError(
                "cannot serialize mixed per-level line sizes into the flat schema"
            )
        fields["line_size_bytes"] = record.cache_counters[0].line_size
        for c in record.cache_counters:
            fields[_MISS_KEYS[c.level]] = c.misses
    return fields


def records_to_jsonl(records: Iterable[RunRecord]) -> bytes:
    """Serialize records as json-lines (UTF-8, LF, one object per line)."""
    lines = [
        json.dumps(record_to_fields(r), ensure_ascii=False, sort_keys=True)
        for r in records
    ]
    return ("".join(line + "\n" for line in lines)).encode("utf-8")


def records_to_csv(records: Iterable[RunRecord]) -> bytes:
    """Serialize records as CSV using the full canonical column set."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FIELD_NAMES)
    for record in records:
        fields = record_to_fields(record)
        writer.writerow([_cell(fields.get(name)) for name in FIELD_NAMES])
    return buf.getvalue().encode("utf-8")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def merge_worker_records(records: Sequence[RunRecord]) -> RunRecord:
    """Reduce per-worker records of one run into a single record.

    Wall time is the maximum over workers, FLOPs and per-level misses are
    summed, and the worker count becomes the number of records.  Fields that
    describe the problem itself (label, dofs, discretization, h_size, alpha,
    iteration counts, l2_error) must agree across all records.
    """
    if not records:
        raise MergeError("cannot merge an empty record list")
    first = records[0]
    for key in (
        "label",
        "dofs",
        "discretization",
        "h_size",
        "alpha",
        "linear_iterations",
        "nonlinear_iterations",
        "l2_error",
    ):
        values = {getattr(r, key) for r in records}
        if len(values) > 1:
            raise MergeError(f"records disagree on {key}: {sorted(values, key=repr)}")
    level_sets = {tuple(sorted(r.counters_by_level())) for r in records}
    if len(level_sets) > 1:
        raise MergeError(f"records disagree on cache levels: {sorted(level_sets)}")
    counters = []
    for level in CACHE_LEVELS:
        per_level = [r.counters_by_level().get(level) for r in records]
        if per_level[0] is None:
            continue
        sizes = {c.line_size for c in per_level}
        if len(sizes) > 1:
            raise MergeError(f"records disagree on {level} line size: {sorted(sizes)}")
        counters.append(
            CacheLevelCounters(
                level=level,
                misses=sum(c.misses for c in per_level),
                line_size=per_level[0].line_size,
            )
        )
    return RunRecord(
        label=first.label,
        dofs=first.dofs,
        wall_time=max(r.wall_time for r in records),
        flops=sum(r.flops for r in records),
        workers=len(records),
        cache_counters=tuple(counters),
        linear_iterations=first.linear_iterations,
        nonlinear_iterations=first.nonlinear_iterations,
        h_size=first.h_size,
        l2_error=first.l2_error,
        alpha=first.alpha,
        discretization=first.discretization,
    )

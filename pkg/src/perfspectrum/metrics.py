"""Intensity and rate metrics over run records.

Implements total-bytes-transferred, arithmetic intensity (per byte and per
cache miss), the three DOF-rate metrics, strong-scaling efficiency, the
log-log convergence slope, and static-scaling classification.  All functions
are pure; values are immutable and safe to share between threads.

No FLOP-rate (FLOP/s) metric is provided on purpose: it is trivially gamed
by inflating the operation count, which is exactly what the rate metrics
here avoid.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import DomainError
from .records import CACHE_LEVELS, RunRecord


def tbt_bytes(misses: int, line_size: int) -> int:
    """Total bytes transferred attributed to one cache level.

    Exactly ``misses * line_size`` in integer arithmetic; a zero miss count
    is valid and yields zero traffic.
    """
    if line_size <= 0 or line_size & (line_size - 1):
        raise DomainError(f"line_size must be a positive power of two, got {line_size}")
    if misses < 0:
        raise DomainError(f"misses must be >= 0, got {misses}")
    return misses * line_size


def ai_per_byte(flops: int, tbt: int) -> float:
    """Arithmetic intensity as FLOPs per byte moved."""
    if tbt <= 0:
        raise DomainError("total bytes transferred must be > 0 (missing cache data?)")
    return flops / tbt


def ai_per_miss(flops: int, misses: int) -> float:
    """Simplified arithmetic intensity: FLOPs per cache miss.

    Equal to ``ai_per_byte(flops, tbt) * line_size`` for the same level.
    """
    if misses <= 0:
        raise DomainError("miss count must be > 0 (missing cache data?)")
    return flops / misses


def rate1(dofs: int, wall_time: float) -> float:
    """Degrees of freedom solved per second."""
    if wall_time <= 0:
        raise DomainError(f"wall_time must be > 0, got {wall_time}")
    return dofs / wall_time


def rate2(dofs: int, wall_time: float, iterations: int) -> float:
    """Degrees of freedom solved per second per solver iteration.

    Averages out time increases that come purely from iteration growth.
    """
    if wall_time <= 0:
        raise DomainError(f"wall_time must be > 0, got {wall_time}")
    if iterations < 1:
        raise DomainError(f"iterations must be >= 1, got {iterations}")
    return dofs / (wall_time * iterations)


def rate3(dofs: int, wall_time: float, workers: int) -> float:
    """Degrees of freedom solved per second per worker."""
    if wall_time <= 0:
        raise DomainError(f"wall_time must be > 0, got {wall_time}")
    if workers < 1:
        raise DomainError(f"workers must be >= 1, got {workers}")
    return dofs / (wall_time * workers)


def strong_scaling_efficiency(
    base_time: float, base_units: int, time: float, units: int
) -> float:
    """Strong-scaling efficiency in percent, relative to a baseline run.

    ``100 * (base_time * base_units) / (time * units)``; the raw value is
    returned and display rounding is left to :func:`round_percent`.
    """
    if base_time <= 0 or time <= 0:
        raise DomainError("times must be > 0")
    if base_units <= 0 or units <= 0:
        raise DomainError("unit counts must be > 0")
    return 100.0 * (base_time * base_units) / (time * units)


def round_percent(value: float) -> int:
    """Display rounding for efficiencies: nearest integer percent."""
    return int(math.floor(value + 0.5))


def convergence_slope(points: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of log(error) against log(h).

    Natural logs are used; the slope is base-invariant.  Points must have
    distinct positive ``h`` and positive ``error``.
    """
    if len(points) < 2:
        raise DomainError("need at least 2 (h, error) points to fit a slope")
    hs = [h for h, _ in points]
    if len(set(hs)) != len(hs):
        raise DomainError("h values must be distinct")
    for h, err in points:
        if h <= 0 or err <= 0:
            raise DomainError(f"h and error must be > 0, got ({h}, {err})")
    xs = [math.log(h) for h, _ in points]
    ys = [math.log(e) for _, e in points]
    return _ols_slope(xs, ys)


def _ols_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    if sxx == 0:
        raise DomainError("cannot fit a slope through identical x values")
    return sxy / sxx


@dataclass(frozen=True)
class SpectrumPoint:
    """Derived metrics for one run record.

    Per-level mappings are keyed by cache level name; levels with zero
    misses are omitted from the intensity mappings (no data to divide by).
    ``rate2`` is ``None`` when the record carries no linear iteration count.
    """

    record: RunRecord
    tbt_per_level: Mapping[str, int]
    ai_per_byte: Mapping[str, float]
    ai_per_miss: Mapping[str, float]
    rate1: float
    rate2: float | None
    rate3: float


def spectrum_point(record: RunRecord) -> SpectrumPoint:
    """Compute every derived metric for one record."""
    tbt: dict[str, int] = {}
    aib: dict[str, float] = {}
    aim: dict[str, float] = {}
    for c in record.cache_counters:
        tbt[c.level] = tbt_bytes(c.misses, c.line_size)
        if c.misses > 0:
            aib[c.level] = ai_per_byte(record.flops, tbt[c.level])
            aim[c.level] = ai_per_miss(record.flops, c.misses)
    r2 = None
    if record.linear_iterations is not None:
        r2 = rate2(record.dofs, record.wall_time, record.linear_iterations)
    return SpectrumPoint(
        record=record,
        tbt_per_level=tbt,
        ai_per_byte=aib,
        ai_per_miss=aim,
        rate1=rate1(record.dofs, record.wall_time),
        rate2=r2,
        rate3=rate3(record.dofs, record.wall_time, record.workers),
    )


@dataclass(frozen=True)
class ScalingSeries:
    """Spectrum points for one label, ordered by ascending problem size."""

    label: str
    points: tuple[SpectrumPoint, ...]

    @classmethod
    def from_points(cls, label: str, points: Sequence[SpectrumPoint]) -> "ScalingSeries":
        pts = tuple(sorted(points, key=lambda p: p.record.dofs))
        sizes = [p.record.dofs for p in pts]
        if any(a >= b for a, b in zip(sizes, sizes[1:])):
            raise DomainError(
                f"series {label!r} must have strictly increasing dofs, got {sizes}"
            )
        workers = {p.record.workers for p in pts}
        if len(workers) > 1:
            raise DomainError(
                f"series {label!r} mixes worker counts {sorted(workers)}; "
                "a static-scaling series holds concurrency fixed"
            )
        return cls(label=label, points=pts)


class ScalingTrend(enum.Enum):
    """Shape classes for a static-scaling series."""

    FLAT = "Flat"
    TAIL_OFF = "TailOff"
    DIP_LEFT = "DipLeft"
    MIXED = "Mixed"


def classify_static_scaling(
    series: ScalingSeries, flat_band: float = 0.1
) -> ScalingTrend:
    """Classify a static-scaling series by its log-log rate1 slopes.

    The series is split into a lower and an upper half (the middle point is
    shared when the count is odd) and an OLS slope of log(rate1) against
    log(dofs) is fitted to each half.  Flat: both slopes within
    ``flat_band`` of zero.  TailOff: the upper half falls below the band.
    DipLeft: the lower half rises above the band while the upper half is
    flat.  Anything else is Mixed.
    """
    pts = series.points
    if len(pts) < 3:
        raise DomainError("classification needs at least 3 points")
    half = len(pts) // 2
    lower = pts[: len(pts) - half]
    upper = pts[half:]
    s_lo = _ols_slope(
        [math.log(p.record.dofs) for p in lower], [math.log(p.rate1) for p in lower]
    )
    s_hi = _ols_slope(
        [math.log(p.record.dofs) for p in upper], [math.log(p.rate1) for p in upper]
    )
    if abs(s_lo) <= flat_band and abs(s_hi) <= flat_band:
        return ScalingTrend.FLAT
    if s_hi < -flat_band:
        return ScalingTrend.TAIL_OFF
    if s_lo > flat_band and abs(s_hi) <= flat_band:
        return ScalingTrend.DIP_LEFT
    return ScalingTrend.MIXED

"""Domain types for benchmark/solve run records.

A :class:`RunRecord` captures one execution of a solver or benchmark:
problem size, wall time, floating-point work, optional cache-miss counters,
iteration counts and worker count.  Records are plain immutable carriers;
invariant checking lives in :func:`perfspectrum.ingest.validate_record` so
that validation can report violations instead of refusing construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

DISCRETIZATIONS = ("CG1", "CG2", "DG1", "DG2")
CACHE_LEVELS = ("L1", "L2", "L3")
LINE_SIZES = (32, 64, 128, 256)


@dataclass(frozen=True)
class CacheLevelCounters:
    """Miss count and line size attributed to one cache level."""

    level: str
    misses: int
    line_size: int = 64


@dataclass(frozen=True)
class RunRecord:
    """One benchmark or solve execution.

    ``dofs`` is the total discretization size including Dirichlet boundary
    nodes; ``workers`` is the in-process analogue of an MPI process count.
    Optional fields are ``None`` when the run did not produce them.
    """

    label: str
    dofs: int
    wall_time: float
    flops: int
    workers: int = 1
    cache_counters: tuple[CacheLevelCounters, ...] = field(default_factory=tuple)
    linear_iterations: int | None = None
    nonlinear_iterations: int | None = None
    h_size: float | None = None
    l2_error: float | None = None
    alpha: float | None = None
    discretization: str | None = None

    def counters_by_level(self) -> dict[str, CacheLevelCounters]:
        return {c.level: c for c in self.cache_counters}

    def with_label(self, label: str) -> "RunRecord":
        return replace(self, label=label)

"""Benchmark orchestration: mesh, assemble, solve, measure, record.

A benchmark run is seedless and deterministic: for a fixed ``(n, alpha,
tol)`` the FLOP count, iteration count and error are identical across
repetitions and worker counts; only the wall time varies.  The timed window
covers assembly and solve; mesh construction, error evaluation and cache
simulation happen outside it.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..cachemodel import CacheConfig
from ..errors import CacheConfigError, ConvergenceError, DomainError, MeshError
from ..records import CACHE_LEVELS, CacheLevelCounters, RunRecord
from .cachetrace import simulate_solver_cache
from .diffusion import assemble_system, l2_error
from .mesh import build_mesh, count_dofs
from .solver import FlopCounter, solve_cg_jacobi


@dataclass(frozen=True)
class BenchConfig:
    """Parameters of one diffusion benchmark run.

    Only CG1 is solvable; the other discretizations exist for DOF counting.
    """

    n: int
    alpha: float = 0.0
    tol: float = 1e-7
    max_iterations: int = 10_000
    workers: int = 1
    cache_model: "CacheConfig | None" = None
    discretization: str = "CG1"

    def __post_init__(self):
        if self.n < 2:
            raise MeshError(f"n must be >= 2 for a nonempty interior, got {self.n}")
        if not 0 < self.tol < 1:
            raise DomainError(f"tol must be in (0, 1), got {self.tol}")
        if self.alpha < 0:
            raise DomainError(f"alpha must be >= 0, got {self.alpha}")
        if self.workers < 1:
            raise DomainError(f"workers must be >= 1, got {self.workers}")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be >= 1")


def run_benchmark(config: BenchConfig) -> RunRecord:
    """Mesh, assemble, solve and measure one benchmark configuration."""
    if config.discretization != "CG1":
        raise MeshError(
            f"only CG1 is solvable; {config.discretization} is count-only"
        )
    if config.cache_model is not None:
        unknown = set(config.cache_model.level_names) - set(CACHE_LEVELS)
        if unknown:
            raise CacheConfigError(
                f"benchmark cache levels must be named from {CACHE_LEVELS}, "
                f"got {sorted(unknown)}"
            )
    mesh = build_mesh(config.n)
    counter = FlopCounter()
    events: list | None = [] if config.cache_model is not None else None

    start = time.monotonic()
    a, b = assemble_system(mesh, config.alpha, counter=counter)
    result = solve_cg_jacobi(
        a,
        b,
        tol=config.tol,
        max_iterations=config.max_iterations,
        workers=config.workers,
        counter=counter,
        events=events,
    )
    wall_time = time.monotonic() - start

    if not result.converged:
        raise ConvergenceError(
            f"solver did not converge within {config.max_iterations} iterations "
            f"(relative residual {result.relative_residual:.3e})",
            iterations=result.iterations,
            relative_residual=result.relative_residual,
        )

    counters: tuple[CacheLevelCounters, ...] = ()
    if config.cache_model is not None:
        counts = simulate_solver_cache(a, events, config.cache_model)
        counters = tuple(
            CacheLevelCounters(
                level=name,
                misses=counts.misses[name],
                line_size=config.cache_model.line_size,
            )
            for name in config.cache_model.level_names
        )

    error = l2_error(result.u, mesh)
    return RunRecord(
        label=f"cg1-n{config.n}-a{config.alpha:g}",
        dofs=count_dofs(config.n, "CG1"),
        wall_time=wall_time,
        flops=counter.total,
        workers=config.workers,
        cache_counters=counters,
        linear_iterations=result.iterations,
        h_size=1.0 / config.n,
        l2_error=error,
        alpha=config.alpha,
        discretization="CG1",
    )


_TRIAD_REPS = 10
_TRIAD_Q = 3.0
_TRIAD_BYTES_PER_ELEMENT = 24  # two 8-byte reads and one 8-byte write


def measure_triad(length: int, workers: int = 1) -> tuple[float, float]:
    """Best-of-10 STREAM-triad run; returns (bandwidth GB/s, best seconds).

    Computes ``a[i] = b[i] + q * c[i]`` over double-precision arrays split
    into one contiguous slice per worker.  Traffic is counted as 24 bytes
    per element (write-allocate traffic excluded).  Inputs are exactly
    representable so the kernel result is checked exactly after timing.
    """
    if length < 1:
        raise DomainError(f"length must be >= 1, got {length}")
    if workers < 1:
        raise DomainError(f"workers must be >= 1, got {workers}")
    idx = np.arange(length, dtype=np.int64)
    b = (idx % 17).astype(np.float64) * 0.5
    c = (idx % 13).astype(np.float64) * 0.25
    a = np.zeros(length)

    bounds = np.linspace(0, length, num=workers + 1, dtype=np.int64)
    slices = [
        (int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo
    ]

    def kernel(lo: int, hi: int):
        np.add(b[lo:hi], _TRIAD_Q * c[lo:hi], out=a[lo:hi])

    best_ns = None
    if len(slices) == 1:
        for _ in range(_TRIAD_REPS):
            t0 = time.perf_counter_ns()
            kernel(*slices[0])
            t1 = time.perf_counter_ns()
            best_ns = t1 - t0 if best_ns is None else min(best_ns, t1 - t0)
    else:
        with ThreadPoolExecutor(max_workers=len(slices)) as pool:
            for _ in range(_TRIAD_REPS):
                t0 = time.perf_counter_ns()
                futures = [pool.submit(kernel, lo, hi) for lo, hi in slices]
                for f in futures:
                    f.result()
                t1 = time.perf_counter_ns()
                best_ns = t1 - t0 if best_ns is None else min(best_ns, t1 - t0)

    if not np.array_equal(a, b + _TRIAD_Q * c):
        raise RuntimeError("triad verification failed: a != b + q*c")
    best_s = max(best_ns, 1) / 1e9
    bandwidth = _TRIAD_BYTES_PER_ELEMENT * length / best_s / 1e9
    return bandwidth, best_s


def stream_triad(length: int, workers: int = 1) -> float:
    """Sustainable memory bandwidth in GB/s from the STREAM triad kernel."""
    return measure_triad(length, workers)[0]

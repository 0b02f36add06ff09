"""Jacobi-preconditioned conjugate gradients with manual FLOP counting.

The solver is deterministic by construction: vectors are processed in fixed
contiguous chunks and reductions sum the per-chunk partials in chunk order,
so results are bitwise identical for any worker count and any thread
scheduling.  Worker threads only decide who computes which chunk.

FLOP counts follow the usual manual-count convention (each floating add,
multiply, divide or square root counts 1): SpMV ``2*nnz``, dot ``2n``,
axpy ``2n``, norm ``2n``, vector subtract ``n`` (booked under axpy), and
one Jacobi application ``n``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from .sparse import CsrMatrix, _row_sums

CHUNK = 16384

KERNELS = ("assembly", "spmv", "dot", "axpy", "norm", "jacobi")


@dataclass
class FlopCounter:
    """Running floating-point operation count by kernel."""

    counts: dict = field(default_factory=lambda: {k: 0 for k in KERNELS})

    def add(self, kernel: str, flops: int) -> None:
        if flops < 0:
            raise ValueError("flop increments must be nonnegative")
        self.counts[kernel] = self.counts.get(kernel, 0) + flops

    @property
    def total(self) -> int:
        return sum(self.counts.values())


@dataclass
class CgResult:
    """Outcome of a conjugate-gradient solve."""

    u: np.ndarray
    iterations: int
    converged: bool
    relative_residual: float
    restarts: int = 0


def _chunks(n: int) -> list[tuple[int, int]]:
    return [(s, min(s + CHUNK, n)) for s in range(0, n, CHUNK)]


class _Pool:
    """Runs per-chunk tasks, in order when serial, on threads otherwise."""

    def __init__(self, workers: int):
        self.workers = workers
        self._executor = (
            ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
        )

    def map(self, fn, args_list):
        if self._executor is None:
            return [fn(*args) for args in args_list]
        futures = [self._executor.submit(fn, *args) for args in args_list]
        return [f.result() for f in futures]

    def close(self):
        if self._executor is not None:
            self._executor.shutdown(wait=True)


class _Kernels:
    """Chunked vector and CSR kernels over a fixed row partition."""

    def __init__(self, a: CsrMatrix, pool: _Pool, counter: FlopCounter, events):
        self.a = a
        self.n = a.m
        self.pool = pool
        self.counter = counter
        self.events = events
        self.ranges = _chunks(self.n)

    def _log(self, *event):
        if self.events is not None:
            self.events.append(event)

    def spmv(self, x: np.ndarray, out: np.ndarray, xname: str, outname: str):
        a = self.a

        def run(lo, hi):
            s, e = a.row_offsets[lo], a.row_offsets[hi]
            prod = a.values[s:e] * x[a.column_indices[s:e]]
            out[lo:hi] = _row_sums(prod, a.row_offsets[lo : hi + 1] - s, hi - lo)

        self.pool.map(run, self.ranges)
        self.counter.add("spmv", 2 * a.nnz)
        self._log("spmv", xname, outname)

    def dot(self, x, y, xname: str, yname: str) -> float:
        parts = self.pool.map(
            lambda lo, hi: float(np.dot(x[lo:hi], y[lo:hi])), self.ranges
        )
        total = 0.0
        for p in parts:
            total += p
        self.counter.add("dot", 2 * self.n)
        self._log("dot", xname, yname)
        return total

    def norm(self, x, xname: str) -> float:
        parts = self.pool.map(
            lambda lo, hi: float(np.dot(x[lo:hi], x[lo:hi])), self.ranges
        )
        total = 0.0
        for p in parts:
            total += p
        self.counter.add("norm", 2 * self.n)
        self._log("norm", xname)
        return math.sqrt(total)

    def axpy(self, alpha: float, x, y, xname: str, yname: str):
        """y += alpha * x."""
        self.pool.map(lambda lo, hi: y[lo:hi].__iadd__(alpha * x[lo:hi]), self.ranges)
        self.counter.add("axpy", 2 * self.n)
        self._log("axpy", xname, yname)

    def xpay(self, x, beta: float, y, xname: str, yname: str):
        """y = x + beta * y."""

        def run(lo, hi):
            y[lo:hi] *= beta
            y[lo:hi] += x[lo:hi]

        self.pool.map(run, self.ranges)
        self.counter.add("axpy", 2 * self.n)
        self._log("axpy", xname, yname)

    def vsub(self, x, y, out, xname: str, yname: str, outname: str):
        """out = x - y (n flops, booked under axpy)."""
        self.pool.map(
            lambda lo, hi: np.subtract(x[lo:hi], y[lo:hi], out=out[lo:hi]), self.ranges
        )
        self.counter.add("axpy", self.n)
        self._log("vsub", xname, yname, outname)

    def jacobi(self, dinv, r, z):
        self.pool.map(
            lambda lo, hi: np.multiply(dinv[lo:hi], r[lo:hi], out=z[lo:hi]),
            self.ranges,
        )
        self.counter.add("jacobi", self.n)
        self._log("jacobi", "dinv", "r", "z")

    def copy(self, src, dst, srcname: str, dstname: str):
        self.pool.map(lambda lo, hi: dst.__setitem__(slice(lo, hi), src[lo:hi]), self.ranges)
        self._log("copy", srcname, dstname)


def solve_cg_jacobi(
    a: CsrMatrix,
    b: np.ndarray,
    tol: float = 1e-7,
    max_iterations: int = 10_000,
    workers: int = 1,
    counter: FlopCounter | None = None,
    events: list | None = None,
) -> CgResult:
    """Solve ``A u = b`` for SPD ``A`` to a relative residual tolerance.

    Convergence means ``|b - A u| <= tol * |b|`` in the Euclidean norm; the
    true residual is verified after the recursion converges and iteration
    resumes from it in the (rare) event of drift.  On non-convergence the
    best iterate is returned with ``converged=False``.

    ``events``, when given a list, receives the kernel call sequence
    (including an ``("iter",)`` marker per iteration) for traffic modeling.
    """
    if not 0 < tol < 1:
        raise DomainError(f"tol must be in (0, 1), got {tol}")
    if workers < 1:
        raise DomainError(f"workers must be >= 1, got {workers}")
    if counter is None:
        counter = FlopCounter()
    n = a.m
    if a.n != n:
        raise DomainError("matrix must be square")
    diag = a.diagonal()
    if np.any(diag == 0):
        raise DomainError("matrix has a zero diagonal entry; Jacobi is undefined")

    pool = _Pool(workers)
    try:
        k = _Kernels(a, pool, counter, events)
        dinv = 1.0 / diag
        counter.add("jacobi", n)  # diagonal inversion, one divide per row

        u = np.zeros(n)
        r = np.empty(n)
        z = np.empty(n)
        p = np.empty(n)
        q = np.empty(n)

        bnorm = k.norm(b, "b")
        if bnorm == 0.0:
            return CgResult(u=u, iterations=0, converged=True, relative_residual=0.0)

        k.copy(b, r, "b", "r")  # u0 = 0, so r0 = b
        k.jacobi(dinv, r, z)
        k.copy(z, p, "z", "p")
        rz = k.dot(r, z, "r", "z")

        iterations = 0
        restarts = 0
        rnorm = bnorm
        while iterations < max_iterations:
            k._log("iter")
            iterations += 1
            k.spmv(p, q, "p", "q")
            pq = k.dot(p, q, "p", "q")
            if pq <= 0:
                break  # not SPD (or breakdown); bail out with best iterate
            alpha = rz / pq
            k.axpy(alpha, p, u, "p", "x")
            k.axpy(-alpha, q, r, "q", "r")
            rnorm = k.norm(r, "r")
            fresh_direction = False
            if rnorm <= tol * bnorm:
                # verify against the true residual before declaring victory
                k.spmv(u, q, "x", "q")
                k.vsub(b, q, r, "b", "q", "r")
                rnorm = k.norm(r, "r")
                if rnorm <= tol * bnorm:
                    return CgResult(
                        u=u,
                        iterations=iterations,
                        converged=True,
                        relative_residual=rnorm / bnorm,
                        restarts=restarts,
                    )
                if restarts >= 2:
                    break
                restarts += 1
                fresh_direction = True  # the recursion drifted; restart from r
            k.jacobi(dinv, r, z)
            rz_next = k.dot(r, z, "r", "z")
            if fresh_direction:
                k.copy(z, p, "z", "p")
            else:
                k.xpay(z, rz_next / rz, p, "z", "p")
            rz = rz_next
        return CgResult(
            u=u,
            iterations=iterations,
            converged=False,
            relative_residual=rnorm / bnorm,
            restarts=restarts,
        )
    finally:
        pool.close()

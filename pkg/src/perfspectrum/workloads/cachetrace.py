"""Cache traffic of a recorded solve, with cyclic steady-state replay.

The solver's kernel-event log expands into the byte-level access stream of
each iteration.  Because conjugate gradients issues an identical kernel
sequence every full iteration, the per-iteration touch stream is one fixed
block; once the cache state at an iteration boundary repeats exactly, every
later iteration contributes the same hit/miss deltas, so the remaining
iterations are accounted for by multiplication instead of simulation.
Restarted or truncated iterations break the pattern and are simulated
directly.

Only solver traffic is modeled (SpMV, vector kernels, Jacobi); assembly
and setup traffic are not traced.
"""

from __future__ import annotations

import numpy as np

from ..cachemodel import (
    READ,
    WRITE,
    AccessTrace,
    CacheConfig,
    MissCounts,
    _CacheState,
    _spmv_access_arrays,
)
from ..errors import TraceError
from .sparse import CsrMatrix

# matrix arrays first, then the solve vectors, then the Jacobi diagonal
_ARRAY_IDS = {
    "row_offsets": 0,
    "column_indices": 1,
    "values": 2,
    "b": 3,
    "x": 4,
    "r": 5,
    "z": 6,
    "p": 7,
    "q": 8,
    "dinv": 9,
}

# which vector arrays each event kind reads and writes, in issue order
_VECTOR_EVENTS = {
    "copy": lambda ev: ([ev[1]], [ev[2]]),
    "jacobi": lambda ev: ([ev[1], ev[2]], [ev[3]]),
    "dot": lambda ev: ([ev[1], ev[2]], []),
    "norm": lambda ev: ([ev[1]], []),
    "axpy": lambda ev: ([ev[1], ev[2]], [ev[2]]),
    "vsub": lambda ev: ([ev[1], ev[2]], [ev[3]]),
}


def _array_sizes(a: CsrMatrix) -> dict[int, int]:
    vec = 8 * a.m
    return {
        _ARRAY_IDS["row_offsets"]: 4 * (a.m + 1),
        _ARRAY_IDS["column_indices"]: max(4 * a.nnz, 1),
        _ARRAY_IDS["values"]: max(8 * a.nnz, 1),
        _ARRAY_IDS["b"]: vec,
        _ARRAY_IDS["x"]: vec,
        _ARRAY_IDS["r"]: vec,
        _ARRAY_IDS["z"]: vec,
        _ARRAY_IDS["p"]: vec,
        _ARRAY_IDS["q"]: vec,
        _ARRAY_IDS["dinv"]: vec,
    }


def _segment_accesses(a: CsrMatrix, events: list):
    """Expand one event segment into raw access arrays."""
    vec = 8 * a.m
    aid, off, ln, kd = [], [], [], []

    def sweep(name: str, kind: int):
        aid.append(np.array([_ARRAY_IDS[name]], dtype=np.int64))
        off.append(np.zeros(1, dtype=np.int64))
        ln.append(np.array([vec], dtype=np.int64))
        kd.append(np.array([kind], dtype=np.uint8))

    for ev in events:
        if ev[0] == "spmv":
            ids = (
                _ARRAY_IDS["row_offsets"],
                _ARRAY_IDS["column_indices"],
                _ARRAY_IDS["values"],
                _ARRAY_IDS[ev[1]],
                _ARRAY_IDS[ev[2]],
            )
            block = _spmv_access_arrays(
                np.asarray(a.row_offsets, dtype=np.int64),
                np.asarray(a.column_indices),
                ids=ids,
            )
            aid.append(block[0])
            off.append(block[1])
            ln.append(block[2])
            kd.append(block[3])
        elif ev[0] in _VECTOR_EVENTS:
            reads, writes = _VECTOR_EVENTS[ev[0]](ev)
            for name in reads:
                sweep(name, READ)
            for name in writes:
                sweep(name, WRITE)
        else:
            raise TraceError(f"unknown solver event {ev!r}")
    if not aid:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy(), empty.copy(), np.empty(0, dtype=np.uint8)
    return (
        np.concatenate(aid),
        np.concatenate(off),
        np.concatenate(ln),
        np.concatenate(kd),
    )


def _split_on_iters(events: list) -> tuple[list, list[list]]:
    """Split the event log into the prologue and per-iteration bodies."""
    prologue: list = []
    bodies: list[list] = []
    current = prologue
    for ev in events:
        if ev[0] == "iter":
            bodies.append([])
            current = bodies[-1]
        else:
            current.append(ev)
    return prologue, bodies


def _states_equal(a, b) -> bool:
    return all(
        np.array_equal(x, y) for pa, pb in zip(a, b) for x, y in zip(pa, pb)
    )


def simulate_solver_cache(
    a: CsrMatrix, events: list, config: CacheConfig, engine: str = "auto"
) -> MissCounts:
    """Simulate the cache traffic of a recorded solve."""
    sizes = _array_sizes(a)
    line = config.line_size

    def touches(evs: list):
        trace = AccessTrace(_segment_accesses(a, evs), sizes)
        return trace.line_touches(line)

    state = _CacheState(config)
    prologue, bodies = _split_on_iters(events)
    state.run(*touches(prologue), engine=engine)

    i = 0
    while i < len(bodies):
        j = i + 1
        while j < len(bodies) and bodies[j] == bodies[i]:
            j += 1
        run_len = j - i
        if run_len < 3:
            for k in range(i, j):
                state.run(*touches(bodies[k]), engine=engine)
        else:
            lines, writes = touches(bodies[i])
            prev_state = state.canonical()
            done = 0
            while done < run_len:
                before = (
                    state.misses.copy(),
                    state.hits.copy(),
                    state.writebacks.copy(),
                )
                state.run(lines, writes, engine=engine)
                done += 1
                cur_state = state.canonical()
                if done < run_len and _states_equal(cur_state, prev_state):
                    remaining = run_len - done
                    state.misses += (state.misses - before[0]) * remaining
                    state.hits += (state.hits - before[1]) * remaining
                    state.writebacks += (state.writebacks - before[2]) * remaining
                    state.touches += len(lines) * remaining
                    break
                prev_state = cur_state
        i = j
    state.flush()
    return state.counts()

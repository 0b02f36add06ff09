"""Cache-miss modeling without hardware counters.

Provides a byte-level access-trace abstraction, a multi-level
set-associative LRU simulator, and the analytic perfect-cache byte model
for CSR sparse matrix-vector products.

Simulator semantics: every access is split into cache-line touches; a touch
probes L1, then L2, then L3, cascading only on a miss (non-inclusive
hierarchy).  Each probed level installs or refreshes the line at MRU
position.  Writes allocate on miss and mark the touched line dirty at every
probed level; evicting a dirty line counts one writeback at that level (and
the counts returned by :func:`simulate` include a final flush of dirty
lines), but writebacks never count as misses.  There is no prefetcher, no
coherence protocol and no TLB: miss counts are a relative, comparative
measure, not a hardware digital twin.  Only data traffic is modeled.

Arrays live in a synthetic flat address space: placed back to back in
array-id order, each base aligned up to the line size, so results are
deterministic across platforms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np

from .errors import CacheConfigError, TraceError
from .records import LINE_SIZES

if TYPE_CHECKING:  # only needed for annotations; avoids an import cycle
    from .workloads.sparse import CsrMatrix

try:  # optional JIT; the pure-python engine is always available
    from numba import njit as _njit
except ImportError:  # pragma: no cover - exercised where numba is absent
    _njit = None

READ = 0
WRITE = 1

# engine='auto' switches to the JIT above this many line touches
_JIT_THRESHOLD = 100_000


@dataclass(frozen=True)
class CacheLevel:
    """Geometry of one cache level."""

    name: str
    size_bytes: int
    ways: int
    line_size: int = 64

    @property
    def sets(self) -> int:
        return self.size_bytes // (self.ways * self.line_size)


@dataclass(frozen=True)
class CacheConfig:
    """Ordered cache hierarchy (outermost level last), LRU, write-allocate."""

    levels: tuple[CacheLevel, ...]

    def __post_init__(self):
        if not self.levels:
            raise CacheConfigError("at least one cache level is required")
        line_sizes = {lvl.line_size for lvl in self.levels}
        if len(line_sizes) > 1:
            raise CacheConfigError(
                f"line size must be identical across levels, got {sorted(line_sizes)}"
            )
        for lvl in self.levels:
            if lvl.line_size not in LINE_SIZES:
                raise CacheConfigError(
                    f"{lvl.name}: line_size must be one of {LINE_SIZES}"
                )
            if lvl.ways < 1:
                raise CacheConfigError(f"{lvl.name}: ways must be >= 1")
            if lvl.size_bytes % (lvl.ways * lvl.line_size):
                raise CacheConfigError(
                    f"{lvl.name}: size must be divisible by ways * line_size"
                )
            sets = lvl.sets
            if sets < 1 or sets & (sets - 1):
                raise CacheConfigError(
                    f"{lvl.name}: number of sets must be a power of two, got {sets}"
                )
        names = [lvl.name for lvl in self.levels]
        if len(set(names)) != len(names):
            raise CacheConfigError(f"duplicate level names: {names}")

    @property
    def line_size(self) -> int:
        return self.levels[0].line_size

    @property
    def level_names(self) -> tuple[str, ...]:
        return tuple(lvl.name for lvl in self.levels)


def default_cache_config() -> CacheConfig:
    """One core's slice of a 10-core Xeon E5-2680v2 node, 64-byte lines.

    L1 32 KB 8-way, L2 256 KB 8-way, and a 2.5 MB 20-way share of the 25 MB
    L3.
    """
    return CacheConfig(
        levels=(
            CacheLevel("L1", 32 * 1024, 8),
            CacheLevel("L2", 256 * 1024, 8),
            CacheLevel("L3", 2560 * 1024, 20),
        )
    )


def parse_cache_config(data: Mapping) -> CacheConfig:
    """Build a config from a mapping with keys ``levels`` / ``line_size_bytes``.

    Each level entry carries ``name``, ``size_kb`` and ``ways``.
    """
    try:
        line_size = int(data.get("line_size_bytes", 64))
        levels = tuple(
            CacheLevel(
                name=str(entry["name"]),
                size_bytes=int(entry["size_kb"]) * 1024,
                ways=int(entry["ways"]),
                line_size=line_size,
            )
            for entry in data["levels"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CacheConfigError(f"malformed cache config: {exc}") from None
    return CacheConfig(levels=levels)


def load_cache_config(path: str | Path) -> CacheConfig:
    """Read a JSON cache configuration file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CacheConfigError(f"{path}: invalid JSON: {exc.msg}") from None
    return parse_cache_config(data)


class AccessTrace:
    """Ordered byte-level accesses over non-overlapping synthetic arrays.

    ``accesses`` is a sequence of ``(array_id, byte_offset, byte_length,
    kind)`` with kind ``"read"`` or ``"write"``; ``array_sizes`` maps each
    array id to its length in bytes.  Accesses must stay inside their array.
    """

    def __init__(self, accesses, array_sizes: Mapping[int, int]):
        self.array_sizes = dict(array_sizes)
        if isinstance(accesses, tuple) and len(accesses) == 4 and all(
            isinstance(a, np.ndarray) for a in accesses
        ):
            self.array_id, self.offset, self.length, self.kind = accesses
        else:
            rows = list(accesses)
            self.array_id = np.array([r[0] for r in rows], dtype=np.int64)
            self.offset = np.array([r[1] for r in rows], dtype=np.int64)
            self.length = np.array([r[2] for r in rows], dtype=np.int64)
            self.kind = np.array(
                [WRITE if r[3] == "write" else READ for r in rows], dtype=np.uint8
            )
        self._check()

    def _check(self):
        for aid, size in self.array_sizes.items():
            if size < 1:
                raise TraceError(f"array {aid} must have positive size, got {size}")
        if len(self.array_id) == 0:
            return
        known = np.array(sorted(self.array_sizes), dtype=np.int64)
        if not np.isin(self.array_id, known).all():
            raise TraceError("access references an unknown array id")
        if (self.length < 1).any():
            raise TraceError("byte_length must be >= 1")
        if (self.offset < 0).any():
            raise TraceError("byte_offset must be >= 0")
        sizes = np.zeros(int(known.max()) + 1, dtype=np.int64)
        for aid, size in self.array_sizes.items():
            sizes[aid] = size
        if (self.offset + self.length > sizes[self.array_id]).any():
            raise TraceError(
                "an access reaches past its array (arrays must not overlap)"
            )

    def __len__(self) -> int:
        return len(self.array_id)

    def __iter__(self):
        for aid, off, ln, kd in zip(self.array_id, self.offset, self.length, self.kind):
            yield int(aid), int(off), int(ln), "write" if kd == WRITE else "read"

    def base_addresses(self, line_size: int) -> dict[int, int]:
        """Array base addresses: back to back, aligned up to the line size."""
        bases = {}
        cursor = 0
        for aid in sorted(self.array_sizes):
            base = -(-cursor // line_size) * line_size
            bases[aid] = base
            cursor = base + self.array_sizes[aid]
        return bases

    def line_touches(self, line_size: int) -> tuple[np.ndarray, np.ndarray]:
        """Expand accesses into (line_id, is_write) touch arrays."""
        bases = self.base_addresses(line_size)
        base_arr = np.zeros(max(bases) + 1 if bases else 1, dtype=np.int64)
        for aid, base in bases.items():
            base_arr[aid] = base
        start = base_arr[self.array_id] + self.offset
        first = start // line_size
        last = (start + self.length - 1) // line_size
        counts = last - first + 1
        return _expand_ranges(first, counts, self.kind)


def _expand_ranges(first: np.ndarray, counts: np.ndarray, kinds: np.ndarray):
    """Enumerate [first, first+count) per access, preserving order."""
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.uint8)
    starts = np.cumsum(counts) - counts
    lines = np.repeat(first, counts) + (np.arange(total) - np.repeat(starts, counts))
    writes = np.repeat(kinds, counts)
    return lines.astype(np.int64), writes.astype(np.uint8)


@dataclass(frozen=True)
class MissCounts:
    """Per-level hit/miss/writeback counts for one simulated trace.

    ``total_accesses`` counts cache-line touches; hits plus misses at the
    first level equal it.  Writebacks include the end-of-trace flush of
    dirty lines and never count as misses.
    """

    misses: dict[str, int]
    hits: dict[str, int]
    writebacks: dict[str, int]
    total_accesses: int


class _CacheState:
    """Flattened tag/LRU-age/dirty arrays for all levels of a config."""

    def __init__(self, config: CacheConfig):
        self.config = config
        nl = len(config.levels)
        self.sets = np.array([lvl.sets for lvl in config.levels], dtype=np.int64)
        self.ways = np.array([lvl.ways for lvl in config.levels], dtype=np.int64)
        lines = self.sets * self.ways
        self.offsets = np.concatenate(([0], np.cumsum(lines))).astype(np.int64)
        total = int(lines.sum())
        self.tags = np.full(total, -1, dtype=np.int64)
        self.age = np.zeros(total, dtype=np.int64)
        self.dirty = np.zeros(total, dtype=np.uint8)
        self.tick = 1
        self.misses = np.zeros(nl, dtype=np.int64)
        self.hits = np.zeros(nl, dtype=np.int64)
        self.writebacks = np.zeros(nl, dtype=np.int64)
        self.touches = 0

    def run(self, lines: np.ndarray, writes: np.ndarray, engine: str = "auto"):
        kernel = _pick_engine(engine, len(lines))
        self.tick = int(
            kernel(
                lines,
                writes,
                len(self.config.levels),
                self.sets,
                self.ways,
                self.offsets,
                self.tags,
                self.age,
                self.dirty,
                self.tick,
                self.misses,
                self.hits,
                self.writebacks,
            )
        )
        self.touches += len(lines)

    def flush(self):
        """Count remaining dirty lines as writebacks and clean them."""
        for lv in range(len(self.config.levels)):
            lo, hi = self.offsets[lv], self.offsets[lv + 1]
            self.writebacks[lv] += int(self.dirty[lo:hi].sum())
            self.dirty[lo:hi] = 0

    def canonical(self):
        """State snapshot comparable across iterations (ages rank-reduced)."""
        parts = []
        for lv in range(len(self.config.levels)):
            lo, hi = self.offsets[lv], self.offsets[lv + 1]
            ways = int(self.ways[lv])
            age = self.age[lo:hi].reshape(-1, ways)
            ranks = np.argsort(np.argsort(age, axis=1, kind="stable"), axis=1)
            parts.append((self.tags[lo:hi].copy(), ranks, self.dirty[lo:hi].copy()))
        return parts

    def counts(self) -> MissCounts:
        names = self.config.level_names
        return MissCounts(
            misses={n: int(m) for n, m in zip(names, self.misses)},
            hits={n: int(h) for n, h in zip(names, self.hits)},
            writebacks={n: int(w) for n, w in zip(names, self.writebacks)},
            total_accesses=self.touches,
        )


def _sim_kernel(
    lines, writes, nlev, sets, ways, offsets, tags, age, dirty, tick, miss, hit, wb
):
    for t in range(lines.shape[0]):
        line = lines[t]
        w = writes[t]
        for lv in range(nlev):
            nsets = sets[lv]
            nways = ways[lv]
            row = offsets[lv] + (line & (nsets - 1)) * nways
            found = -1
            for wy in range(nways):
                if tags[row + wy] == line:
                    found = wy
                    break
            if found >= 0:
                hit[lv] += 1
                age[row + found] = tick
                tick += 1
                if w:
                    dirty[row + found] = 1
                break
            miss[lv] += 1
            victim = 0
            oldest = age[row]
            for wy in range(1, nways):
                if age[row + wy] < oldest:
                    oldest = age[row + wy]
                    victim = wy
            if tags[row + victim] != -1 and dirty[row + victim] == 1:
                wb[lv] += 1
            tags[row + victim] = line
            age[row + victim] = tick
            tick += 1
            dirty[row + victim] = 1 if w else 0
    return tick


_jit_kernel = None


def _pick_engine(engine: str, touches: int):
    global _jit_kernel
    if engine not in ("auto", "python", "numba"):
        raise CacheConfigError(f"unknown engine {engine!r}")
    want_jit = engine == "numba" or (
        engine == "auto" and _njit is not None and touches >= _JIT_THRESHOLD
    )
    if want_jit:
        if _njit is None:
            raise CacheConfigError("numba engine requested but numba is not installed")
        if _jit_kernel is None:
            _jit_kernel = _njit(cache=True, nogil=True)(_sim_kernel)
        return _jit_kernel
    return _sim_kernel


def simulate(trace: AccessTrace, config: CacheConfig, engine: str = "auto") -> MissCounts:
    """Drive a trace through the hierarchy and count hits/misses/writebacks."""
    lines, writes = trace.line_touches(config.line_size)
    state = _CacheState(config)
    state.run(lines, writes, engine=engine)
    state.flush()
    return state.counts()


def memory_traffic_bytes(counts: MissCounts, config: CacheConfig) -> int:
    """Bytes exchanged with memory: last-level fills plus writebacks."""
    last = config.level_names[-1]
    return (counts.misses[last] + counts.writebacks[last]) * config.line_size


def perfect_cache_spmv_bytes(m: int, n: int, nnz: int) -> int:
    """Perfect-cache byte model of one CSR SpMV.

    Every operand moves exactly once: 8-byte values and 4-byte column
    indices (12 bytes per nonzero), 4-byte row offsets, the input vector
    loaded once, and the output vector loaded and stored once.
    """
    if m < 0 or n < 0 or nnz < 0:
        raise TraceError("matrix dimensions and nnz must be nonnegative")
    return 12 * nnz + 4 * (m + 1) + 8 * n + 16 * m


# array ids of the canonical SpMV trace
SPMV_ARRAYS = {"row_offsets": 0, "column_indices": 1, "values": 2, "x": 3, "y": 4}


def _spmv_access_arrays(
    row_offsets: np.ndarray,
    column_indices: np.ndarray,
    ids: Sequence[int],
):
    """Canonical CSR SpMV access sequence as raw access arrays.

    Per row: read the two bounding row offsets, then per nonzero read the
    column index, the value and the gathered x entry, then write y once.
    ``ids`` gives the array ids of (offsets, columns, values, x, y).
    """
    off_id, col_id, val_id, x_id, y_id = ids
    m = len(row_offsets) - 1
    nnz = int(row_offsets[-1])
    rowcounts = np.diff(row_offsets)
    total = 3 * m + 3 * nnz
    aid = np.empty(total, dtype=np.int64)
    off = np.empty(total, dtype=np.int64)
    ln = np.empty(total, dtype=np.int64)
    kd = np.zeros(total, dtype=np.uint8)

    per_row = 3 + 3 * rowcounts
    starts = np.cumsum(per_row) - per_row
    rows = np.arange(m, dtype=np.int64)

    aid[starts] = off_id
    off[starts] = 4 * rows
    ln[starts] = 4
    aid[starts + 1] = off_id
    off[starts + 1] = 4 * (rows + 1)
    ln[starts + 1] = 4

    ypos = starts + per_row - 1
    aid[ypos] = y_id
    off[ypos] = 8 * rows
    ln[ypos] = 8
    kd[ypos] = WRITE

    if nnz:
        j = np.arange(nnz, dtype=np.int64)
        row_of = np.repeat(rows, rowcounts)
        within = j - np.repeat(row_offsets[:-1], rowcounts)
        base = starts[row_of] + 2 + 3 * within
        aid[base] = col_id
        off[base] = 4 * j
        ln[base] = 4
        aid[base + 1] = val_id
        off[base + 1] = 8 * j
        ln[base + 1] = 8
        aid[base + 2] = x_id
        off[base + 2] = 8 * column_indices.astype(np.int64)
        ln[base + 2] = 8
    return aid, off, ln, kd


def trace_spmv(a: "CsrMatrix", x_len: int) -> AccessTrace:
    """Byte-level access trace of one SpMV with the given input length."""
    if x_len < a.n:
        raise TraceError(f"x_len must be >= matrix width {a.n}, got {x_len}")
    arrays = {
        SPMV_ARRAYS["row_offsets"]: 4 * (a.m + 1),
        SPMV_ARRAYS["column_indices"]: max(4 * a.nnz, 1),
        SPMV_ARRAYS["values"]: max(8 * a.nnz, 1),
        SPMV_ARRAYS["x"]: 8 * x_len,
        SPMV_ARRAYS["y"]: 8 * a.m,
    }
    accesses = _spmv_access_arrays(
        np.asarray(a.row_offsets, dtype=np.int64),
        np.asarray(a.column_indices),
        ids=(0, 1, 2, 3, 4),
    )
    return AccessTrace(accesses, arrays)

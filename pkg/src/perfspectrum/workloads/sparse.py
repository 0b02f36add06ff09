"""Compressed-sparse-row matrices sized for the diffusion benchmark.

Column indices are stored as 32-bit ints and values as 64-bit floats,
matching the 4-byte-index / 8-byte-value accounting used by the cache
traffic models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class CsrMatrix:
    """CSR operator with sorted, in-range column indices per row."""

    row_offsets: np.ndarray
    column_indices: np.ndarray
    values: np.ndarray
    m: int
    n: int

    @property
    def nnz(self) -> int:
        return int(self.row_offsets[-1])

    @classmethod
    def from_coo(
        cls, rows: np.ndarray, cols: np.ndarray, vals: np.ndarray, m: int, n: int
    ) -> "CsrMatrix":
        """Build CSR from triplets, summing duplicate entries."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size:
            key = rows * n + cols
            starts = np.flatnonzero(np.diff(key, prepend=key[0] - 1))
            summed = np.add.reduceat(vals, starts)
            rows, cols = rows[starts], cols[starts]
        else:
            summed = vals
        offsets = np.zeros(m + 1, dtype=np.int64)
        np.add.at(offsets, rows + 1, 1)
        np.cumsum(offsets, out=offsets)
        return cls(
            row_offsets=offsets,
            column_indices=cols.astype(np.int32),
            values=summed,
            m=m,
            n=n,
        )

    def validate(self) -> None:
        off = self.row_offsets
        if off.shape != (self.m + 1,) or off[0] != 0 or off[-1] != len(self.values):
            raise ValueError("row_offsets inconsistent with matrix shape")
        if np.any(np.diff(off) < 0):
            raise ValueError("row_offsets must be nondecreasing")
        cols = self.column_indices
        if len(cols) != len(self.values):
            raise ValueError("column_indices and values length mismatch")
        if cols.size and (cols.min() < 0 or cols.max() >= self.n):
            raise ValueError("column index out of range")
        row_of = np.repeat(np.arange(self.m), np.diff(off))
        interior = np.diff(cols) <= 0
        same_row = np.diff(row_of) == 0
        if cols.size > 1 and np.any(interior & same_row):
            raise ValueError("column indices must be strictly increasing within rows")

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Dense matrix-vector product; deterministic per-row summation."""
        prod = self.values * x[self.column_indices]
        return _row_sums(prod, self.row_offsets, self.m)

    def diagonal(self) -> np.ndarray:
        """Main diagonal; absent entries are zero."""
        off = self.row_offsets
        row_of = np.repeat(np.arange(self.m, dtype=np.int64), np.diff(off))
        diag = np.zeros(self.m)
        hit = self.column_indices == row_of
        diag[row_of[hit]] = self.values[hit]
        return diag

    def dense(self) -> np.ndarray:
        out = np.zeros((self.m, self.n))
        row_of = np.repeat(np.arange(self.m), np.diff(self.row_offsets))
        out[row_of, self.column_indices] = self.values
        return out


def _row_sums(prod: np.ndarray, offsets: np.ndarray, m: int) -> np.ndarray:
    """Segment sums of ``prod`` by row, robust to empty rows."""
    if prod.size == 0:
        return np.zeros(m)
    starts = offsets[:-1]
    counts = np.diff(offsets)
    safe = np.minimum(starts, prod.size - 1)
    sums = np.add.reduceat(prod, safe)
    return np.where(counts > 0, sums, 0.0)

"""Structured tetrahedral meshes of the unit cube and DOF counting.

Each of the ``n**3`` axis-aligned cells is split into six tetrahedra that
share the cell's main diagonal (the classic Freudenthal/Kuhn subdivision),
giving ``6*n**3`` positively oriented elements over ``(n+1)**3`` grid
vertices with mesh size ``h = 1/n``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..errors import MeshError
from ..records import DISCRETIZATIONS


def count_dofs(n: int, discretization: str) -> int:
    """Total degrees of freedom on an n-cell-per-side unit-cube mesh.

    Continuous elements share grid nodes; discontinuous elements give each
    of the ``6*n**3`` tetrahedra its own copy (4 nodes for P1, 10 for P2).
    """
    if n < 1:
        raise MeshError(f"n must be >= 1, got {n}")
    if discretization == "CG1":
        return (n + 1) ** 3
    if discretization == "CG2":
        return (2 * n + 1) ** 3
    if discretization == "DG1":
        return 24 * n**3
    if discretization == "DG2":
        return 60 * n**3
    raise MeshError(
        f"unknown discretization {discretization!r}; expected one of {DISCRETIZATIONS}"
    )


def _tet_types() -> tuple[np.ndarray, np.ndarray]:
    """Vertex offsets (6,4,3) and reference gradients (6,4,3) per tet type.

    Type ``t`` walks from cell corner (0,0,0) to (1,1,1) along the axis
    order of the t-th permutation; vertex order is flipped for odd
    permutations so every element is positively oriented.
    """
    eye = np.eye(3, dtype=np.int64)
    offsets = np.empty((6, 4, 3), dtype=np.int64)
    for t, perm in enumerate(itertools.permutations(range(3))):
        verts = np.array(
            [
                (0, 0, 0),
                eye[perm[0]],
                eye[perm[0]] + eye[perm[1]],
                (1, 1, 1),
            ],
            dtype=np.int64,
        )
        parity = sum(
            1
            for i in range(3)
            for j in range(i + 1, 3)
            if perm[i] > perm[j]
        )
        if parity % 2:
            verts[[1, 2]] = verts[[2, 1]]
        offsets[t] = verts
    grads = np.empty((6, 4, 3))
    for t in range(6):
        x = offsets[t].astype(float)
        vandermonde = np.hstack([np.ones((4, 1)), x])
        coeffs = np.linalg.inv(vandermonde)
        grads[t] = coeffs[1:4].T
    return offsets, grads


TET_OFFSETS, TET_REF_GRADS = _tet_types()
TET_CENTROIDS = TET_OFFSETS.mean(axis=1)


@dataclass(frozen=True)
class StructuredTetMesh:
    """Freudenthal six-tet decomposition of the unit cube, ``h = 1/n``."""

    n: int
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise MeshError(f"n must be >= 1, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def vertex_count(self) -> int:
        return (self.n + 1) ** 3

    @property
    def element_count(self) -> int:
        return 6 * self.n**3

    @property
    def element_volume(self) -> float:
        return 1.0 / (6 * self.n**3)

    @property
    def interior_count(self) -> int:
        return (self.n - 1) ** 3

    def vertex_index(self, i, j, k):
        """Grid coordinates to lexicographic vertex id (k fastest)."""
        m = self.n + 1
        return (i * m + j) * m + k

    def vertices(self) -> np.ndarray:
        """Vertex coordinates, shape ``(vertex_count, 3)``."""
        if "vertices" not in self._cache:
            m = self.n + 1
            grid = np.arange(m, dtype=float) / self.n
            i, j, k = np.meshgrid(grid, grid, grid, indexing="ij")
            self._cache["vertices"] = np.stack(
                [i.ravel(), j.ravel(), k.ravel()], axis=1
            )
        return self._cache["vertices"]

    def cell_grid(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Integer cell coordinates, each flattened to length ``n**3``."""
        r = np.arange(self.n, dtype=np.int64)
        i, j, k = np.meshgrid(r, r, r, indexing="ij")
        return i.ravel(), j.ravel(), k.ravel()

    def type_elements(self, t: int) -> np.ndarray:
        """Global vertex ids of every type-``t`` element, shape ``(n**3, 4)``."""
        key = ("type", t)
        if key not in self._cache:
            i, j, k = self.cell_grid()
            cols = []
            for a in range(4):
                di, dj, dk = TET_OFFSETS[t, a]
                cols.append(self.vertex_index(i + di, j + dj, k + dk))
            self._cache[key] = np.stack(cols, axis=1)
        return self._cache[key]

    def elements(self) -> np.ndarray:
        """All element connectivity, type-major then cell-lexicographic."""
        if "elements" not in self._cache:
            self._cache["elements"] = np.concatenate(
                [self.type_elements(t) for t in range(6)], axis=0
            )
        return self._cache["elements"]

    def interior_ids(self) -> np.ndarray:
        """Vertex ids of the ``(n-1)**3`` interior grid points, lexicographic."""
        if "interior" not in self._cache:
            r = np.arange(1, self.n, dtype=np.int64)
            i, j, k = np.meshgrid(r, r, r, indexing="ij")
            self._cache["interior"] = self.vertex_index(
                i.ravel(), j.ravel(), k.ravel()
            )
        return self._cache["interior"]


def build_mesh(n: int) -> StructuredTetMesh:
    """Mesh the unit cube with ``n`` segments per side."""
    return StructuredTetMesh(n)

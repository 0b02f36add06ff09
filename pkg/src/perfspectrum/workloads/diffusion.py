"""Steady-diffusion benchmark problem on the unit cube.

The boundary value problem is ``-div(D(x) grad c) = f`` with homogeneous
Dirichlet conditions on all faces.  The prescribed solution is

    c(x, y, z) = sin(2 pi x) sin(2 pi y) sin(2 pi z)

and the diffusivity is the radially anisotropic field

    D(x) = alpha * (|x|^2 I - x x^T) + I,

so ``alpha = 0`` recovers the Laplacian with ``f = 12 pi^2 c``.  The forcing
for general alpha is the closed form of ``-div(D grad c)``.

Assembly uses piecewise-linear (CG1) elements: exact constant gradients per
tetrahedron, the tensor evaluated at element centroids, loads integrated
with a degree-2 rule, and the L2 error with a degree-5 rule.  The operator
is restricted to interior vertices by symmetric elimination of the
boundary rows and columns.
"""

from __future__ import annotations

import numpy as np

from ..errors import MeshError
from .mesh import TET_CENTROIDS, TET_OFFSETS, TET_REF_GRADS, StructuredTetMesh
from .quadrature import degree2_rule, degree5_rule
from .solver import FlopCounter
from .sparse import CsrMatrix

TWO_PI = 2.0 * np.pi

# Manual FLOP estimate per element for stiffness + load assembly under the
# "every floating add/multiply/divide counts 1" convention (tensor at the
# centroid: 18; 4x3 by 3x3 by 3x4 stiffness product and scaling: 156;
# forcing at four quadrature points plus weighting: 156).
ASSEMBLY_FLOPS_PER_ELEMENT = 330


def exact_solution(x: np.ndarray) -> np.ndarray:
    """Prescribed concentration field; ``x`` has shape ``(..., 3)``."""
    x = np.asarray(x, dtype=float)
    return (
        np.sin(TWO_PI * x[..., 0])
        * np.sin(TWO_PI * x[..., 1])
        * np.sin(TWO_PI * x[..., 2])
    )


def diffusivity_tensor(x: np.ndarray, alpha: float) -> np.ndarray:
    """Anisotropic diffusivity ``alpha (|x|^2 I - x x^T) + I`` at ``x``.

    Accepts a single point ``(3,)`` or a batch ``(..., 3)``; returns
    ``(..., 3, 3)``.  The result is symmetric by construction and reduces
    to the identity for ``alpha = 0`` or at the origin.
    """
    x = np.asarray(x, dtype=float)
    xs, ys, zs = x[..., 0], x[..., 1], x[..., 2]
    out = np.empty(x.shape[:-1] + (3, 3))
    out[..., 0, 0] = alpha * (ys * ys + zs * zs) + 1.0
    out[..., 1, 1] = alpha * (xs * xs + zs * zs) + 1.0
    out[..., 2, 2] = alpha * (xs * xs + ys * ys) + 1.0
    out[..., 0, 1] = out[..., 1, 0] = -alpha * xs * ys
    out[..., 0, 2] = out[..., 2, 0] = -alpha * xs * zs
    out[..., 1, 2] = out[..., 2, 1] = -alpha * ys * zs
    return out


def forcing(x: np.ndarray, alpha: float) -> np.ndarray:
    """Closed-form ``-div(D grad c)`` for the prescribed solution.

    Derived by expanding the divergence of ``D grad c`` with
    ``D = alpha (|x|^2 I - x x^T) + I``:

        f = 12 pi^2 c
            + alpha * (2 x . grad c + 8 pi^2 |x|^2 c + 8 pi^2 mix)

    where ``mix = xy cx cy sz + xz cx sy cz + yz sx cy cz`` collects the
    off-diagonal second derivatives (s/c denoting sin/cos of 2 pi times
    each coordinate).
    """
    x = np.asarray(x, dtype=float)
    xs, ys, zs = x[..., 0], x[..., 1], x[..., 2]
    sx, cx = np.sin(TWO_PI * xs), np.cos(TWO_PI * xs)
    sy, cy = np.sin(TWO_PI * ys), np.cos(TWO_PI * ys)
    sz, cz = np.sin(TWO_PI * zs), np.cos(TWO_PI * zs)
    c = sx * sy * sz
    base = 12.0 * np.pi**2 * c
    if alpha == 0:
        return base
    x_dot_grad = TWO_PI * (xs * cx * sy * sz + ys * sx * cy * sz + zs * sx * sy * cz)
    r2 = xs * xs + ys * ys + zs * zs
    mix = xs * ys * cx * cy * sz + xs * zs * cx * sy * cz + ys * zs * sx * cy * cz
    return base + alpha * (
        2.0 * x_dot_grad + 8.0 * np.pi**2 * r2 * c + 8.0 * np.pi**2 * mix
    )


def manufactured_solution(x: np.ndarray, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact solution and matching forcing term at ``x``."""
    return exact_solution(x), forcing(x, alpha)


def _stiffness_triplets(mesh: StructuredTetMesh, alpha: float):
    """COO triplets of the full (pre-elimination) stiffness matrix."""
    h = mesh.h
    ci, cj, ck = mesh.cell_grid()
    corners = np.stack([ci, cj, ck], axis=1).astype(float)
    rows, cols, vals = [], [], []
    for t in range(6):
        gids = mesh.type_elements(t)
        centroids = (corners + TET_CENTROIDS[t]) * h
        d = diffusivity_tensor(centroids, alpha)
        g = TET_REF_GRADS[t]
        gd = np.einsum("ai,eij->eaj", g, d)
        k = np.einsum("eaj,bj->eab", gd, g) * (h / 6.0)
        # mirror the upper triangle so K (and hence A) is exactly symmetric
        k = np.triu(k) + np.triu(k, 1).transpose(0, 2, 1)
        e = gids.shape[0]
        rows.append(np.broadcast_to(gids[:, :, None], (e, 4, 4)).ravel())
        cols.append(np.broadcast_to(gids[:, None, :], (e, 4, 4)).ravel())
        vals.append(k.ravel())
    return (
        np.concatenate(rows),
        np.concatenate(cols),
        np.concatenate(vals),
    )


def _load_vector(mesh: StructuredTetMesh, alpha: float) -> np.ndarray:
    """Full load vector, degree-2 quadrature of the forcing term."""
    h = mesh.h
    vol = mesh.element_volume
    lam, w = degree2_rule()
    ci, cj, ck = mesh.cell_grid()
    corners = np.stack([ci, cj, ck], axis=1).astype(float)
    b = np.zeros(mesh.vertex_count)
    for t in range(6):
        gids = mesh.type_elements(t)
        offs = TET_OFFSETS[t].astype(float)
        contrib = np.zeros((gids.shape[0], 4))
        for q in range(len(w)):
            xq = (corners + lam[q] @ offs) * h
            fq = forcing(xq, alpha)
            contrib += (vol * w[q]) * fq[:, None] * lam[q][None, :]
        b += np.bincount(gids.ravel(), weights=contrib.ravel(), minlength=mesh.vertex_count)
    return b


def assemble_full_stiffness(
    mesh: StructuredTetMesh, alpha: float, counter: FlopCounter | None = None
) -> CsrMatrix:
    """Stiffness matrix over all vertices, Dirichlet rows included."""
    rows, cols, vals = _stiffness_triplets(mesh, alpha)
    if counter is not None:
        counter.add("assembly", mesh.element_count * ASSEMBLY_FLOPS_PER_ELEMENT)
    nverts = mesh.vertex_count
    return CsrMatrix.from_coo(rows, cols, vals, nverts, nverts)


def assemble_system(
    mesh: StructuredTetMesh, alpha: float, counter: FlopCounter | None = None
) -> tuple[CsrMatrix, np.ndarray]:
    """Interior stiffness matrix and load vector for the benchmark BVP.

    Boundary vertices are eliminated symmetrically; with zero prescribed
    values the right-hand side needs no lifting.  The result is symmetric
    positive definite.
    """
    if mesh.n < 2:
        raise MeshError(f"n must be >= 2 for a nonempty interior, got {mesh.n}")
    rows, cols, vals = _stiffness_triplets(mesh, alpha)
    if counter is not None:
        counter.add("assembly", mesh.element_count * ASSEMBLY_FLOPS_PER_ELEMENT)
    interior = mesh.interior_ids()
    n_int = interior.size
    remap = np.full(mesh.vertex_count, -1, dtype=np.int64)
    remap[interior] = np.arange(n_int, dtype=np.int64)
    keep = (remap[rows] >= 0) & (remap[cols] >= 0)
    a = CsrMatrix.from_coo(
        remap[rows[keep]], remap[cols[keep]], vals[keep], n_int, n_int
    )
    b = _load_vector(mesh, alpha)[interior]
    return a, b


def l2_error(u: np.ndarray, mesh: StructuredTetMesh) -> float:
    """L2 norm of ``u_h - c`` with a degree-5 rule per element.

    ``u`` holds the interior nodal values (lexicographic interior order);
    boundary values are zero.
    """
    if mesh.n < 2:
        raise MeshError(f"n must be >= 2 for a nonempty interior, got {mesh.n}")
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.interior_count,):
        raise MeshError(
            f"expected {mesh.interior_count} interior values, got {u.shape}"
        )
    full = np.zeros(mesh.vertex_count)
    full[mesh.interior_ids()] = u
    h = mesh.h
    vol = mesh.element_volume
    lam, w = degree5_rule()
    ci, cj, ck = mesh.cell_grid()
    corners = np.stack([ci, cj, ck], axis=1).astype(float)
    total = 0.0
    for t in range(6):
        gids = mesh.type_elements(t)
        ue = full[gids]
        offs = TET_OFFSETS[t].astype(float)
        for q in range(len(w)):
            xq = (corners + lam[q] @ offs) * h
            diff = ue @ lam[q] - exact_solution(xq)
            total += vol * w[q] * float(np.dot(diff, diff))
    return float(np.sqrt(total))

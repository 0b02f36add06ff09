"""Built-in benchmark workloads: meshes, diffusion assembly, solver, triad."""

from .bench import BenchConfig, run_benchmark, stream_triad, measure_triad
from .diffusion import (
    assemble_full_stiffness,
    assemble_system,
    diffusivity_tensor,
    exact_solution,
    forcing,
    l2_error,
    manufactured_solution,
)
from .mesh import StructuredTetMesh, build_mesh, count_dofs
from .solver import CgResult, FlopCounter, solve_cg_jacobi
from .sparse import CsrMatrix

__all__ = [
    "BenchConfig",
    "CgResult",
    "CsrMatrix",
    "FlopCounter",
    "StructuredTetMesh",
    "assemble_full_stiffness",
    "assemble_system",
    "build_mesh",
    "count_dofs",
    "diffusivity_tensor",
    "exact_solution",
    "forcing",
    "l2_error",
    "manufactured_solution",
    "measure_triad",
    "run_benchmark",
    "solve_cg_jacobi",
    "stream_triad",
]

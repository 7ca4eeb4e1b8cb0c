"""Patch-reconstruction discontinuous Galerkin method with one unknown per element.

Typical use::

    from patchdg import make_case, triangulate_unit_square, solve_problem
    case = make_case("ex1a", nu=1.0)
    mesh = triangulate_unit_square(16)
    dofs, recon, system = solve_problem(case.spec, mesh, k=2)
"""

__version__ = "0.1.0"

from .analysis import dg_energy_error, dg_norm, error_function, l2_error, l2_norm, rates, supg_error, supg_norm
from .assembly import SparseSystem, assemble, evaluate_solution, solve
from .cases import CASES, make_case
from .errors import (
    GeometryError,
    InvalidInputError,
    MeshError,
    MeshParseError,
    PatchDGError,
    PointLocationError,
    SolverError,
    UnisolvenceError,
)
from .forms import ProblemSpec
from .mesh import PolyMesh, general_voronoi_mesh, polygonal_mesh, read_mesh, triangulate_unit_square, voronoi_mesh, write_mesh
from .patch import build_patch, build_patches, default_patch_size
from .reconstruct import Reconstruction, reconstruct_field, build_reconstruction_basis


def solve_problem(spec, mesh, k, patch_size=None, sigma=None):
    """Reconstruct, assemble and solve on ``mesh``; returns ``(dofs, recon, system)``."""
    M = default_patch_size(mesh.family, k) if patch_size is None else patch_size
    recon = build_reconstruction_basis(mesh, build_patches(mesh, M), k)
    system = assemble(recon, spec, sigma=sigma)
    return solve(system), recon, system

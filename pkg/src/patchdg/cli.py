"""Command-line driver: convergence tables and solution samples.

Examples
--------
Convergence table on uniform triangulations::

    patchdg --example ex1a --mesh tri --k 1 --nu 1 --n 8,16,32

Solution samples of the internal-layer problem on a 21 x 21 grid::

    patchdg --example ex4 --mesh voronoi --cells 640 --k 2 --nu 1e-9 --sample-grid 21
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

import numpy as np

from . import __version__
from .analysis import RunRecord, dg_norm, error_function, l2_norm, rates, supg_norm
from .assembly import assemble, default_penalty, default_quadrature, dump_matrix, evaluate_solution, solve
from .cases import CASES, make_case
from .errors import InvalidInputError, PatchDGError
from .mesh import general_voronoi_mesh, polygonal_mesh, read_mesh, triangulate_unit_square
from .patch import build_patches, default_patch_size
from .reconstruct import build_reconstruction_basis

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["example", "mesh", "k", "nu", "ncells", "dofs", "h", "l2", "dg", "supg", "rate_l2", "rate_dg", "rate_supg"]
MESH_FAMILIES = ("tri", "poly", "voronoi")
_FAMILY_NAMES = {"tri": "triangulation", "poly": "polygonal", "voronoi": "voronoi"}


def _int_list(text):
    try:
        values = [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("sizes must be positive integers")
    return values


def build_mesh(family, size, seed=0, mesh_file=None):
    """Mesh of ``family`` at refinement ``size`` (subdivisions for tri, cells otherwise).

    With ``mesh_file`` the mesh is read instead and ``size`` is ignored.
    """
    if mesh_file:
        return read_mesh(mesh_file, family=_FAMILY_NAMES.get(family, family))
    if family == "tri":
        return triangulate_unit_square(size)
    if family == "poly":
        return polygonal_mesh(size, rng_seed=seed)
    if family == "voronoi":
        return general_voronoi_mesh(size, rng_seed=seed)
    raise InvalidInputError(f"unknown mesh family {family!r}")


def solve_case(case, mesh, k, patch_size=None, sigma=None, quad_order=None, solver="direct", dump=None):
    """Assemble and solve ``case`` on ``mesh``; returns ``(dofs, recon, system)``."""
    M = default_patch_size(mesh.family, k) if patch_size is None else patch_size
    recon = build_reconstruction_basis(mesh, build_patches(mesh, M), k)
    quad = default_quadrature(recon, quad_order, quad_order)
    system = assemble(recon, case.spec, sigma=sigma, quad=quad)
    if dump:
        dump_matrix(system, dump)
    return solve(system, method=solver), recon, system


def run_convergence(case, family, k, sizes, patch_size=None, sigma=None, quad_order=None, seed=0,
                    solver="direct", mesh_file=None, dump=None):
    """Solve on each refinement and collect errors and observed rates.

    ``dump`` names a MatrixMarket file for the matrix of the last run.

    Returns
    -------
    records : list of RunRecord
    table : list of dict
        One row per run with the CSV columns; rates are ``nan`` on the first
        row and are computed against ``h`` for triangulations and
        ``dofs ** -0.5`` otherwise.
    """
    if not case.has_exact:
        raise InvalidInputError(f"{case.name} has no exact solution; use --sample-grid")
    spec = case.spec
    records = []
    for i, size in enumerate(sizes):
        t0 = time.perf_counter()
        mesh = build_mesh(family, size, seed, mesh_file)
        last = dump if i == len(sizes) - 1 else None
        dofs, recon, system = solve_case(case, mesh, k, patch_size, sigma, quad_order, solver, last)
        err = error_function(spec, recon, dofs)
        q = system.quad
        rec = RunRecord(
            f"{family}-{mesh.n_elements}",
            float(mesh.h),
            mesh.n_elements,
            {"l2": l2_norm(err, q), "dg": dg_norm(err, spec, q), "supg": supg_norm(err, spec, q, recon)},
        )
        records.append(rec)
        logger.info("%s: %d cells, l2=%.3e (%.1fs)", rec.label, rec.dofs, rec.errors["l2"], time.perf_counter() - t0)

    use_dofs = family != "tri"
    table = []
    rate_cols = {}
    if len(records) > 1:
        for key in ("l2", "dg", "supg"):
            rate_cols[key] = [float("nan")] + rates(records, key, use_dofs=use_dofs)
    for i, rec in enumerate(records):
        row = {
            "example": case.name, "mesh": family, "k": k, "nu": spec.nu,
            "ncells": rec.dofs, "dofs": rec.dofs, "h": rec.h,
        }
        row.update(rec.errors)
        for key in ("l2", "dg", "supg"):
            row[f"rate_{key}"] = rate_cols[key][i] if rate_cols else float("nan")
        table.append(row)
    return records, table


def run_solve(case, mesh, k, grid, patch_size=None, sigma=None, quad_order=None, solver="direct", dump=None):
    """Solve once and sample ``u_h`` on a ``grid x grid`` uniform grid of the unit square.

    Grid points on the boundary are nudged inwards by ``1e-9`` so that every
    sample lies in an element.
    """
    dofs, recon, _ = solve_case(case, mesh, k, patch_size, sigma, quad_order, solver, dump)
    t = np.linspace(0.0, 1.0, grid)
    t = np.clip(t, 1e-9, 1.0 - 1e-9)
    X, Y = np.meshgrid(t, t, indexing="xy")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    vals = evaluate_solution(dofs, recon, pts)
    if not np.all(np.isfinite(vals)):
        raise PatchDGError("solution samples are not finite")
    return pts, vals


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return "%.17g" % x if np.isfinite(x) else "nan"


def config_header(args, k, patch_size, sigma, quad_order):
    lines = [
        f"# patchdg {__version__}",
        f"# example={args.example} mesh={args.mesh} k={k} M={patch_size} sigma={_fmt(sigma)} nu={_fmt(args.nu)}",
        f"# quad_volume={quad_order} quad_edge={quad_order} seed={args.seed} solver={args.solver}",
    ]
    if args.example == "ex2":
        lines.append(f"# l1={_fmt(args.l1)} l2={_fmt(args.l2)}")
    if not args.deterministic:
        lines.append(f"# date={time.strftime('%Y-%m-%dT%H:%M:%S')}")
    return "\n".join(lines) + "\n"


def build_parser():
    p = argparse.ArgumentParser(prog="patchdg", description="Patch-reconstruction DG solver for convection-diffusion-reaction problems.")
    p.add_argument("--example", choices=CASES, required=True)
    p.add_argument("--mesh", choices=MESH_FAMILIES, default="tri")
    p.add_argument("--mesh-file", help="read the mesh from a file instead of generating it")
    p.add_argument("--k", type=int, default=1, help="reconstruction order")
    p.add_argument("--nu", type=float, default=1.0, help="diffusivity")
    sizes = p.add_mutually_exclusive_group()
    sizes.add_argument("--cells", type=_int_list, help="target cell counts, comma separated (poly, voronoi)")
    sizes.add_argument("--n", type=_int_list, help="subdivisions per side, comma separated (tri)")
    p.add_argument("--patch-size", type=int, help="patch cardinality (default from the mesh family and k)")
    p.add_argument("--sigma", type=float, help="penalty parameter (default 3k(k+1))")
    p.add_argument("--l1", type=float, default=0.5, help="layer position for ex2")
    p.add_argument("--l2", type=float, default=0.05, help="layer width for ex2")
    p.add_argument("--seed", type=int, default=0, help="seed of the Voronoi generators")
    p.add_argument("--quad-order", type=int, help="quadrature exactness order (default 2k+2)")
    p.add_argument("--solver", choices=("direct", "gmres"), default="direct")
    p.add_argument("--deterministic", action="store_true", help="omit run-dependent header lines")
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.add_argument("--dump-matrix", help="write the matrix of the last run in MatrixMarket format")
    p.add_argument("--sample-grid", type=int, help="sample the solution on an m x m grid instead of a convergence run")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    if args.k < 0:
        parser.error("--k must be non-negative")
    if args.nu <= 0:
        parser.error("--nu must be positive")
    if args.sample_grid is not None and args.sample_grid < 2:
        parser.error("--sample-grid must be at least 2")
    sizes = args.n if args.mesh == "tri" else args.cells
    if sizes is None and not args.mesh_file:
        parser.error("--n is required for tri meshes" if args.mesh == "tri" else "--cells is required for poly/voronoi meshes")
    if args.mesh_file:
        sizes = [0]

    k = args.k
    sigma = default_penalty(k) if args.sigma is None else args.sigma
    quad_order = 2 * k + 2 if args.quad_order is None else args.quad_order
    try:
        case = make_case(args.example, args.nu, args.l1, args.l2)
        patch_size = args.patch_size or default_patch_size(_FAMILY_NAMES[args.mesh], k)
        header = config_header(args, k, patch_size, sigma, quad_order)

        if args.sample_grid:
            mesh = build_mesh(args.mesh, sizes[-1], args.seed, args.mesh_file)
            pts, vals = run_solve(case, mesh, k, args.sample_grid, patch_size, sigma, quad_order, args.solver,
                                  args.dump_matrix)
            body = "x,y,u\n" + "".join(f"{_fmt(x)},{_fmt(y)},{_fmt(v)}\n" for (x, y), v in zip(pts, vals))
        else:
            _, table = run_convergence(case, args.mesh, k, sizes, patch_size, sigma, quad_order, args.seed,
                                       args.solver, args.mesh_file, args.dump_matrix)
            body = ",".join(CSV_COLUMNS) + "\n"
            body += "".join(",".join(_fmt(row[c]) for c in CSV_COLUMNS) + "\n" for row in table)
    except (PatchDGError, OSError) as exc:
        print(f"patchdg: error: {exc}", file=sys.stderr)
        return 1

    text = header + body
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())

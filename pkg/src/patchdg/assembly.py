"""Global system assembly and solution, one unknown per element.

The matrix row is the test function phi_j, the column the trial function
phi_i: ``A[j, i] = A_h(phi_i, phi_j)`` and ``F[j] = L(phi_j)``. Assembly
loops over elements (volume terms coupling the members of the patch of E) and over
edges (coupling the members of the patches of both neighbours); local
blocks go into COO triplets that are summed into CSR in one pass.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import forms
from .errors import InvalidInputError, SolverError
from .mesh import subtriangulate
from .quadrature import MeshQuadrature
from .reconstruct import monomial_gradients, monomial_values

logger = logging.getLogger(__name__)


def default_penalty(k):
    """Penalty parameter ``sigma_e = 3 k (k + 1)``."""
    return 3.0 * k * (k + 1)


def default_quadrature(recon, volume_order=None, edge_order=None):
    k = recon.k
    volume_order = 2 * k + 2 if volume_order is None else volume_order
    edge_order = 2 * k + 2 if edge_order is None else edge_order
    mesh = recon.mesh
    cache = mesh.__dict__.setdefault("_quad_cache", {})
    key = (volume_order, edge_order)
    if key not in cache:
        cache[key] = MeshQuadrature(mesh, subtriangulate(mesh), volume_order, edge_order)
    return cache[key]


@dataclass
class SparseSystem:
    """Assembled linear system ``matrix @ dofs = rhs``.

    ``dof_map[K]`` is the row/column of element ``K`` (the identity here).
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    dof_map: np.ndarray
    sigma: float
    quad: MeshQuadrature = field(repr=False)
    inflow_mask: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.matrix.shape[0]


class _Triplets:
    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []

    def add(self, test_dofs, trial_dofs, block):
        self.rows.append(np.repeat(test_dofs, len(trial_dofs)))
        self.cols.append(np.tile(trial_dofs, len(test_dofs)))
        self.vals.append(block.ravel())

    def tocsr(self, n):
        A = sp.coo_matrix(
            (np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))), shape=(n, n)
        )
        return A.tocsr()


def assemble(recon, spec, sigma=None, quad=None, parts=("volume", "interior", "boundary")):
    """Assemble stiffness matrix and load vector.

    Parameters
    ----------
    recon : Reconstruction
    spec : ProblemSpec
    sigma : float, optional
        Penalty parameter; defaults to ``3 k (k + 1)``.
    quad : MeshQuadrature, optional
        Defaults to order ``2k + 2`` on elements and edges.
    parts : tuple of str
        Subset of terms to include (useful for checking pieces of the form).
    """
    mesh = recon.mesh
    n = mesh.n_elements
    sigma = default_penalty(recon.k) if sigma is None else float(sigma)
    if sigma <= 0:
        raise InvalidInputError("penalty must be positive")
    quad = default_quadrature(recon) if quad is None else quad
    nu = spec.nu
    trip = _Triplets()
    rhs = np.zeros(n)

    k = recon.k
    bary, diam = mesh.barycenters, mesh.diameters

    if "volume" in parts:
        X = quad.elem_points
        owner = quad.elem_owner
        cX, bX, fX = spec.c(X), spec.b(X), spec.f(X)
        mv = monomial_values(X, bary[owner], diam[owner], k)
        mg = monomial_gradients(X, bary[owner], diam[owner], k)
        for K in range(n):
            s = quad.element_slice(K)
            w = quad.elem_weights[s]
            C = recon.coeffs[K]
            V = mv[s] @ C
            G = np.einsum("qad,am->qmd", mg[s], C)
            dofs = recon.members[K]
            trip.add(dofs, dofs, forms.volume_matrix(V, G, w, cX[s], bX[s], nu))
            np.add.at(rhs, dofs, forms.volume_load(V, w, fX[s]))

    P = quad.edge_points
    bP = spec.b(P)
    nq = quad.edge_nq
    left = np.repeat(mesh.edge_left, nq)
    right = np.repeat(mesh.edge_right, nq)
    right = np.where(right >= 0, right, left)
    mvL = monomial_values(P, bary[left], diam[left], k)
    mgL = monomial_gradients(P, bary[left], diam[left], k)

    if "interior" in parts:
        mvR = monomial_values(P, bary[right], diam[right], k)
        mgR = monomial_gradients(P, bary[right], diam[right], k)
        for e in mesh.interior_edges:
            s = quad.edge_slice(e)
            w = quad.edge_weights[s]
            L, R = mesh.edge_left[e], mesh.edge_right[e]
            nrm = mesh.edge_normals[e]
            CL, CR = recon.coeffs[L], recon.coeffs[R]
            mL, mR = CL.shape[1], CR.shape[1]
            V1 = np.zeros((nq, mL + mR))
            V2 = np.zeros((nq, mL + mR))
            G1 = np.zeros((nq, mL + mR, 2))
            G2 = np.zeros((nq, mL + mR, 2))
            V1[:, :mL] = mvL[s] @ CL
            V2[:, mL:] = mvR[s] @ CR
            G1[:, :mL] = np.einsum("qad,am->qmd", mgL[s], CL)
            G2[:, mL:] = np.einsum("qad,am->qmd", mgR[s], CR)
            bn = bP[s] @ nrm
            pen = sigma * nu / mesh.edge_lengths[e]
            block = forms.interior_face_matrix(V1, G1, V2, G2, nrm, w, bn, nu, pen)
            dofs = np.concatenate([recon.members[L], recon.members[R]])
            trip.add(dofs, dofs, block)

    inflow = forms.boundary_classes(mesh, spec.b)
    if "boundary" in parts:
        for e, is_in in zip(mesh.boundary_edges, inflow):
            s = quad.edge_slice(e)
            pts, w = P[s], quad.edge_weights[s]
            L = mesh.edge_left[e]
            nrm = mesh.edge_normals[e]
            C = recon.coeffs[L]
            V = mvL[s] @ C
            G = np.einsum("qad,am->qmd", mgL[s], C)
            bn = bP[s] @ nrm
            pen = sigma * nu / mesh.edge_lengths[e]
            dofs = recon.members[L]
            trip.add(dofs, dofs, forms.boundary_face_matrix(V, G, nrm, w, bn, nu, pen, outflow=not is_in))
            np.add.at(rhs, dofs, forms.boundary_face_load(V, G, nrm, w, bn, nu, pen, spec.g(pts), inflow=is_in))

    A = trip.tocsr(n) if trip.vals else sp.csr_matrix((n, n))
    return SparseSystem(A, rhs, np.arange(n), sigma, quad, inflow)


def sparsity_oracle(recon):
    """Boolean ``(n, n)`` overlap pattern from the patches, by brute force.

    ``phi_i`` and ``phi_j`` can interact through an element (both in its
    patch) or through an edge (each in the patch of one of its neighbours).
    """
    mesh = recon.mesh
    n = mesh.n_elements
    pat = np.zeros((n, n), dtype=bool)
    for E in range(n):
        m = recon.members[E]
        pat[np.ix_(m, m)] = True
    for e in range(mesh.n_edges):
        L, R = mesh.edge_left[e], mesh.edge_right[e]
        m = recon.members[L] if R < 0 else np.concatenate([recon.members[L], recon.members[R]])
        pat[np.ix_(m, m)] = True
    return pat


def assemble_reference(recon, spec, sigma=None, quad=None):
    """Dense system built from the dense basis table and the term-by-term forms.

    Quadratic in the number of elements; intended for small meshes only.
    """
    mesh = recon.mesh
    sigma = default_penalty(recon.k) if sigma is None else float(sigma)
    quad = default_quadrature(recon) if quad is None else quad
    table = recon.phi_table()
    n = mesh.n_elements
    inflow = forms.boundary_classes(mesh, spec.b)
    phis = [forms.PiecewisePolynomial(recon, table[i]) for i in range(n)]
    A = np.zeros((n, n))
    F = np.zeros(n)
    for j in range(n):
        F[j] = forms.linear_form(mesh, quad, spec, phis[j], sigma, inflow)
        for i in range(n):
            A[j, i] = forms.bilinear_form(mesh, quad, spec, phis[i], phis[j], sigma, inflow)
    return A, F


def solve(system, method="direct", rtol=1e-10):
    """Solve the assembled system.

    ``method="direct"`` uses sparse LU with a fill-reducing column ordering;
    ``method="gmres"`` uses GMRES preconditioned by incomplete LU.

    Raises
    ------
    SolverError
        On a singular factorization, non-finite output or a relative residual
        above ``rtol``.
    """
    A = system.matrix.tocsc()
    F = system.rhs
    if method == "direct":
        try:
            lu = spla.splu(A, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolverError(f"LU factorization failed: {exc}") from None
        udiag = np.abs(lu.U.diagonal())
        if udiag.min() <= 1e-14 * udiag.max():
            raise SolverError(f"near-singular matrix: pivot ratio {udiag.min() / udiag.max():.2e}")
        x = lu.solve(F)
    elif method == "gmres":
        ilu = spla.spilu(A, drop_tol=1e-6, fill_factor=20)
        prec = spla.LinearOperator(A.shape, ilu.solve)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            x, info = spla.gmres(A, F, M=prec, rtol=rtol * 1e-2, restart=200, maxiter=2000)
        if info != 0:
            raise SolverError(f"GMRES did not converge (info={info})")
    else:
        raise InvalidInputError(f"unknown solver {method!r}")
    if not np.all(np.isfinite(x)):
        raise SolverError("solution contains non-finite values")
    fnorm = np.linalg.norm(F)
    if fnorm == 0.0:
        if np.linalg.norm(x) > 1e-12:
            raise SolverError("nonzero solution for zero data")
        return x
    res = np.linalg.norm(A @ x - F) / fnorm
    if res > rtol:
        raise SolverError(f"relative residual {res:.2e} exceeds {rtol:.0e}")
    return x


def evaluate_solution(dofs, recon, points, element_ids=None):
    """``u_h`` at ``points``; elements are located unless given."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if element_ids is None:
        element_ids = recon.mesh.locate(points)
    coef = recon.apply(np.asarray(dofs, dtype=float))
    return recon.evaluate(coef, element_ids, points)


def dump_matrix(system, path):
    """Write the matrix in MatrixMarket coordinate format."""
    scipy.io.mmwrite(str(path), system.matrix.tocoo())

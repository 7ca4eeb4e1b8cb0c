"""Patch reconstruction: one value per element -> piecewise polynomials.

On every element K the values at the barycenters of its patch are fitted by
a degree-k polynomial in scaled monomials about a_K, constrained to
interpolate the value at a_K and weighted by inverse squared distance. The
fit is linear in the data, so it is stored as a coefficient matrix whose
column j holds the polynomial lambda_j multiplying the value of patch member
j. The global basis function of element i is assembled from those columns.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidInputError, UnisolvenceError
from .patch import build_patch, n_monomials

logger = logging.getLogger(__name__)

#: relative singular value floor of the weighted design matrix
UNISOLVENCE_TOL = 1e-8


def exponents(k):
    """Graded exponent list ``[(0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...]``."""
    return [(t - j, j) for t in range(k + 1) for j in range(t + 1)]


@dataclass(frozen=True)
class MonomialBasis:
    """Scaled monomials ``((x - x0) / h)^a0 ((y - y0) / h)^a1``."""

    anchor: np.ndarray
    scale: float
    k: int

    @property
    def size(self):
        return n_monomials(self.k)

    def values(self, points):
        return monomial_values(points, self.anchor, self.scale, self.k)

    def gradients(self, points):
        return monomial_gradients(points, self.anchor, self.scale, self.k)


def _powers(t, k):
    out = np.ones(t.shape + (k + 1,))
    for p in range(1, k + 1):
        out[..., p] = out[..., p - 1] * t
    return out


def monomial_values(points, anchor, scale, k):
    """Scaled monomial values, shape ``(n, n_k)``.

    ``anchor`` and ``scale`` may be per-point arrays of shape ``(n, 2)`` and
    ``(n,)``.
    """
    points = np.atleast_2d(points)
    scale = np.asarray(scale, dtype=float)
    s = (points - anchor) / scale[..., None]
    px = _powers(s[:, 0], k)
    py = _powers(s[:, 1], k)
    ex = exponents(k)
    ax = np.array([a for a, _ in ex])
    ay = np.array([b for _, b in ex])
    return px[:, ax] * py[:, ay]


def monomial_gradients(points, anchor, scale, k):
    """Gradients of the scaled monomials, shape ``(n, n_k, 2)``."""
    points = np.atleast_2d(points)
    scale = np.asarray(scale, dtype=float)
    s = (points - anchor) / scale[..., None]
    px = _powers(s[:, 0], k)
    py = _powers(s[:, 1], k)
    ex = exponents(k)
    ax = np.array([a for a, _ in ex])
    ay = np.array([b for _, b in ex])
    inv = (1.0 / np.broadcast_to(scale, (len(points),)))[:, None]
    dx = ax * px[:, np.maximum(ax - 1, 0)] * py[:, ay] * inv
    dy = ay * px[:, ax] * py[:, np.maximum(ay - 1, 0)] * inv
    return np.stack([dx, dy], axis=-1)


def design_matrix(patch, scale, k):
    """Weighted reduced design matrix ``W X`` (rows: members 1.., cols: monomials 1..)."""
    X = monomial_values(patch.barycenters[1:], patch.barycenters[0], scale, k)[:, 1:]
    return np.sqrt(patch.weights)[:, None] * X


def check_unisolvence(patch, k, scale, tol=UNISOLVENCE_TOL):
    """Smallest singular value of the weighted design matrix and a validity flag.

    Returns
    -------
    sigma_min : float
        Zero when there are fewer equations than unknowns.
    valid : bool
        ``sigma_min >= tol * sigma_max``.
    """
    nk = n_monomials(k)
    if k == 0:
        return 1.0, True
    if patch.size - 1 < nk - 1:
        return 0.0, False
    sv = np.linalg.svd(design_matrix(patch, scale, k), compute_uv=False)
    smin, smax = float(sv[-1]), float(sv[0])
    return smin, bool(smax > 0.0 and smin >= tol * smax)


def local_coefficients(patch, k, scale):
    """Coefficient matrix ``C`` (``n_k x M``) of the constrained weighted fit.

    The fit of patch values ``v`` is ``C @ v`` in the owner's scaled
    monomials. The reduced problem is solved with a column-pivoted QR of
    ``W X``; normal equations are never formed.
    """
    nk = n_monomials(k)
    M = patch.size
    C = np.zeros((nk, M))
    C[0, 0] = 1.0
    if k == 0:
        return C
    A = design_matrix(patch, scale, k)
    Q, R, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    # G = P R^{-1} Q^T W
    Rinv_Qt = scipy.linalg.solve_triangular(R, Q.T)
    G = np.empty_like(Rinv_Qt)
    G[piv] = Rinv_Qt
    G = G * np.sqrt(patch.weights)[None, :]
    C[1:, 1:] = G
    C[1:, 0] = -G.sum(axis=1)
    return C


def fit_local(patch, k, values, scale):
    """Constrained weighted least-squares coefficients for patch ``values``.

    Raises
    ------
    UnisolvenceError
        If the weighted design matrix is numerically rank deficient.
    """
    values = np.asarray(values, dtype=float)
    if len(values) != patch.size:
        raise InvalidInputError("need one value per patch member")
    smin, ok = check_unisolvence(patch, k, scale)
    if not ok:
        raise UnisolvenceError(f"patch of element {patch.owner} is not unisolvent for k={k}", patch.owner, smin)
    beta = local_coefficients(patch, k, scale) @ values
    return beta


class Reconstruction:
    """Reconstruction operator of order ``k`` on every element of a mesh.

    Attributes
    ----------
    patches : list of ElementPatch
        Final patches (possibly enlarged to restore unisolvence).
    coeffs : list of ndarray
        ``coeffs[K]`` is the ``n_k x M_K`` coefficient matrix; column j is
        lambda_j of K's patch in K's scaled monomials.
    sigma_min : ndarray
        Smallest singular value of each weighted design matrix.
    """

    def __init__(self, mesh, patches, k, coeffs, sigma_min):
        self.mesh = mesh
        self.k = int(k)
        self.nk = n_monomials(k)
        self.patches = patches
        self.coeffs = coeffs
        self.sigma_min = np.asarray(sigma_min)
        self.members = [p.members for p in patches]
        self._supports = None

    @property
    def n_elements(self):
        return self.mesh.n_elements

    def basis(self, K):
        return MonomialBasis(self.mesh.barycenters[K], float(self.mesh.diameters[K]), self.k)

    def shape_values(self, K, points):
        """lambda_j of K's patch at ``points``: shape ``(n, M_K)``."""
        return monomial_values(points, self.mesh.barycenters[K], self.mesh.diameters[K], self.k) @ self.coeffs[K]

    def shape_gradients(self, K, points):
        """Gradients of lambda_j: shape ``(n, M_K, 2)``."""
        g = monomial_gradients(points, self.mesh.barycenters[K], self.mesh.diameters[K], self.k)
        return np.einsum("nab,am->nmb", g, self.coeffs[K])

    # -- global basis ---------------------------------------------------
    @property
    def supports(self):
        """``supports[i]`` lists ``(E, j)``: element i is member j of the patch of E."""
        if self._supports is None:
            sup = [[] for _ in range(self.n_elements)]
            for E, mem in enumerate(self.members):
                for j, i in enumerate(mem):
                    sup[int(i)].append((E, j))
            self._supports = sup
        return self._supports

    def support(self, i):
        """Elements on which the global basis function of element ``i`` is nonzero."""
        return sorted(E for E, _ in self.supports[i])

    def phi(self, i, E):
        """Coefficients of phi_i restricted to E (zeros if i is not in the patch of E)."""
        hit = np.flatnonzero(self.members[E] == i)
        if len(hit) == 0:
            return np.zeros(self.nk)
        return self.coeffs[E][:, hit[0]].copy()

    def phi_table(self, max_elements=160):
        """Dense basis table ``table[i, E] -> coefficients`` for small meshes (debugging)."""
        n = self.n_elements
        if n > max_elements:
            raise InvalidInputError(f"dense basis table limited to {max_elements} elements")
        table = np.zeros((n, n, self.nk))
        for i in range(n):
            for E in range(n):
                table[i, E] = self.phi(i, E)
        return table

    # -- applying the operator -----------------------------------------
    def apply(self, values):
        """Element-wise coefficients of the reconstruction of barycenter ``values``.

        ``values`` is an array with one entry per element or a callable
        sampled at the barycenters. Returns shape ``(n_elements, n_k)``.
        """
        if callable(values):
            values = np.asarray(values(self.mesh.barycenters), dtype=float)
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_elements,):
            raise InvalidInputError("need one value per element")
        return np.stack([self.coeffs[K] @ values[self.members[K]] for K in range(self.n_elements)])

    def evaluate(self, coef, element_ids, points):
        """Evaluate piecewise coefficients ``coef`` at points in given elements."""
        element_ids = np.asarray(element_ids)
        m = monomial_values(points, self.mesh.barycenters[element_ids], self.mesh.diameters[element_ids], self.k)
        return np.einsum("na,na->n", m, coef[element_ids])

    def evaluate_gradient(self, coef, element_ids, points):
        element_ids = np.asarray(element_ids)
        g = monomial_gradients(points, self.mesh.barycenters[element_ids], self.mesh.diameters[element_ids], self.k)
        return np.einsum("nab,na->nb", g, coef[element_ids])

    def dump_csv(self, path):
        """Write one row per (element, member) with the lambda coefficients."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["element", "member"] + [f"c{a}{b}" for a, b in exponents(self.k)])
            for K in range(self.n_elements):
                for j, i in enumerate(self.members[K]):
                    w.writerow([K, int(i)] + [repr(float(c)) for c in self.coeffs[K][:, j]])


def build_reconstruction_basis(mesh, patches, k, tol=UNISOLVENCE_TOL, expand=True, selection="distance"):
    """Fit the reconstruction on every element.

    Patches whose weighted design matrix fails the singular value test are
    grown one element at a time (re-running the patch construction with a
    larger size) until the test passes.

    Raises
    ------
    InvalidInputError
        If any patch has fewer than ``n_k`` elements.
    UnisolvenceError
        If no patch size restores unisolvence (or ``expand`` is false).
    """
    nk = n_monomials(k)
    if k < 0:
        raise InvalidInputError("k must be non-negative")
    small = [p.owner for p in patches if p.size < nk]
    if small:
        raise InvalidInputError(f"patch size below n_k={nk} (element {small[0]})")
    adjacency = None
    final, coeffs, smins = [], [], []
    n_expanded = 0
    for K, patch in enumerate(patches):
        scale = float(mesh.diameters[K])
        smin, ok = check_unisolvence(patch, k, scale, tol)
        while not ok:
            if not expand or patch.size >= mesh.n_elements:
                raise UnisolvenceError(
                    f"element {K}: patch of {patch.size} elements is not unisolvent (sigma_min={smin:.3e})", K, smin
                )
            if adjacency is None:
                adjacency = mesh.adjacency()
            patch = build_patch(mesh, K, patch.size + 1, adjacency, selection)
            smin, ok = check_unisolvence(patch, k, scale, tol)
            n_expanded += 1
        final.append(patch)
        coeffs.append(local_coefficients(patch, k, scale))
        smins.append(smin)
    if n_expanded:
        logger.info("enlarged patches %d times to restore unisolvence", n_expanded)
    return Reconstruction(mesh, final, k, coeffs, smins)


def reconstruct_field(sampler, recon):
    """Coefficients of the reconstruction of ``sampler`` (callable or values)."""
    return recon.apply(sampler)

"""Interior penalty DG forms with upwinding for -nu Lap u + div(b u) + c u = f.

Two routes evaluate the same forms:

* :func:`bilinear_form` / :func:`linear_form` integrate arbitrary piecewise
  functions (reconstructed polynomials or smooth callables) term by term;
* the ``*_matrix`` / ``*_load`` kernels return local dense blocks for a set
  of basis functions and are what :mod:`patchdg.assembly` uses.

Sign conventions: on an interior edge side 1 is the mesh's left element and
``n`` its outward normal, so ``[[v]] = (v1 - v2) n`` and
``[[q]] = (q1 - q2) . n``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

logger = logging.getLogger(__name__)

INFLOW = "inflow"
OUTFLOW = "outflow"


def as_scalar_field(value):
    """Wrap a number or callable as ``points (n, 2) -> (n,)``."""
    if callable(value):
        def field(points):
            points = np.atleast_2d(points)
            return np.broadcast_to(np.asarray(value(points), dtype=float), (len(points),))
        return field
    const = float(value)
    return lambda points: np.full(len(np.atleast_2d(points)), const)


def as_vector_field(value):
    """Wrap a 2-vector or callable as ``points (n, 2) -> (n, 2)``."""
    if callable(value):
        def field(points):
            points = np.atleast_2d(points)
            return np.broadcast_to(np.asarray(value(points), dtype=float), (len(points), 2))
        return field
    const = np.asarray(value, dtype=float).reshape(2)
    return lambda points: np.tile(const, (len(np.atleast_2d(points)), 1))


@dataclass
class ProblemSpec:
    """Data of the convection-diffusion-reaction problem.

    All callbacks take an ``(n, 2)`` array of points. ``b`` returns
    ``(n, 2)``; the others return ``(n,)``. Constants are accepted and
    wrapped.
    """

    nu: float
    b: Callable
    c: Callable
    f: Callable
    g: Callable
    u: Optional[Callable] = None
    grad_u: Optional[Callable] = None
    div_b: Optional[Callable] = None

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("diffusivity nu must be positive")
        self.b = as_vector_field(self.b)
        self.c = as_scalar_field(self.c)
        self.f = as_scalar_field(self.f)
        self.g = as_scalar_field(self.g)
        if self.u is not None:
            self.u = as_scalar_field(self.u)
        if self.grad_u is not None:
            self.grad_u = as_vector_field(self.grad_u)
        if self.div_b is not None:
            self.div_b = as_scalar_field(self.div_b)

    def divergence_b(self, points, length_scale=1.0):
        """div b from the analytic callback or central differences (step 1e-6 L)."""
        if self.div_b is not None:
            return self.div_b(points)
        points = np.atleast_2d(points)
        h = 1e-6 * length_scale
        ex = np.array([h, 0.0])
        ey = np.array([0.0, h])
        dbx = (self.b(points + ex)[:, 0] - self.b(points - ex)[:, 0]) / (2 * h)
        dby = (self.b(points + ey)[:, 1] - self.b(points - ey)[:, 1]) / (2 * h)
        return dbx + dby

    def effective_reaction(self, points, length_scale=1.0):
        """r = c + div(b) / 2."""
        return self.c(points) + 0.5 * self.divergence_b(points, length_scale)


# ----------------------------------------------------------------------
# pointwise face algebra
# ----------------------------------------------------------------------
def average(v1, v2):
    return 0.5 * (v1 + v2)


def jump(v1, v2, n):
    """Vector jump of a scalar: ``v1 n + v2 (-n)``."""
    return (np.asarray(v1) - np.asarray(v2))[..., None] * n


def jump_normal(q1, q2, n):
    """Scalar jump of a vector field: ``q1 . n + q2 . (-n)``."""
    return np.sum((np.asarray(q1) - np.asarray(q2)) * n, axis=-1)


def upwind_flux(bn, v1, v2):
    """Normal upwind flux ``{{b v}}_up . n1`` given ``bn = b . n1``.

    Uses the closed form ``({{b v}} + |b.n1|/2 [[v]]) . n1``, which picks
    ``v1`` for outgoing flow, ``v2`` for incoming flow and the average when
    ``b . n1 = 0``.
    """
    bn = np.asarray(bn)
    return 0.5 * bn * (v1 + v2) + 0.5 * np.abs(bn) * (v1 - v2)


def classify_boundary(mesh, e, b):
    """``"inflow"`` if ``b . n < 0`` at the midpoint of boundary edge ``e``.

    Edges where the sign of ``b . n`` changes along the edge are logged.
    """
    b = as_vector_field(b)
    n = mesh.edge_normals[e]
    p, q = mesh.vertices[mesh.edge_vertices[e]]
    pts = np.vstack([p, 0.5 * (p + q), q])
    bn = b(pts) @ n
    if bn.min() < 0.0 < bn.max():
        logger.warning("b.n changes sign along boundary edge %d", e)
    return INFLOW if bn[1] < 0.0 else OUTFLOW


def boundary_classes(mesh, b):
    """Boolean inflow mask over ``mesh.boundary_edges``."""
    return np.array([classify_boundary(mesh, e, b) == INFLOW for e in mesh.boundary_edges], dtype=bool)


# ----------------------------------------------------------------------
# local dense kernels (rows: test functions, columns: trial functions)
# ----------------------------------------------------------------------
def volume_matrix(V, G, w, c, b, nu):
    """Element block of ``int c v w + nu grad v . grad w - v b . grad w``.

    ``V`` (nq, m) and ``G`` (nq, m, 2) are basis values and gradients at
    quadrature points with weights ``w``.
    """
    Vw = V * w[:, None]
    A = Vw.T @ (c[:, None] * V)
    A += nu * (np.einsum("qmd,q,qnd->mn", G, w, G))
    bG = np.einsum("qmd,qd->qm", G, b)
    A -= (bG * w[:, None]).T @ V
    return A


def volume_load(V, w, f):
    return V.T @ (w * f)


def interior_face_matrix(V1, G1, V2, G2, n, w, bn, nu, penalty):
    """Interior edge block: upwind, penalty and symmetric consistency terms.

    Basis traces from both sides share one column space (zero where a basis
    function does not live on that side). ``penalty`` is ``sigma_e nu / |e|``.
    """
    J = V1 - V2
    A = 0.5 * nu * np.einsum("qmd,d->qm", G1 + G2, n)
    up = 0.5 * (V1 + V2) + 0.5 * np.sign(bn)[:, None] * (V1 - V2)
    Jw = J * w[:, None]
    mat = Jw.T @ (bn[:, None] * up)
    mat += penalty * (Jw.T @ J)
    mat -= Jw.T @ A
    mat -= (A * w[:, None]).T @ J
    return mat


def boundary_face_matrix(V, G, n, w, bn, nu, penalty, outflow):
    """Boundary edge block; the convective term only on outflow edges."""
    A = nu * np.einsum("qmd,d->qm", G, n)
    Vw = V * w[:, None]
    mat = penalty * (Vw.T @ V)
    if outflow:
        mat += Vw.T @ (bn[:, None] * V)
    mat -= Vw.T @ A
    mat -= (A * w[:, None]).T @ V
    return mat


def boundary_face_load(V, G, n, w, bn, nu, penalty, g, inflow):
    """Weak Dirichlet data: ``int (pen v - nu grad v . n) g`` minus inflow flux."""
    A = nu * np.einsum("qmd,d->qm", G, n)
    load = (penalty * V - A).T @ (w * g)
    if inflow:
        load -= V.T @ (w * bn * g)
    return load


# ----------------------------------------------------------------------
# term-by-term evaluation for general piecewise functions
# ----------------------------------------------------------------------
class PiecewisePolynomial:
    """Element-wise polynomial given by reconstruction coefficients."""

    def __init__(self, recon, coef):
        self.recon = recon
        self.coef = np.asarray(coef)

    def value(self, eids, points):
        return self.recon.evaluate(self.coef, eids, points)

    def grad(self, eids, points):
        return self.recon.evaluate_gradient(self.coef, eids, points)


class SmoothFunction:
    """A globally defined function (element ids are ignored)."""

    def __init__(self, u, grad_u):
        self.u = as_scalar_field(u)
        self.grad_u = as_vector_field(grad_u)

    def value(self, eids, points):
        return self.u(points)

    def grad(self, eids, points):
        return self.grad_u(points)


def _edge_sides(mesh, quad):
    nq = quad.edge_nq
    left = np.repeat(mesh.edge_left, nq)
    right = np.repeat(mesh.edge_right, nq)
    normals = np.repeat(mesh.edge_normals, nq, axis=0)
    lengths = np.repeat(mesh.edge_lengths, nq)
    return left, right, normals, lengths


def bilinear_form(mesh, quad, spec, v, w, sigma, inflow_mask=None):
    """``A_h(v, w)`` for piecewise functions ``v`` (trial) and ``w`` (test)."""
    nu = spec.nu
    X = quad.elem_points
    eid = quad.elem_owner
    wq = quad.elem_weights
    vv, gv = v.value(eid, X), v.grad(eid, X)
    wv, gw = w.value(eid, X), w.grad(eid, X)
    bX = spec.b(X)
    total = np.sum(wq * (spec.c(X) * vv * wv + nu * np.sum(gv * gw, 1) - vv * np.sum(bX * gw, 1)))

    if inflow_mask is None:
        inflow_mask = boundary_classes(mesh, spec.b)
    inflow_edge = np.zeros(mesh.n_edges, dtype=bool)
    inflow_edge[mesh.boundary_edges] = inflow_mask

    left, right, normals, lengths = _edge_sides(mesh, quad)
    P, ws = quad.edge_points, quad.edge_weights
    interior = right >= 0
    rsafe = np.where(interior, right, left)
    v1, v2 = v.value(left, P), v.value(rsafe, P)
    w1, w2 = w.value(left, P), w.value(rsafe, P)
    g1v, g2v = v.grad(left, P), v.grad(rsafe, P)
    g1w, g2w = w.grad(left, P), w.grad(rsafe, P)
    bn = np.sum(spec.b(P) * normals, 1)
    pen = sigma * nu / lengths

    # interior edges
    jv = jump(v1, v2, normals)
    jw = jump(w1, w2, normals)
    avg_gv = average(nu * g1v, nu * g2v)
    avg_gw = average(nu * g1w, nu * g2w)
    up = upwind_flux(bn, v1, v2)
    terms_i = (
        up * (w1 - w2)
        + pen * np.sum(jv * jw, 1)
        - np.sum(avg_gv * jw, 1)
        - np.sum(avg_gw * jv, 1)
    )
    # boundary edges: averages are one-sided, jumps are v n
    qin = np.repeat(inflow_edge, quad.edge_nq)
    terms_b = (
        np.where(qin, 0.0, bn * v1 * w1)
        + pen * v1 * w1
        - nu * np.sum(g1v * normals, 1) * w1
        - nu * np.sum(g1w * normals, 1) * v1
    )
    total += np.sum(ws * np.where(interior, terms_i, terms_b))
    return float(total)


def linear_form(mesh, quad, spec, w, sigma, inflow_mask=None):
    """``L(w) = int f w + boundary penalty/consistency/inflow terms in g``."""
    nu = spec.nu
    X = quad.elem_points
    eid = quad.elem_owner
    total = np.sum(quad.elem_weights * spec.f(X) * w.value(eid, X))

    if inflow_mask is None:
        inflow_mask = boundary_classes(mesh, spec.b)
    for e, is_in in zip(mesh.boundary_edges, inflow_mask):
        P, ws = quad.edge(e)
        K = np.full(len(ws), mesh.edge_left[e])
        n = mesh.edge_normals[e]
        g = spec.g(P)
        wv = w.value(K, P)
        dn = w.grad(K, P) @ n
        pen = sigma * nu / mesh.edge_lengths[e]
        total += np.sum(ws * (pen * wv - nu * dn) * g)
        if is_in:
            total -= np.sum(ws * (spec.b(P) @ n) * g * wv)
    return float(total)

"""Error norms and observed convergence rates."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .forms import PiecewisePolynomial, SmoothFunction

logger = logging.getLogger(__name__)


class Difference:
    """Piecewise function ``a - b``."""

    def __init__(self, a, b):
        self.a, self.b = a, b

    def value(self, eids, points):
        return self.a.value(eids, points) - self.b.value(eids, points)

    def grad(self, eids, points):
        return self.a.grad(eids, points) - self.b.grad(eids, points)


def discrete_function(recon, dofs):
    """Reconstructed piecewise polynomial of the element values ``dofs``."""
    return PiecewisePolynomial(recon, recon.apply(np.asarray(dofs, dtype=float)))


def error_function(spec, recon, dofs):
    """``u`` minus the reconstructed discrete solution, for a problem with an exact solution."""
    if spec.u is None or spec.grad_u is None:
        raise ValueError("exact solution and gradient are required")
    return Difference(SmoothFunction(spec.u, spec.grad_u), discrete_function(recon, dofs))


def l2_norm(v, quad):
    X = quad.elem_points
    val = v.value(quad.elem_owner, X)
    return float(np.sqrt(np.sum(quad.elem_weights * val**2)))


def l2_error(u_exact, dofs, recon, quad):
    """``||u - u_h||`` over the domain by element quadrature."""
    X = quad.elem_points
    uh = recon.evaluate(recon.apply(np.asarray(dofs, dtype=float)), quad.elem_owner, X)
    return float(np.sqrt(np.sum(quad.elem_weights * (u_exact(X) - uh) ** 2)))


def reaction_lower_bound(spec, quad):
    """Per-element minimum of ``r = c + div(b)/2`` over quadrature points."""
    mesh = quad.mesh
    r = spec.effective_reaction(quad.elem_points, mesh.domain_diameter)
    return np.minimum.reduceat(r, quad.elem_offsets[:-1])


def b_sup(spec, quad):
    """``max |b|`` over all volume and edge quadrature points."""
    bv = np.vstack([spec.b(quad.elem_points), spec.b(quad.edge_points)])
    return float(np.max(np.hypot(bv[:, 0], bv[:, 1])))


def b_sup_elementwise(spec, quad):
    bv = spec.b(quad.elem_points)
    return np.maximum.reduceat(np.hypot(bv[:, 0], bv[:, 1]), quad.elem_offsets[:-1])


@dataclass
class DGParts:
    """Squared contributions to the DG-energy norm."""

    grad: float
    penalty: float
    reaction: float
    upwind: float

    @property
    def diffusion(self):
        return self.grad + self.penalty

    @property
    def total(self):
        return self.grad + self.penalty + self.reaction + self.upwind


def dg_norm_parts(v, spec, quad):
    """Squared terms of the DG-energy norm of a piecewise function ``v``.

    ``nu |v|_{1,h}^2 + sum nu/|e| ||[[v]]||^2`` (diffusion) and
    ``||(rbar + b0)^{1/2} v||^2 + sum || |b.n|^{1/2} [[v]] ||^2`` (reaction
    and convection), with ``rbar`` the element-wise minimum of the effective
    reaction at quadrature points and ``b0 = max|b| / L``.
    """
    mesh = quad.mesh
    nu = spec.nu
    X, eid, w = quad.elem_points, quad.elem_owner, quad.elem_weights
    val = v.value(eid, X)
    grd = v.grad(eid, X)
    grad_sq = nu * float(np.sum(w * np.sum(grd**2, 1)))

    b0 = b_sup(spec, quad) / mesh.domain_diameter
    rbar = reaction_lower_bound(spec, quad)
    weight = (rbar + b0)[eid]
    if np.any(weight < 0):
        logger.warning("rbar + b0 is negative on %d elements", int(np.sum(rbar + b0 < 0)))
    reaction_sq = float(np.sum(w * weight * val**2))

    nq = quad.edge_nq
    P, ws = quad.edge_points, quad.edge_weights
    left = np.repeat(mesh.edge_left, nq)
    right = np.repeat(mesh.edge_right, nq)
    interior = right >= 0
    j = v.value(left, P) - np.where(interior, v.value(np.where(interior, right, left), P), 0.0)
    lengths = np.repeat(mesh.edge_lengths, nq)
    normals = np.repeat(mesh.edge_normals, nq, axis=0)
    bn = np.abs(np.sum(spec.b(P) * normals, 1))
    penalty_sq = float(np.sum(ws * nu / lengths * j**2))
    upwind_sq = float(np.sum(ws * bn * j**2))
    return DGParts(grad_sq, penalty_sq, reaction_sq, upwind_sq)


def dg_norm(v, spec, quad):
    return math.sqrt(dg_norm_parts(v, spec, quad).total)


def streamline_seminorm(v, spec, quad, recon):
    """``(sum_K h_K / ||b||_{inf,K} ||R(b . grad v)||_K^2)^{1/2}``, with ``R`` the reconstruction.

    ``b . grad v`` is sampled at the barycenters (element-interior values)
    and reconstructed with the same operator as the solution.
    """
    mesh = quad.mesh
    ids = np.arange(mesh.n_elements)
    a = mesh.barycenters
    sample = np.sum(spec.b(a) * v.grad(ids, a), 1)
    coef = recon.apply(sample)
    X, eid, w = quad.elem_points, quad.elem_owner, quad.elem_weights
    pv = recon.evaluate(coef, eid, X)
    per_elem = np.add.reduceat(w * pv**2, quad.elem_offsets[:-1])
    bK = b_sup_elementwise(spec, quad)
    scale = np.divide(mesh.diameters, bK, out=np.zeros_like(bK), where=bK > 0)
    return float(np.sqrt(np.sum(scale * per_elem)))


def convection_dominated(spec, quad):
    """Mask of elements with ``nu < h_K ||b||_{inf,K} / 2``."""
    return spec.nu < 0.5 * quad.mesh.diameters * b_sup_elementwise(spec, quad)


def supg_norm(v, spec, quad, recon):
    dominated = convection_dominated(spec, quad)
    if not np.all(dominated):
        logger.warning("convection-dominance assumption fails on %d elements", int(np.sum(~dominated)))
    dg2 = dg_norm_parts(v, spec, quad).total
    return math.sqrt(dg2 + streamline_seminorm(v, spec, quad, recon) ** 2)


def dg_energy_error(spec, dofs, recon, quad):
    return dg_norm(error_function(spec, recon, dofs), spec, quad)


def supg_error(spec, dofs, recon, quad):
    return supg_norm(error_function(spec, recon, dofs), spec, quad, recon)


# ----------------------------------------------------------------------
# convergence tables
# ----------------------------------------------------------------------
@dataclass
class RunRecord:
    label: str
    h: float
    dofs: int
    errors: dict = field(default_factory=dict)


def observed_rate(e1, e2, h1, h2):
    """``log(e1/e2) / log(h1/h2)``; ``nan`` if either error is zero."""
    if e1 <= 0 or e2 <= 0 or not np.isfinite(e1) or not np.isfinite(e2):
        return float("nan")
    return math.log(e1 / e2) / math.log(h1 / h2)


def rates(records, key, use_dofs=False):
    """Observed rates between consecutive records for error ``key``.

    With ``use_dofs`` the mesh size is replaced by ``dofs ** -0.5``.
    """
    if len(records) < 2:
        raise ValueError("need at least two runs")
    out = []
    for a, b in zip(records[:-1], records[1:]):
        ha, hb = (a.dofs**-0.5, b.dofs**-0.5) if use_dofs else (a.h, b.h)
        out.append(observed_rate(a.errors[key], b.errors[key], ha, hb))
    return out

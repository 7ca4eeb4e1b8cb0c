"""Quadrature on triangles, polygonal elements and edges.

Triangle rules are collapsed (Duffy) tensor products of Gauss-Legendre
rules; polygons are integrated through their sub-triangulation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class QuadRule:
    """Points and weights on a reference domain."""

    points: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=None)
def gauss_legendre(order):
    """Gauss-Legendre rule on [0, 1] exact for degree ``order``."""
    if order < 0:
        raise InvalidInputError("order must be non-negative")
    n = order // 2 + 1
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadRule(0.5 * (x + 1.0), 0.5 * w)


@lru_cache(maxsize=None)
def reference_triangle(order):
    """Collapsed Gauss rule on the triangle (0,0), (1,0), (0,1).

    Exact for polynomials of total degree ``order``. The Jacobian of the
    collapse adds one degree in the collapsed direction.
    """
    if order < 0:
        raise InvalidInputError("order must be non-negative")
    a = gauss_legendre(order)
    b = gauss_legendre(order + 1)
    u, v = np.meshgrid(a.points, b.points, indexing="ij")
    wu, wv = np.meshgrid(a.weights, b.weights, indexing="ij")
    x = u * (1.0 - v)
    y = v
    w = wu * wv * (1.0 - v)
    return QuadRule(np.column_stack([x.ravel(), y.ravel()]), w.ravel())


def triangle_quadrature(tri, order):
    """Physical points and weights for one or many triangles.

    Parameters
    ----------
    tri : array_like, shape (3, 2) or (nt, 3, 2)
    order : int

    Returns
    -------
    points : ndarray, shape (nt * nq, 2)
    weights : ndarray, shape (nt * nq,)
    """
    tri = np.asarray(tri, dtype=float)
    if tri.ndim == 2:
        tri = tri[None]
    ref = reference_triangle(order)
    p0 = tri[:, 0]
    e1 = tri[:, 1] - p0
    e2 = tri[:, 2] - p0
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    pts = p0[:, None, :] + ref.points[None, :, 0, None] * e1[:, None, :] + ref.points[None, :, 1, None] * e2[:, None, :]
    wts = np.abs(det)[:, None] * ref.weights[None, :]
    return pts.reshape(-1, 2), wts.ravel()


def element_quadrature(mesh, subtri, element_id, order):
    """Quadrature on one polygonal element, exact for total degree ``order``."""
    if order < 1:
        raise InvalidInputError("order must be >= 1")
    return triangle_quadrature(subtri.triangles[element_id], order)


def edge_quadrature(edge, order):
    """Gauss-Legendre points and weights on the segment ``edge = (p, q)``.

    The weights include the segment length.
    """
    if order < 1:
        raise InvalidInputError("order must be >= 1")
    p, q = (np.asarray(e, dtype=float) for e in edge)
    rule = gauss_legendre(order)
    length = float(np.hypot(*(q - p)))
    pts = p[None, :] + rule.points[:, None] * (q - p)[None, :]
    return pts, rule.weights * length


class MeshQuadrature:
    """Element and edge quadrature for a whole mesh, stored flat.

    ``elem_points[elem_offsets[K]:elem_offsets[K + 1]]`` are the points of
    element ``K``; the same layout holds for edges.
    """

    def __init__(self, mesh, subtri, volume_order, edge_order):
        self.mesh = mesh
        self.volume_order = int(volume_order)
        self.edge_order = int(edge_order)
        pts, wts, offs = [], [], [0]
        for K in range(mesh.n_elements):
            p, w = element_quadrature(mesh, subtri, K, self.volume_order)
            pts.append(p)
            wts.append(w)
            offs.append(offs[-1] + len(w))
        self.elem_points = np.concatenate(pts)
        self.elem_weights = np.concatenate(wts)
        self.elem_offsets = np.asarray(offs)

        rule = gauss_legendre(self.edge_order)
        p = mesh.vertices[mesh.edge_vertices[:, 0]]
        q = mesh.vertices[mesh.edge_vertices[:, 1]]
        nq = len(rule.weights)
        self.edge_points = (p[:, None, :] + rule.points[None, :, None] * (q - p)[:, None, :]).reshape(-1, 2)
        self.edge_weights = (rule.weights[None, :] * mesh.edge_lengths[:, None]).ravel()
        self.edge_nq = nq

    def element(self, K):
        s = slice(self.elem_offsets[K], self.elem_offsets[K + 1])
        return self.elem_points[s], self.elem_weights[s]

    def element_slice(self, K):
        return slice(self.elem_offsets[K], self.elem_offsets[K + 1])

    def edge(self, e):
        s = self.edge_slice(e)
        return self.edge_points[s], self.edge_weights[s]

    def edge_slice(self, e):
        return slice(e * self.edge_nq, (e + 1) * self.edge_nq)

    @property
    def elem_owner(self):
        """Element id of every flat volume quadrature point."""
        counts = np.diff(self.elem_offsets)
        return np.repeat(np.arange(len(counts)), counts)

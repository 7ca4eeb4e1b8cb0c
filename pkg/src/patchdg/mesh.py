"""Two-dimensional polygonal meshes.

A :class:`PolyMesh` stores vertices and counter-clockwise vertex cycles and
derives everything the discretization needs from them: edge topology with
left/right elements, unit normals, element areas, barycenters and diameters.
Three generators are provided (uniform triangulations of the unit square and
Voronoi meshes with optional Lloyd relaxation) together with a plain-text
reader and writer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import Voronoi, cKDTree

from .errors import GeometryError, InvalidInputError, MeshError, MeshParseError, PointLocationError

logger = logging.getLogger(__name__)

BOUNDARY = -1


def polygon_signed_area(xy):
    """Shoelace signed area of a closed polygon given as an ``(m, 2)`` array."""
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(xy):
    """Area centroid of a simple polygon (shoelace formula)."""
    x, y = xy[:, 0], xy[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if area == 0.0:
        raise GeometryError("polygon has zero area")
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return np.array([cx, cy])


def _segments_cross(p1, p2, q1, q2):
    """True if closed segments p1p2 and q1q2 intersect."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True

    def on_segment(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    if d1 == 0 and on_segment(q1, q2, p1):
        return True
    if d2 == 0 and on_segment(q1, q2, p2):
        return True
    if d3 == 0 and on_segment(p1, p2, q1):
        return True
    if d4 == 0 and on_segment(p1, p2, q2):
        return True
    return False


def is_simple_polygon(xy):
    """Check that no two non-adjacent edges of the polygon intersect."""
    m = len(xy)
    if m < 3:
        return False
    if len({tuple(p) for p in xy.tolist()}) != m:
        return False
    for a in range(m):
        for b in range(a + 1, m):
            if b == a + 1 or (a == 0 and b == m - 1):
                continue
            if _segments_cross(xy[a], xy[(a + 1) % m], xy[b], xy[(b + 1) % m]):
                return False
    return True


def is_convex_polygon(xy, tol=0.0):
    """True if every turn of the CCW polygon is a left turn (collinear allowed)."""
    d1 = np.roll(xy, -1, axis=0) - xy
    d2 = np.roll(d1, -1, axis=0)
    cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    return bool(np.all(cross >= -tol))


class PolyMesh:
    """Immutable conforming polygonal mesh.

    Parameters
    ----------
    vertices : array_like, shape (nv, 2)
        Vertex coordinates.
    elements : sequence of sequence of int
        Vertex index cycles, one per element, counter-clockwise.
    fix_orientation : bool, optional
        Reverse clockwise cycles instead of rejecting them.
    family : str, optional
        Label used to pick default patch sizes (``"triangulation"``,
        ``"polygonal"`` or ``"voronoi"``).

    Attributes
    ----------
    edge_vertices : ndarray, shape (ne, 2)
        Endpoints of every edge, oriented counter-clockwise with respect to
        the left element.
    edge_left, edge_right : ndarray, shape (ne,)
        Incident elements; ``edge_right`` is ``BOUNDARY`` on the boundary.
    edge_normals : ndarray, shape (ne, 2)
        Unit normal pointing out of the left element.
    element_edges : list of ndarray
        Edge ids of each element in cycle order.
    """

    def __init__(self, vertices, elements, fix_orientation=False, family="polygonal"):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must have shape (nv, 2)")
        self.family = family
        nv = len(self.vertices)
        cycles = []
        for K, cyc in enumerate(elements):
            cyc = np.asarray(cyc, dtype=np.int64)
            if cyc.ndim != 1 or len(cyc) < 3:
                raise MeshError(f"element {K} has fewer than 3 vertices")
            if cyc.min() < 0 or cyc.max() >= nv:
                raise MeshError(f"element {K} references a vertex outside 0..{nv - 1}")
            area = polygon_signed_area(self.vertices[cyc])
            if area <= 0.0:
                if fix_orientation and area < 0.0:
                    cyc = cyc[::-1].copy()
                else:
                    raise GeometryError(f"element {K} is not counter-clockwise (signed area {area:.3e})")
            cycles.append(cyc)
        if not cycles:
            raise MeshError("mesh has no elements")
        self.elements = cycles
        self._build_geometry()
        self._build_edges()

    # ------------------------------------------------------------------
    def _build_geometry(self):
        n = len(self.elements)
        self.areas = np.empty(n)
        self.barycenters = np.empty((n, 2))
        self.diameters = np.empty(n)
        for K, cyc in enumerate(self.elements):
            xy = self.vertices[cyc]
            self.areas[K] = polygon_signed_area(xy)
            self.barycenters[K] = polygon_centroid(xy)
            diff = xy[:, None, :] - xy[None, :, :]
            self.diameters[K] = np.sqrt((diff**2).sum(-1).max())
        self.h = float(self.diameters.max())

    def _build_edges(self):
        lookup = {}
        ev, left, right = [], [], []
        element_edges = []
        for K, cyc in enumerate(self.elements):
            ids = []
            m = len(cyc)
            for a in range(m):
                i, j = int(cyc[a]), int(cyc[(a + 1) % m])
                key = (i, j) if i < j else (j, i)
                e = lookup.get(key)
                if e is None:
                    e = len(ev)
                    lookup[key] = e
                    ev.append((i, j))
                    left.append(K)
                    right.append(BOUNDARY)
                else:
                    if right[e] != BOUNDARY:
                        raise MeshError(f"edge ({i}, {j}) is shared by more than two elements")
                    if ev[e] != (j, i):
                        raise MeshError(f"edge ({i}, {j}) has the same orientation in elements {left[e]} and {K}")
                    right[e] = K
                ids.append(e)
            element_edges.append(np.asarray(ids, dtype=np.int64))
        self.edge_vertices = np.asarray(ev, dtype=np.int64)
        self.edge_left = np.asarray(left, dtype=np.int64)
        self.edge_right = np.asarray(right, dtype=np.int64)
        self.element_edges = element_edges
        t = self.vertices[self.edge_vertices[:, 1]] - self.vertices[self.edge_vertices[:, 0]]
        self.edge_lengths = np.hypot(t[:, 0], t[:, 1])
        if np.any(self.edge_lengths == 0.0):
            raise GeometryError("mesh contains a zero-length edge")
        self.edge_normals = np.column_stack([t[:, 1], -t[:, 0]]) / self.edge_lengths[:, None]
        self.edge_midpoints = 0.5 * (self.vertices[self.edge_vertices[:, 0]] + self.vertices[self.edge_vertices[:, 1]])
        self.boundary_edges = np.flatnonzero(self.edge_right == BOUNDARY)
        self.interior_edges = np.flatnonzero(self.edge_right != BOUNDARY)

    # ------------------------------------------------------------------
    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def n_edges(self):
        return len(self.edge_vertices)

    @property
    def n_vertices(self):
        return len(self.vertices)

    def element_vertices(self, K):
        """Coordinates of element ``K`` as an ``(m, 2)`` array."""
        return self.vertices[self.elements[K]]

    def neighbors(self, K):
        """Face-neighbouring elements of ``K`` (no boundary markers)."""
        out = []
        for e in self.element_edges[K]:
            other = self.edge_right[e] if self.edge_left[e] == K else self.edge_left[e]
            if other != BOUNDARY:
                out.append(int(other))
        return out

    def adjacency(self):
        """List of face-neighbour lists for all elements."""
        adj = [[] for _ in range(self.n_elements)]
        for e in self.interior_edges:
            a, b = int(self.edge_left[e]), int(self.edge_right[e])
            adj[a].append(b)
            adj[b].append(a)
        return adj

    @property
    def max_edges_per_element(self):
        """Largest number of edges of any element."""
        return max(len(c) for c in self.elements)

    def bounding_box(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def domain_diameter(self):
        lo, hi = self.bounding_box()
        return float(np.hypot(*(hi - lo)))

    def domain_area(self):
        """Area enclosed by the boundary edges."""
        p = self.vertices[self.edge_vertices[self.boundary_edges, 0]]
        q = self.vertices[self.edge_vertices[self.boundary_edges, 1]]
        return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))

    def validate(self, check_simple=True):
        """Raise if any structural invariant is violated; return ``self``."""
        if check_simple:
            for K, cyc in enumerate(self.elements):
                if not is_simple_polygon(self.vertices[cyc]):
                    raise GeometryError(f"element {K} is not a simple polygon")
        total = self.areas.sum()
        dom = self.domain_area()
        if abs(total - dom) > 1e-12 * max(1.0, abs(dom)):
            raise MeshError(f"element areas sum to {total!r}, domain area is {dom!r}")
        norms = np.hypot(self.edge_normals[:, 0], self.edge_normals[:, 1])
        if np.max(np.abs(norms - 1.0)) > 1e-14:
            raise MeshError("edge normals are not unit length")
        for K, cyc in enumerate(self.elements):
            xy = self.vertices[cyc]
            c = self.barycenters[K]
            if np.any(c < xy.min(axis=0) - 1e-14) or np.any(c > xy.max(axis=0) + 1e-14):
                raise GeometryError(f"barycenter of element {K} lies outside its bounding box")
        return self

    # ------------------------------------------------------------------
    def locate(self, points, tol=1e-12):
        """Return the id of an element containing each point.

        Points on shared edges are assigned to one of the incident elements.
        Raises :class:`PointLocationError` for points outside the mesh.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if not hasattr(self, "_tree"):
            self._tree = cKDTree(self.barycenters)
        k = min(12, self.n_elements)
        _, cand = self._tree.query(points, k=k)
        cand = np.atleast_2d(cand).reshape(len(points), -1)
        out = np.empty(len(points), dtype=np.int64)
        for p, (pt, row) in enumerate(zip(points, cand)):
            found = -1
            for K in row:
                if self._contains(int(K), pt, tol):
                    found = int(K)
                    break
            if found < 0:
                for K in range(self.n_elements):
                    if self._contains(K, pt, tol):
                        found = K
                        break
            if found < 0:
                raise PointLocationError(f"point {tuple(pt)} is outside the mesh")
            out[p] = found
        return out

    def _contains(self, K, pt, tol):
        xy = self.vertices[self.elements[K]]
        d = np.roll(xy, -1, axis=0) - xy
        r = pt - xy
        cross = d[:, 0] * r[:, 1] - d[:, 1] * r[:, 0]
        scale = tol * max(1.0, self.diameters[K])
        if is_convex_polygon(xy):
            return bool(np.all(cross >= -scale * np.hypot(d[:, 0], d[:, 1])))
        # winding number for non-convex cells, edges counted as inside
        lens = np.hypot(d[:, 0], d[:, 1])
        t = np.clip((r * d).sum(1) / lens**2, 0.0, 1.0)
        dist = np.hypot(r[:, 0] - t * d[:, 0], r[:, 1] - t * d[:, 1])
        if dist.min() <= scale:
            return True
        y0, y1 = xy[:, 1], np.roll(xy, -1, axis=0)[:, 1]
        up = (y0 <= pt[1]) & (y1 > pt[1]) & (cross > 0)
        down = (y0 > pt[1]) & (y1 <= pt[1]) & (cross < 0)
        return bool(up.sum() - down.sum() != 0)


# ----------------------------------------------------------------------
# generators
# ----------------------------------------------------------------------
def triangulate_unit_square(n):
    """Uniform triangulation of (0, 1)^2 with ``2 n^2`` right triangles.

    Every square cell of the ``n x n`` grid is split along its
    south-west/north-east diagonal.
    """
    if int(n) != n or n < 1:
        raise InvalidInputError("n must be a positive integer")
    n = int(n)
    t = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(t, t, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    elements = []
    for j in range(n):
        for i in range(n):
            v00 = j * (n + 1) + i
            v10 = v00 + 1
            v01 = v00 + n + 1
            v11 = v01 + 1
            elements.append((v00, v10, v11))
            elements.append((v00, v11, v01))
    return PolyMesh(verts, elements, family="triangulation")


_REFLECT_TOL = 1e-12


def _reflected(seeds, band):
    """Seeds plus their mirror images across every side closer than ``band``."""
    x, y = seeds[:, 0], seeds[:, 1]
    parts = [seeds]
    for near, image in (
        (x < band, np.column_stack([-x, y])),
        (x > 1.0 - band, np.column_stack([2.0 - x, y])),
        (y < band, np.column_stack([x, -y])),
        (y > 1.0 - band, np.column_stack([x, 2.0 - y])),
    ):
        parts.append(image[near])
    return np.vstack(parts)


def _voronoi_cells(seeds):
    """Voronoi cells of ``seeds`` restricted to the unit square.

    Mirroring the seeds across the four sides makes the square's sides
    Voronoi edges, which is equivalent to clipping each cell by the
    half-planes of the square. Mirror images only ever cut away parts of a
    cell that lie outside the square, so only seeds near a side need them;
    if the narrow band leaves a cell poking out, all seeds are mirrored.
    """
    n = len(seeds)
    band = min(1.0, 4.0 / np.sqrt(n))
    while True:
        vor = Voronoi(_reflected(seeds, band))
        cells = []
        ok = True
        for s in range(n):
            region = vor.regions[vor.point_region[s]]
            if -1 in region or len(region) < 3:
                ok = False
                break
            cells.append(list(region))
        if ok:
            used = np.unique(np.concatenate([np.asarray(c) for c in cells]))
            v = vor.vertices[used]
            ok = bool(np.all(v > -1e-9) and np.all(v < 1.0 + 1e-9))
        if ok:
            return np.clip(vor.vertices, 0.0, 1.0), cells
        if band >= 1.0:
            raise GeometryError("could not bound the Voronoi cells by the unit square")
        band = 1.0


def _cell_centroids(verts, cells):
    # orientation-free: numerator and signed area flip together
    lens = np.fromiter((len(c) for c in cells), dtype=np.int64, count=len(cells))
    flat = np.fromiter((v for c in cells for v in c), dtype=np.int64, count=int(lens.sum()))
    starts = np.concatenate([[0], np.cumsum(lens)[:-1]])
    nxt = np.arange(len(flat)) + 1
    nxt[starts + lens - 1] = starts
    p, q = verts[flat], verts[flat[nxt]]
    cross = p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]
    area = 0.5 * np.add.reduceat(cross, starts)
    cx = np.add.reduceat((p[:, 0] + q[:, 0]) * cross, starts) / (6.0 * area)
    cy = np.add.reduceat((p[:, 1] + q[:, 1]) * cross, starts) / (6.0 * area)
    return np.column_stack([cx, cy])


def _merge_vertices(verts, cells, tol):
    """Collapse vertices closer than ``tol`` and drop repeated cycle entries."""
    tree = cKDTree(verts)
    parent = np.arange(len(verts))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    # prefer representatives that sit on the boundary so corners survive
    on_bnd = ((np.abs(verts) <= _REFLECT_TOL) | (np.abs(verts - 1.0) <= _REFLECT_TOL)).sum(1)
    for a, b in sorted(tree.query_pairs(tol)):
        ra, rb = find(a), find(b)
        if ra == rb:
            continue
        if on_bnd[rb] > on_bnd[ra]:
            ra, rb = rb, ra
        parent[rb] = ra
    roots = np.array([find(a) for a in range(len(verts))])
    used, inverse = np.unique(roots, return_inverse=True)
    new_verts = verts[used]
    new_cells = []
    for reg in cells:
        cyc = [int(inverse[v]) for v in reg]
        dedup = [v for i, v in enumerate(cyc) if v != cyc[i - 1]]
        new_cells.append(dedup)
    return new_verts, new_cells


def voronoi_mesh(n_cells, lloyd_iters=0, rng_seed=0, seeds=None, collapse_tol=1e-3, family=None):
    """Voronoi mesh of the unit square, optionally Lloyd relaxed.

    Parameters
    ----------
    n_cells : int
        Number of generating seeds (one cell per seed), at least 2.
    lloyd_iters : int
        Number of Lloyd iterations (seed <- cell centroid). Around a hundred
        iterations gives a nearly centroidal, regular looking mesh.
    rng_seed : int
        Seed for the uniform random initial seeds.
    seeds : array_like, optional
        Explicit initial seeds; overrides ``n_cells`` and ``rng_seed``.
    collapse_tol : float
        Edges shorter than ``collapse_tol`` times the mean cell size are
        collapsed to a point.
    family : str, optional
        Mesh family label; defaults to ``"polygonal"`` when
        ``lloyd_iters >= 10`` and ``"voronoi"`` otherwise.
    """
    if seeds is None:
        if int(n_cells) != n_cells or n_cells < 2:
            raise InvalidInputError("n_cells must be an integer >= 2")
        rng = np.random.default_rng(rng_seed)
        seeds = rng.random((int(n_cells), 2))
    seeds = np.array(seeds, dtype=float)
    if seeds.ndim != 2 or seeds.shape[1] != 2 or len(seeds) < 2:
        raise InvalidInputError("seeds must have shape (n, 2) with n >= 2")
    if np.any(seeds <= 0.0) or np.any(seeds >= 1.0):
        raise InvalidInputError("seeds must lie strictly inside the unit square")
    if len(cKDTree(seeds).query_pairs(1e-12)) > 0:
        raise InvalidInputError("duplicate seeds (closer than 1e-12)")
    if lloyd_iters < 0:
        raise InvalidInputError("lloyd_iters must be non-negative")

    for _ in range(int(lloyd_iters)):
        verts, cells = _voronoi_cells(seeds)
        seeds = _cell_centroids(verts, cells)

    verts, cells = _voronoi_cells(seeds)
    # qhull also reports vertices of the mirrored cells; keep only ours
    used = np.unique(np.concatenate([np.asarray(c) for c in cells]))
    remap = -np.ones(len(verts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    verts = verts[used].copy()
    cells = [[int(remap[v]) for v in c] for c in cells]
    verts[np.abs(verts) <= _REFLECT_TOL] = 0.0
    verts[np.abs(verts - 1.0) <= _REFLECT_TOL] = 1.0
    size = 1.0 / np.sqrt(len(seeds))
    verts, cells = _merge_vertices(verts, cells, max(collapse_tol * size, 1e-12))

    elements = []
    for s, reg in enumerate(cells):
        if len(reg) < 3:
            raise GeometryError(f"cell {s} collapsed while merging short edges")
        reg = np.asarray(reg)
        if polygon_signed_area(verts[reg]) < 0:
            reg = reg[::-1]
        elements.append(reg)

    if family is None:
        family = "polygonal" if lloyd_iters >= 10 else "voronoi"
    return PolyMesh(verts, elements, family=family)


def polygonal_mesh(n_cells, rng_seed=0, lloyd_iters=100):
    """Lloyd-relaxed ("regular") polygonal mesh with ``n_cells`` cells."""
    return voronoi_mesh(n_cells, lloyd_iters=lloyd_iters, rng_seed=rng_seed, family="polygonal")


def general_voronoi_mesh(n_cells, rng_seed=0, lloyd_iters=2):
    """Lightly relaxed random Voronoi mesh with ``n_cells`` cells."""
    return voronoi_mesh(n_cells, lloyd_iters=lloyd_iters, rng_seed=rng_seed, family="voronoi")


# ----------------------------------------------------------------------
# text format
# ----------------------------------------------------------------------
def write_mesh(mesh, path):
    """Write ``mesh`` in the ``NV NE`` / vertices / cycles text format."""
    lines = [f"# patchdg mesh ({mesh.family})", f"{mesh.n_vertices} {mesh.n_elements}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [" ".join([str(len(c))] + [str(int(v)) for v in c]) for c in mesh.elements]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path, fix_orientation=False, family="polygonal"):
    """Read a mesh written by :func:`write_mesh` (or by hand).

    Raises
    ------
    MeshParseError
        On malformed lines, out-of-range vertex indices or clockwise
        polygons (unless ``fix_orientation`` is set).
    """
    rows = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        text = raw.split("#", 1)[0].strip()
        if text:
            rows.append((lineno, text.split()))
    if not rows:
        raise MeshParseError("empty mesh file", 1)

    lineno, head = rows[0]
    try:
        nv, ne = (int(t) for t in head)
    except ValueError:
        raise MeshParseError("header must be 'NV NE'", lineno) from None
    if nv < 3 or ne < 1:
        raise MeshParseError("header counts out of range", lineno)
    if len(rows) < 1 + nv + ne:
        raise MeshParseError(f"expected {nv} vertex and {ne} element lines", rows[-1][0])
    if len(rows) > 1 + nv + ne:
        raise MeshParseError("trailing data after the last element", rows[1 + nv + ne][0])

    verts = np.empty((nv, 2))
    for i in range(nv):
        lineno, tok = rows[1 + i]
        if len(tok) != 2:
            raise MeshParseError("vertex line must hold two coordinates", lineno)
        try:
            verts[i] = [float(tok[0]), float(tok[1])]
        except ValueError:
            raise MeshParseError("bad vertex coordinate", lineno) from None
        if not np.all(np.isfinite(verts[i])):
            raise MeshParseError("non-finite vertex coordinate", lineno)

    elements = []
    for i in range(ne):
        lineno, tok = rows[1 + nv + i]
        try:
            vals = [int(t) for t in tok]
        except ValueError:
            raise MeshParseError("element line must hold integers", lineno) from None
        m = vals[0]
        if m < 3 or len(vals) != m + 1:
            raise MeshParseError(f"element line declares {m} vertices but lists {len(vals) - 1}", lineno)
        cyc = vals[1:]
        bad = [v for v in cyc if v < 0 or v >= nv]
        if bad:
            raise MeshParseError(f"vertex index {bad[0]} out of range 0..{nv - 1}", lineno)
        area = polygon_signed_area(verts[cyc])
        if area < 0:
            if not fix_orientation:
                raise MeshParseError("polygon is clockwise (use fix_orientation)", lineno)
            cyc = cyc[::-1]
        elif area == 0:
            raise MeshParseError("polygon has zero area", lineno)
        elements.append(cyc)
    return PolyMesh(verts, elements, family=family)


# ----------------------------------------------------------------------
# sub-triangulation
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class SubTriangulation:
    """Triangles covering every element exactly.

    ``triangles[K]`` is an ``(nt, 3, 2)`` array of CCW triangle corners.
    """

    triangles: list

    def areas(self, K):
        t = self.triangles[K]
        a, b, c = t[:, 0], t[:, 1], t[:, 2]
        return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def _ear_clip(xy):
    idx = list(range(len(xy)))
    tris = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10 * len(xy) ** 2:
            raise GeometryError("ear clipping failed; polygon is not simple")
        m = len(idx)
        for a in range(m):
            i0, i1, i2 = idx[a - 1], idx[a], idx[(a + 1) % m]
            p0, p1, p2 = xy[i0], xy[i1], xy[i2]
            turn = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0])
            if turn <= 0:
                continue
            inside = False
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                q = xy[j]
                c1 = (p1[0] - p0[0]) * (q[1] - p0[1]) - (p1[1] - p0[1]) * (q[0] - p0[0])
                c2 = (p2[0] - p1[0]) * (q[1] - p1[1]) - (p2[1] - p1[1]) * (q[0] - p1[0])
                c3 = (p0[0] - p2[0]) * (q[1] - p2[1]) - (p0[1] - p2[1]) * (q[0] - p2[0])
                if c1 >= 0 and c2 >= 0 and c3 >= 0:
                    inside = True
                    break
            if inside:
                continue
            tris.append((i0, i1, i2))
            del idx[a]
            break
        else:
            raise GeometryError("no ear found; polygon is not simple")
    tris.append(tuple(idx))
    return tris


def triangulate_polygon(xy):
    """Split a simple CCW polygon into ``m - 2`` triangles.

    Convex polygons are fanned from their first vertex; anything else goes
    through ear clipping.
    """
    xy = np.asarray(xy, dtype=float)
    m = len(xy)
    if m == 3:
        return xy[None, :, :].copy()
    if is_convex_polygon(xy):
        tris = [(0, a, a + 1) for a in range(1, m - 1)]
    else:
        if not is_simple_polygon(xy):
            raise GeometryError("cannot triangulate a non-simple polygon")
        tris = _ear_clip(xy)
    return np.stack([xy[list(t)] for t in tris])


def subtriangulate(mesh):
    """Sub-triangulation of every element of ``mesh``."""
    return SubTriangulation([triangulate_polygon(mesh.element_vertices(K)) for K in range(mesh.n_elements)])

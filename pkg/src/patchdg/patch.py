"""Element patches: agglomerations of nearby elements around each element.

A patch is grown ring by ring through face adjacency until it holds at least
``M`` elements, then trimmed by barycenter distance to exactly ``M``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, InvalidInputError

# rows: triangulation, regular polygonal, general Voronoi; columns: k = 1, 2, 3
PATCH_SIZE_TABLE = {
    "triangulation": {1: 4, 2: 7, 3: 11},
    "polygonal": {1: 5, 2: 9, 3: 15},
    "voronoi": {1: 7, 2: 12, 3: 19},
}

_FAMILY_ALIASES = {"tri": "triangulation", "poly": "polygonal", "vor": "voronoi"}


def n_monomials(k):
    """Dimension of the bivariate polynomials of total degree <= k."""
    return (k + 1) * (k + 2) // 2


def default_patch_size(mesh_family, k):
    """Patch cardinality used for mesh family ``mesh_family`` at order ``k``."""
    family = _FAMILY_ALIASES.get(mesh_family, mesh_family)
    if family not in PATCH_SIZE_TABLE:
        raise InvalidInputError(f"unknown mesh family {mesh_family!r}")
    try:
        return PATCH_SIZE_TABLE[family][k]
    except KeyError:
        raise InvalidInputError(f"no default patch size for k={k}; pass the patch size explicitly") from None


@dataclass(frozen=True)
class ElementPatch:
    """Patch of element ``owner``.

    Attributes
    ----------
    owner : int
    members : ndarray of int, shape (M,)
        ``members[0] == owner``; the rest sorted by distance to the owner's
        barycenter (ties by element id).
    barycenters : ndarray, shape (M, 2)
    weights : ndarray, shape (M - 1,)
        Normalised inverse squared distances of ``members[1:]``.
    n_rings : int
        Number of adjacency rings grown needed to reach the requested size.
    """

    owner: int
    members: np.ndarray
    barycenters: np.ndarray
    weights: np.ndarray
    n_rings: int

    @property
    def size(self):
        return len(self.members)


def grow_rings(adjacency, owner, min_size, max_rings=None):
    """Grow face-adjacency rings around ``owner`` until they hold ``min_size`` elements.

    Returns the list of rings; ``rings[0] == [owner]``.
    """
    rings = [[owner]]
    seen = {owner}
    while len(seen) < min_size:
        if max_rings is not None and len(rings) > max_rings:
            raise InvalidInputError(f"patch of element {owner} did not reach {min_size} elements")
        nxt = sorted({nb for E in rings[-1] for nb in adjacency[E] if nb not in seen})
        if not nxt:
            raise InvalidInputError(f"only {len(seen)} elements reachable from element {owner}; need {min_size}")
        seen.update(nxt)
        rings.append(nxt)
    return rings


def compute_weights(barycenters):
    """Inverse-square-distance weights of ``barycenters[1:]`` about ``barycenters[0]``.

    Raises
    ------
    GeometryError
        If a member barycenter coincides with the anchor.
    """
    barycenters = np.asarray(barycenters, dtype=float)
    d2 = np.sum((barycenters[1:] - barycenters[0]) ** 2, axis=1)
    if np.any(d2 == 0.0):
        raise GeometryError("patch member barycenter coincides with the owner barycenter")
    inv = 1.0 / d2
    return inv / inv.sum()


def build_patch(mesh, owner, M, adjacency=None, selection="distance"):
    """Build the patch of ``owner`` with ``M`` elements.

    Parameters
    ----------
    mesh : PolyMesh
    owner : int
    M : int
        Patch cardinality, ``1 <= M <= mesh.n_elements``.
    adjacency : list of list of int, optional
        Precomputed ``mesh.adjacency()``.
    selection : {"distance", "ring"}
        ``"distance"`` (default) keeps the ``M`` nearest of all grown
        candidates. ``"ring"`` keeps every element of the inner rings and
        fills up with the nearest elements of the outermost ring, so the
        patch is sandwiched between consecutive ring unions.
    """
    n = mesh.n_elements
    if int(M) != M or M < 1:
        raise InvalidInputError("patch size must be a positive integer")
    if M > n:
        raise InvalidInputError(f"patch size {M} exceeds the number of elements {n}")
    if selection not in ("ring", "distance"):
        raise InvalidInputError(f"unknown selection rule {selection!r}")
    if adjacency is None:
        adjacency = mesh.adjacency()
    rings = grow_rings(adjacency, owner, M, max_rings=n)
    a0 = mesh.barycenters[owner]

    def by_distance(ids):
        ids = np.asarray(ids, dtype=np.int64)
        d = np.sum((mesh.barycenters[ids] - a0) ** 2, axis=1)
        return ids[np.lexsort((ids, d))]

    if selection == "ring":
        inner = [E for r in rings[:-1] for E in r]
        outer = by_distance(rings[-1])[: M - len(inner)]
        chosen = np.concatenate([np.asarray(inner, dtype=np.int64), outer])
    else:
        chosen = by_distance([E for r in rings for E in r])[:M]
    rest = by_distance([E for E in chosen if E != owner])
    members = np.concatenate([[owner], rest]).astype(np.int64)
    bary = mesh.barycenters[members]
    weights = compute_weights(bary) if M > 1 else np.empty(0)
    return ElementPatch(int(owner), members, bary, weights, len(rings) - 1)


def build_patches(mesh, M, selection="distance"):
    """Patches of every element, cached on the mesh per ``(M, selection)``."""
    cache = mesh.__dict__.setdefault("_patch_cache", {})
    key = (int(M), selection)
    if key not in cache:
        adjacency = mesh.adjacency()
        cache[key] = [build_patch(mesh, K, M, adjacency, selection) for K in range(mesh.n_elements)]
    return cache[key]

"""Polytope value types and convex hull construction.

The hull builder wraps Qhull (scipy.spatial.ConvexHull) and post-processes its
output into a canonical form: unit outward normals, facets deduplicated across
Qhull's simplicial decomposition, and a lexicographic facet order so repeated
runs emit identical results.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DegenerateHull

FEAS_TOL = 1e-8
FACET_MATCH_TOL = 1e-9
HIGH_DIM_WARNING = 8


def dup_tolerance(v) -> float:
    """Scale-aware tolerance under which two vertices count as the same point."""
    return 1e-7 * (1.0 + float(np.max(np.abs(v), initial=0.0)))


def _as_matrix(a, rows: int, cols: int, name: str) -> np.ndarray:
    m = np.asarray(a, dtype=float).reshape(rows, cols) if cols == 0 else np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape != (rows, cols):
        raise ValueError(f"{name} must have shape ({rows}, {cols}), got {np.shape(a)}")
    return m


@dataclass(frozen=True)
class HPolytope:
    """Inequality description A x + B y <= c with x the coordination block.

    Boundedness is an invariant of the type but is only checked lazily, by the
    LPs that consume the region (an unbounded search direction raises
    NotPolytope there).
    """

    num_x: int
    num_y: int
    A: np.ndarray
    B: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        rows = len(c)
        A = _as_matrix(self.A, rows, self.num_x, "A")
        B = _as_matrix(self.B, rows, self.num_y, "B")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "c", c)

    @property
    def num_rows(self) -> int:
        return len(self.c)

    @property
    def num_vars(self) -> int:
        return self.num_x + self.num_y

    def stacked(self) -> np.ndarray:
        """Rows over the joint (x, y) variable vector."""
        return np.hstack([self.A, self.B])


@dataclass(frozen=True)
class Facet:
    """Halfspace normal . x <= offset with the normal stored unit-length."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.atleast_1d(np.asarray(self.normal, dtype=float))
        nrm = float(np.linalg.norm(n))
        if nrm <= 0.0 or not np.isfinite(nrm):
            raise ValueError("facet normal must be nonzero and finite")
        # +0.0 canonicalizes any -0.0 components so serialized output is stable
        object.__setattr__(self, "normal", n / nrm + 0.0)
        object.__setattr__(self, "offset", float(self.offset) / nrm + 0.0)


@dataclass(frozen=True)
class VRep:
    """Vertex description of a polytope, plus its facets once a hull is built."""

    dim: int
    vertices: np.ndarray
    facets: tuple[Facet, ...] = field(default_factory=tuple)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim == 1:
            v = v.reshape(-1, self.dim) if self.dim else v.reshape(0, 0)
        if v.ndim != 2 or v.shape[1] != self.dim:
            raise ValueError(f"vertices must be (k, {self.dim}), got {v.shape}")
        object.__setattr__(self, "vertices", v + 0.0)
        object.__setattr__(self, "facets", tuple(self.facets))

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    def facet_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked (normals, offsets) of all facets."""
        if not self.facets:
            return np.zeros((0, self.dim)), np.zeros(0)
        return (np.array([f.normal for f in self.facets]),
                np.array([f.offset for f in self.facets]))


def facet_distance(facet: Facet, point) -> float:
    """Signed distance from point to the facet hyperplane; > 0 means outside."""
    p = np.asarray(point, dtype=float)
    return float(np.dot(facet.normal, p) - facet.offset)


def contains(hull: VRep, point, tol: float) -> bool:
    """Whether the point satisfies every facet within tol.

    A facet-free single-vertex hull degenerates to a point-identity test.
    """
    p = np.asarray(point, dtype=float)
    if hull.facets:
        normals, offsets = hull.facet_arrays()
        return bool(np.max(normals @ p - offsets) <= tol)
    if hull.num_vertices == 1:
        return bool(np.max(np.abs(p - hull.vertices[0])) <= tol)
    raise ValueError("hull has no facets")


def dedup_points(points: np.ndarray) -> np.ndarray:
    """Drop points that coincide with an earlier one under dup_tolerance."""
    kept: list[np.ndarray] = []
    for p in points:
        tol = dup_tolerance(p)
        if not any(np.max(np.abs(p - q)) <= tol for q in kept):
            kept.append(p)
    return np.array(kept) if kept else points.reshape(0, points.shape[1] if points.ndim == 2 else 0)


def affine_dimension(points: np.ndarray, rel_tol: float = 1e-9) -> int:
    """Dimension of the affine hull of the points."""
    if len(points) <= 1:
        return 0
    d = points[1:] - points[0]
    s = np.linalg.svd(d, compute_uv=False)
    scale = float(s[0]) if len(s) and s[0] > 0 else 0.0
    if scale == 0.0:
        return 0
    thresh = max(rel_tol * scale, 1e-12 * (1.0 + float(np.max(np.abs(points)))))
    return int(np.sum(s > thresh))


def _dedup_facets(normals: np.ndarray, offsets: np.ndarray) -> list[Facet]:
    kept: list[tuple[np.ndarray, float]] = []
    for n, d in zip(normals, offsets):
        dup = any(
            np.max(np.abs(n - kn)) <= FACET_MATCH_TOL
            and abs(d - kd) <= FACET_MATCH_TOL * (1.0 + abs(kd))
            for kn, kd in kept
        )
        if not dup:
            kept.append((n, d))
    return [Facet(n, d) for n, d in kept]


def _sort_facets(facets: list[Facet]) -> tuple[Facet, ...]:
    if not facets:
        return ()
    arr = np.array([np.append(f.normal, f.offset) for f in facets])
    order = np.lexsort(arr.T[::-1])
    return tuple(facets[i] for i in order)


def _interval_hull(pts: np.ndarray) -> VRep:
    lo, hi = float(np.min(pts)), float(np.max(pts))
    verts = np.array([[lo], [hi]])
    facets = _sort_facets([Facet(np.array([1.0]), hi), Facet(np.array([-1.0]), -lo)])
    return VRep(dim=1, vertices=verts, facets=facets)


def _extract(qhull: ConvexHull, pts: np.ndarray, dim: int) -> VRep:
    vert_idx = np.sort(np.asarray(qhull.vertices))
    vertices = pts[vert_idx]
    eq = qhull.equations
    facets = _dedup_facets(eq[:, :-1], -eq[:, -1])
    return VRep(dim=dim, vertices=vertices, facets=_sort_facets(facets))


def build_hull(points, dim: int) -> VRep:
    """Convex hull of the points: extreme subset plus irredundant facet list.

    Facets carry unit outward normals and are ordered lexicographically by
    (normal, offset). Raises DegenerateHull when the points span an affine
    subspace of dimension below `dim`; the caller owns any affine-subspace
    fallback.
    """
    pts = dedup_points(np.asarray(points, dtype=float).reshape(-1, dim))
    if dim > HIGH_DIM_WARNING:
        warnings.warn(f"hull construction in dimension {dim}: facet counts may explode",
                      RuntimeWarning, stacklevel=2)
    adim = affine_dimension(pts)
    if len(pts) < dim + 1 or adim < dim:
        raise DegenerateHull(affine_dim=adim, requested_dim=dim)
    if dim == 1:
        return _interval_hull(pts)
    try:
        qhull = ConvexHull(pts)
    except QhullError as exc:  # near-degenerate input Qhull rejects late
        raise DegenerateHull(affine_dim=adim, requested_dim=dim) from exc
    return _extract(qhull, pts, dim)


def insert_vertices(hull: VRep, new_points) -> VRep:
    """Add points to an existing full-dimensional hull.

    Equivalent to build_hull on the union; duplicate and interior points are
    absorbed without touching the current facet set, and Qhull's incremental
    mode only revisits facets visible from each genuinely new point.
    """
    new = np.asarray(new_points, dtype=float).reshape(-1, hull.dim)
    normals, offsets = hull.facet_arrays()
    fresh: list[np.ndarray] = []
    for p in new:
        tol = dup_tolerance(p)
        if any(np.max(np.abs(p - q)) <= tol for q in hull.vertices):
            continue
        if any(np.max(np.abs(p - q)) <= tol for q in fresh):
            continue
        if len(normals) and np.max(normals @ p - offsets) <= FEAS_TOL:
            continue
        fresh.append(p)
    if not fresh:
        return hull
    if hull.dim == 1:
        return _interval_hull(np.vstack([hull.vertices, np.array(fresh)]))
    qhull = ConvexHull(hull.vertices, incremental=True)
    try:
        qhull.add_points(np.array(fresh))
        pts = qhull.points
        return _extract(qhull, pts, hull.dim)
    finally:
        qhull.close()

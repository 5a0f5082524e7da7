"""Progressive vertex enumeration: project a polytope onto its coordination
variables with an explicit Hausdorff-distance error budget.

The double loop identifies projection vertices by maximizing along facet
normals of the current inner hull. Each accepted vertex lies in the exact
projection, so every intermediate hull is a conservative approximation; the
loop stops once the largest facet improvement drops to the error tolerance.

Beyond the core loop this module implements the supporting machinery the
algorithm needs in practice: lexicographic refinement so ties on optimal faces
resolve to extreme points, initialization that certifies full dimensionality
(or reports the affine subspace of a flat projection), warm-started facet
searches, and an optional certification pass that converts the facet-slack
bookkeeping into a rigorous bound on the true Hausdorff error.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import lp
from .errors import EmptyRegion, FlatProjection, NotPolytope
from .geometry import (
    Facet,
    HPolytope,
    VRep,
    build_hull,
    contains,
    dup_tolerance,
    facet_distance,
    insert_vertices,
)

FEAS_TOL = 1e-8
_RANK_TOL = 1e-7


def _ir_threshold(vertex: np.ndarray) -> float:
    """Minimum facet improvement accepted as a genuinely new vertex."""
    return 1e-7 * (1.0 + float(np.max(np.abs(vertex), initial=0.0)))


class PveStatus(Enum):
    CONVERGED = "Converged"
    MAX_LOOPS_REACHED = "MaxLoopsReached"


@dataclass(frozen=True)
class PveConfig:
    """Projection controls.

    epsilon is the Hausdorff error budget in coordination-variable units.
    certify=None enables the rigorous error certificate automatically when
    epsilon > 0 and the coordination dimension is small enough to enumerate
    the outer bound's vertices.
    """

    epsilon: float = 0.0
    max_outer_loops: int = 100
    parallel_inner: bool = False
    auto_flat: bool = True
    presolve_redundancy: bool = False
    certify: bool | None = None
    keep_hull_trace: bool = False

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.max_outer_loops < 1:
            raise ValueError("max_outer_loops must be >= 1")

    def wants_certificate(self, dim: int) -> bool:
        if self.certify is not None:
            return self.certify
        return self.epsilon > 0 and dim <= 3


@dataclass(frozen=True)
class PveResult:
    """Inner hull plus the per-loop error and growth record."""

    hull: VRep
    error_trace: tuple[float, ...]
    new_vertex_counts: tuple[int, ...]
    outer_loops: int
    status: PveStatus
    provenance: tuple[tuple[int, int], ...] = ()
    certified_bound: float | None = None
    hull_trace: tuple[VRep, ...] = ()

    @property
    def converged(self) -> bool:
        return self.status is PveStatus.CONVERGED


# ---------------------------------------------------------------------------
# vertex identification


def _solve_direction(region: HPolytope, direction: np.ndarray,
                     warm: lp.Basis | None = None) -> lp.LpSolution:
    obj = np.concatenate([direction, np.zeros(region.num_y)])
    return lp.solve(lp.region_lp(region, obj), warm_start=warm)


def _identify(region: HPolytope, direction: np.ndarray,
              warm: lp.Basis | None = None):
    """Extreme point of the projection maximizing direction . x.

    Returns (vertex, h, basis_token). The first LP fixes the optimal value h;
    a lexicographic pass then maximizes x_1, x_2, ... on that face so the
    returned point is an extreme point of the projection even when the
    optimal face has positive dimension.
    """
    alpha = np.asarray(direction, dtype=float)
    if np.linalg.norm(alpha) <= 0:
        raise ValueError("direction must be nonzero")
    num_x, num_y = region.num_x, region.num_y
    sol = _solve_direction(region, alpha, warm)
    if sol.status is lp.LpStatus.INFEASIBLE:
        raise EmptyRegion("region is infeasible")
    if sol.status is lp.LpStatus.UNBOUNDED:
        raise NotPolytope(direction=alpha)
    h = sol.objective_value
    token = sol.basis
    first_token = token
    G = region.stacked()
    g = region.c
    z = sol.z_star
    for i in range(num_x):
        # pin the previous optimum exactly; phase-1 tolerance absorbs roundoff
        fix_dir = alpha if i == 0 else _unit(num_x, i - 1)
        fix_val = h if i == 0 else z[i - 1]
        row = np.concatenate([fix_dir, np.zeros(num_y)])
        G = np.vstack([G, row, -row])
        g = np.concatenate([g, [fix_val, -fix_val]])
        obj = np.zeros(num_x + num_y)
        obj[i] = 1.0
        problem = lp.LpProblem(obj, G, g, lp.free_bounds(num_x + num_y))
        warm_i = token.extended(2) if token is not None else None
        sol = lp.solve(problem, warm_start=warm_i)
        if sol.status is lp.LpStatus.UNBOUNDED:
            raise NotPolytope(direction=_unit(num_x, i))
        if not sol.is_optimal:  # band keeps the previous optimum feasible
            break
        z = sol.z_star
        token = sol.basis
    return z[:num_x] + 0.0, float(h), first_token


def _unit(n: int, i: int) -> np.ndarray:
    e = np.zeros(n)
    e[i] = 1.0
    return e


def identify_vertex(region: HPolytope, direction) -> tuple[np.ndarray, float]:
    """Public wrapper of the directional vertex search."""
    vertex, h, _ = _identify(region, np.asarray(direction, dtype=float))
    return vertex, h


def _is_duplicate(v: np.ndarray, pool) -> bool:
    tol = dup_tolerance(v)
    return any(np.max(np.abs(v - q)) <= tol for q in pool)


def _orthonormal_complement(basis: np.ndarray, dim: int) -> np.ndarray:
    """Columns spanning the orthogonal complement of the given column basis."""
    if basis.size == 0:
        return np.eye(dim)
    q, _ = np.linalg.qr(np.hstack([basis, np.eye(dim)]))
    return q[:, basis.shape[1]: dim]


def _affine_basis(vertices: np.ndarray):
    """Base point, orthonormal affine basis and scale-aware rank."""
    x0 = vertices[0]
    if len(vertices) == 1:
        return x0, np.zeros((len(x0), 0)), 0
    d = vertices[1:] - x0
    u, s, vh = np.linalg.svd(d, full_matrices=False)
    scale = 1.0 + float(np.max(np.abs(vertices)))
    rank = int(np.sum(s > _RANK_TOL * scale))
    return x0, vh[:rank].T.copy(), rank


def initial_vertices(region: HPolytope) -> list[np.ndarray]:
    """Distinct projection vertices found along +-e_i, completed to full rank.

    Axis searches alone can return affinely deficient vertex sets even for a
    full-dimensional projection (the lexicographic tie-break may hit the same
    corner from several directions), so directions orthogonal to the current
    affine hull are probed until either the rank reaches num_x or every
    remaining direction is certified flat by its two support values; the
    latter case raises FlatProjection with the affine description.
    """
    num_x = region.num_x
    found: list[np.ndarray] = []
    for i in range(num_x):
        for sign in (1.0, -1.0):
            v, _, _ = _identify(region, sign * _unit(num_x, i))
            if not _is_duplicate(v, found):
                found.append(v)
    while True:
        x0, basis, rank = _affine_basis(np.array(found))
        if rank >= num_x:
            return found
        scale = 1.0 + float(np.max(np.abs(np.array(found))))
        grew = False
        for w in _orthonormal_complement(basis, num_x).T:
            hi_sol = _solve_direction(region, w)
            if hi_sol.status is lp.LpStatus.UNBOUNDED:
                raise NotPolytope(direction=w)
            lo_sol = _solve_direction(region, -w)
            if lo_sol.status is lp.LpStatus.UNBOUNDED:
                raise NotPolytope(direction=-w)
            anchor = float(w @ x0)
            if hi_sol.objective_value - anchor > _RANK_TOL * scale:
                v, _, _ = _identify(region, w)
            elif anchor + lo_sol.objective_value > _RANK_TOL * scale:
                v, _, _ = _identify(region, -w)
            else:
                continue
            if not _is_duplicate(v, found):
                found.append(v)
                grew = True
                break
        if not grew:
            raise FlatProjection(affine_dim=rank, affine_basis=basis, base_point=x0)


# ---------------------------------------------------------------------------
# distance to a hull (min-norm point in a shifted polytope)


def _min_norm_point(points: np.ndarray, max_iter: int = 10_000) -> float:
    """Norm of the minimum-norm point of conv(points); Wolfe's algorithm."""
    scale = float(np.max(np.linalg.norm(points, axis=1), initial=0.0))
    if scale == 0.0:
        return 0.0
    tol = 1e-12 * max(1.0, scale * scale)
    norms = np.linalg.norm(points, axis=1)
    S = [int(np.argmin(norms))]
    lam = np.array([1.0])
    x = points[S[0]].astype(float)
    for _ in range(max_iter):
        dots = points @ x
        j = int(np.argmin(dots))
        if float(x @ x) - float(dots[j]) <= tol:
            break
        if j in S:
            break
        S.append(j)
        lam = np.append(lam, 0.0)
        while True:
            R = points[S]
            k = len(S)
            kkt = np.zeros((k + 1, k + 1))
            kkt[:k, :k] = R @ R.T
            kkt[:k, k] = 1.0
            kkt[k, :k] = 1.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            try:
                mu = np.linalg.solve(kkt, rhs)[:k]
            except np.linalg.LinAlgError:
                mu = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:k]
            if np.all(mu >= -1e-12):
                lam = np.maximum(mu, 0.0)
                lam /= lam.sum()
                break
            neg = mu < lam - 1e-15
            with np.errstate(divide="ignore", invalid="ignore"):
                steps = np.where(neg & (lam > mu), lam / (lam - mu), np.inf)
            theta = float(np.min(steps[mu < 0])) if np.any(mu < 0) else 0.0
            theta = min(max(theta, 0.0), 1.0)
            lam = lam + theta * (mu - lam)
            keep = lam > 1e-14
            if keep.all():
                keep[int(np.argmin(lam))] = False
            S = [s for s, k_ in zip(S, keep) if k_]
            lam = lam[keep]
            lam /= lam.sum()
        x = lam @ points[S]
    return float(np.linalg.norm(x))


def distance_to_hull(hull: VRep, point) -> float:
    """Euclidean distance from the point to the hull (0 when inside)."""
    p = np.asarray(point, dtype=float)
    if hull.facets:
        normals, offsets = hull.facet_arrays()
        if float(np.max(normals @ p - offsets)) <= 0.0:
            return 0.0
    return _min_norm_point(hull.vertices - p)


def hausdorff_error(candidate: VRep, reference: VRep) -> float:
    """Max over reference vertices of their distance to the candidate hull.

    Equals the true Hausdorff distance whenever the candidate is contained in
    the reference, which is the conservative-approximation setting this
    package produces.
    """
    return max((distance_to_hull(candidate, v) for v in reference.vertices),
               default=0.0)


# ---------------------------------------------------------------------------
# certification of the error bound


def _enumerate_hrep_vertices(normals: np.ndarray, offsets: np.ndarray,
                             tol: float = 1e-7) -> np.ndarray:
    """Vertices of {x : N x <= d} by brute-force row-subset intersection."""
    m, dim = normals.shape
    pts = []
    for rows in itertools.combinations(range(m), dim):
        sub = normals[list(rows)]
        try:
            x = np.linalg.solve(sub, offsets[list(rows)])
        except np.linalg.LinAlgError:
            continue
        scale = 1.0 + float(np.max(np.abs(x)))
        if np.all(normals @ x <= offsets + tol * scale):
            pts.append(x)
    if not pts:
        return np.zeros((0, dim))
    out: list[np.ndarray] = []
    for p in pts:
        if not _is_duplicate(p, out):
            out.append(p)
    return np.array(out)


def _certified_bound(hull: VRep, facet_supports: np.ndarray) -> float:
    """Upper bound on the Hausdorff distance from the exact projection.

    The facet searches of the last loop give, for each inner-hull facet, the
    exact support value of the projection along that normal. The projection is
    therefore contained in the polytope those supports describe; the worst
    vertex of that outer polytope bounds the error of the output hull.
    """
    normals, _ = hull.facet_arrays()
    outer = _enumerate_hrep_vertices(normals, facet_supports)
    if not len(outer):
        return 0.0
    return max(float(_min_norm_point(hull.vertices - w)) for w in outer)


# ---------------------------------------------------------------------------
# the outer/inner loop


def _worker_count() -> int:
    env = os.environ.get("EPKIT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


def _facet_tokens(hull: VRep, token_store: dict[bytes, lp.Basis]):
    """Warm-start token per facet, taken from an incident hull vertex."""
    normals, offsets = hull.facet_arrays()
    tokens: list[lp.Basis | None] = []
    for n, d in zip(normals, offsets):
        tok = None
        dists = hull.vertices @ n - d
        scale = 1.0 + abs(d)
        for idx in np.where(np.abs(dists) <= 1e-7 * scale)[0]:
            tok = token_store.get(hull.vertices[idx].tobytes())
            if tok is not None:
                break
        tokens.append(tok)
    return tokens


def project(region: HPolytope, config: PveConfig | None = None) -> PveResult:
    """Project the region onto its coordination block within config.epsilon.

    Every vertex of the output hull is feasible for the source region, so the
    result is conservative regardless of termination status; with epsilon 0
    and Converged status it is the exact projection.
    """
    config = config or PveConfig()
    if region.num_x < 1:
        raise ValueError("projection needs at least one coordination variable")
    if config.presolve_redundancy:
        region = lp.remove_redundant(region)
    try:
        V = initial_vertices(region)
    except FlatProjection as flat:
        if not config.auto_flat:
            raise
        return _project_flat(region, config, flat)
    provenance = [(0, i) for i in range(len(V))]
    token_store: dict[bytes, lp.Basis] = {}
    hull = build_hull(np.array(V), region.num_x)
    error_trace: list[float] = []
    new_counts: list[int] = []
    hull_trace: list[VRep] = []
    status = PveStatus.MAX_LOOPS_REACHED
    certified: float | None = None
    want_cert = config.wants_certificate(region.num_x)
    loops = 0
    for k in range(1, config.max_outer_loops + 1):
        loops = k
        if config.keep_hull_trace:
            hull_trace.append(hull)
        facets = hull.facets
        tokens = _facet_tokens(hull, token_store)

        def search(args):
            facet, tok = args
            return _identify(region, facet.normal, warm=tok)

        if config.parallel_inner and len(facets) > 1:
            with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
                results = list(pool.map(search, zip(facets, tokens)))
        else:
            results = [search(a) for a in zip(facets, tokens)]

        improvements: list[float] = []
        supports = np.zeros(len(facets))
        added: list[np.ndarray] = []
        for j, (facet, (vertex, h, tok)) in enumerate(zip(facets, results)):
            supports[j] = max(h, facet.offset)
            ir = facet_distance(facet, vertex)
            if ir > _ir_threshold(vertex) and not _is_duplicate(vertex, V):
                V.append(vertex)
                added.append(vertex)
                provenance.append((k, j))
                improvements.append(ir)
                token_store[vertex.tobytes()] = tok
        err = max(improvements) if improvements else 0.0
        error_trace.append(err)
        new_counts.append(len(added))
        if added:
            hull = insert_vertices(hull, np.array(added))
        if err <= config.epsilon:
            if want_cert and config.epsilon > 0:
                bound = _certified_bound(hull, supports) if not added else None
                if bound is None:
                    # hull changed after the searches: recheck next loop
                    continue
                certified = bound
                if bound > config.epsilon + 1e-12:
                    continue
            status = PveStatus.CONVERGED
            break
    return PveResult(
        hull=hull,
        error_trace=tuple(error_trace),
        new_vertex_counts=tuple(new_counts),
        outer_loops=loops,
        status=status,
        provenance=tuple(provenance),
        certified_bound=certified,
        hull_trace=tuple(hull_trace),
    )


def _project_flat(region: HPolytope, config: PveConfig,
                  flat: FlatProjection) -> PveResult:
    """Re-run the projection inside the affine hull of a flat projection."""
    x0 = np.asarray(flat.base_point, dtype=float)
    U = np.asarray(flat.affine_basis, dtype=float).reshape(region.num_x, flat.affine_dim)
    rank = flat.affine_dim
    num_x = region.num_x
    complement = _orthonormal_complement(U, num_x)
    pin_facets: list[Facet] = []
    for w in complement.T:
        off = float(w @ x0)
        pin_facets.extend([Facet(w, off), Facet(-w, -off)])
    if rank == 0:
        hull = VRep(dim=num_x, vertices=x0.reshape(1, -1),
                    facets=tuple(pin_facets))
        return PveResult(hull=hull, error_trace=(0.0,), new_vertex_counts=(0,),
                         outer_loops=1, status=PveStatus.CONVERGED,
                         provenance=((0, 0),))
    reduced = HPolytope(
        num_x=rank,
        num_y=region.num_y,
        A=region.A @ U,
        B=region.B,
        c=region.c - region.A @ x0,
    )
    inner = project(reduced, config)
    vertices = x0 + inner.hull.vertices @ U.T
    facets = list(pin_facets)
    for f in inner.hull.facets:
        n = U @ f.normal
        facets.append(Facet(n, f.offset + float(n @ x0)))
    hull = VRep(dim=num_x, vertices=vertices, facets=tuple(facets))
    return PveResult(
        hull=hull,
        error_trace=inner.error_trace,
        new_vertex_counts=inner.new_vertex_counts,
        outer_loops=inner.outer_loops,
        status=inner.status,
        provenance=inner.provenance,
        certified_bound=inner.certified_bound,
    )

"""Transmission-distribution coordinated dispatch.

Feeders are radial networks under the linearized DistFlow model (squared
voltage as the independent variable keeps every constraint linear); branch
apparent-power limits use an inscribed-polygon inner approximation. Each
feeder is summarized by the projection of its operating region onto (root
exchange, cost); the transmission operator dispatches against those polygons
and each feeder re-dispatches at the published exchange.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lp
from .errors import (
    InfeasibleBoundary,
    InfeasibleCoordination,
    InfeasibleFeeder,
    NonRadial,
)
from .geometry import HPolytope, VRep
from .macod import Generator
from .pve import PveConfig, PveResult, project

DEFAULT_CAPACITY_SEGMENTS = 8


@dataclass(frozen=True)
class DerUnit:
    """Distributed resource with P/Q capability box and convex P cost."""

    node: int
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    cost_segments: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if self.p_min > self.p_max or self.q_min > self.q_max:
            raise ValueError("DER bounds are inverted")
        segs = tuple((float(a), float(b)) for a, b in self.cost_segments)
        if not segs:
            raise ValueError("DER needs at least one cost segment")
        slopes = [a for a, _ in segs]
        if any(s2 < s1 - 1e-12 for s1, s2 in zip(slopes, slopes[1:])):
            raise ValueError("cost segment slopes must be nondecreasing")
        object.__setattr__(self, "cost_segments", segs)

    def cost_at(self, p: float) -> float:
        return max(a * p + b for a, b in self.cost_segments)


@dataclass(frozen=True)
class FeederBranch:
    from_node: int      # side closer to the root after orientation
    to_node: int
    resistance: float   # p.u.
    reactance: float    # p.u.
    cap: float          # MVA ('inf' for an unmonitored branch)

    def __post_init__(self):
        if self.cap <= 0:
            raise ValueError("branch capacity must be positive")


@dataclass(frozen=True)
class FeederSystem:
    """Radial feeder rooted at node 0 (the substation, no local load/DER)."""

    loads_p: np.ndarray
    loads_q: np.ndarray
    ders: tuple[DerUnit, ...]
    branches: tuple[FeederBranch, ...]
    v_min2: float
    v_max2: float
    v0_2: float
    n_segments: int = DEFAULT_CAPACITY_SEGMENTS
    cost_cap: float | None = None

    def __post_init__(self):
        lp_ = np.atleast_1d(np.asarray(self.loads_p, dtype=float))
        lq = np.atleast_1d(np.asarray(self.loads_q, dtype=float))
        if len(lp_) != len(lq):
            raise ValueError("loads_p and loads_q lengths differ")
        if abs(lp_[0]) > 0 or abs(lq[0]) > 0:
            raise ValueError("the root node carries no load")
        if not (self.v_min2 <= self.v0_2 <= self.v_max2):
            raise ValueError("root voltage outside voltage limits")
        if self.n_segments < 3:
            raise ValueError("capacity polygon needs at least 3 segments")
        object.__setattr__(self, "loads_p", lp_)
        object.__setattr__(self, "loads_q", lq)
        object.__setattr__(self, "ders", tuple(self.ders))
        object.__setattr__(self, "branches", tuple(self.branches))
        for d in self.ders:
            if not (1 <= d.node < len(lp_)):
                raise ValueError("DER node outside the feeder (or at the root)")

    @property
    def num_nodes(self) -> int:
        return len(self.loads_p)

    def effective_cost_cap(self) -> float:
        if self.cost_cap is not None:
            return float(self.cost_cap)
        top = sum(max(0.0, d.cost_at(d.p_max)) for d in self.ders)
        return 1.5 * top if top > 0 else 1.0


@dataclass(frozen=True)
class TransmissionSystem:
    """DC transmission network with feeder attachment nodes."""

    generators: tuple[Generator, ...]
    loads: np.ndarray
    ptdf: np.ndarray
    line_caps: np.ndarray
    feeder_nodes: tuple[int, ...]

    def __post_init__(self):
        loads = np.atleast_1d(np.asarray(self.loads, dtype=float))
        caps = np.atleast_1d(np.asarray(self.line_caps, dtype=float))
        ptdf = np.asarray(self.ptdf, dtype=float).reshape(len(caps), len(loads))
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "loads", loads)
        object.__setattr__(self, "ptdf", ptdf)
        object.__setattr__(self, "line_caps", caps)
        object.__setattr__(self, "feeder_nodes", tuple(int(n) for n in self.feeder_nodes))


def orient_radial(feeder: FeederSystem) -> list[tuple[int, int, int]]:
    """Branches as (branch_index, parent, child) oriented away from the root.

    Raises NonRadial unless the branch set is a spanning tree of the nodes.
    """
    n = feeder.num_nodes
    if len(feeder.branches) != n - 1:
        raise NonRadial(f"{len(feeder.branches)} branches for {n} nodes")
    adj: dict[int, list[tuple[int, int]]] = {i: [] for i in range(n)}
    for bi, b in enumerate(feeder.branches):
        if not (0 <= b.from_node < n and 0 <= b.to_node < n):
            raise NonRadial("branch endpoint outside the feeder")
        adj[b.from_node].append((bi, b.to_node))
        adj[b.to_node].append((bi, b.from_node))
    seen = {0}
    order: list[tuple[int, int, int]] = []
    stack = [0]
    while stack:
        u = stack.pop()
        for bi, v in adj[u]:
            if v not in seen:
                seen.add(v)
                order.append((bi, u, v))
                stack.append(v)
    if len(seen) != n:
        raise NonRadial("feeder graph is not connected")
    return order


# ---------------------------------------------------------------------------
# feeder region


def build_feeder_region(feeder: FeederSystem) -> HPolytope:
    """Operating region over ([root P exchange, cost], internals).

    Internal block: root Q exchange, DER P and Q outputs, per-DER cost
    epigraph values, branch P/Q flows (oriented away from the root), and
    squared nodal voltages. Exchange is positive when the feeder exports.
    """
    tree = orient_radial(feeder)
    n = feeder.num_nodes
    nd = len(feeder.ders)
    nb = len(feeder.branches)
    ns = feeder.n_segments
    # internal layout offsets
    o_q0 = 0
    o_pg = 1
    o_qg = o_pg + nd
    o_cg = o_qg + nd
    o_fp = o_cg + nd
    o_fq = o_fp + nb
    o_v = o_fq + nb
    ny = o_v + n
    nx = 2

    rows_A: list[np.ndarray] = []
    rows_B: list[np.ndarray] = []
    rhs: list[float] = []

    def add(ax, by, c):
        rows_A.append(ax)
        rows_B.append(by)
        rhs.append(float(c))

    def eq(ax, by, c):
        add(ax, by, c)
        add(-ax, -by, -c)

    zx, zy = np.zeros(nx), np.zeros(ny)
    cap_row = zx.copy()
    cap_row[1] = 1.0
    add(cap_row, zy, feeder.effective_cost_cap())
    low = zx.copy()
    low[1] = -1.0
    segsum = zy.copy()
    segsum[o_cg: o_cg + nd] = 1.0
    add(low, segsum, 0.0)
    for di, d in enumerate(feeder.ders):
        for a, b in d.cost_segments:
            row = zy.copy()
            row[o_pg + di] = a
            row[o_cg + di] = -1.0
            add(zx, row, -b)

    parent_branch = {child: bi for bi, _, child in tree}
    children = {u: [] for u in range(n)}
    for bi, u, v in tree:
        children[u].append(bi)
    # nodal balance; the root rows define the exchange variables
    root_p = zx.copy()
    root_p[0] = 1.0
    root_row = zy.copy()
    for bi in children[0]:
        root_row[o_fp + bi] = 1.0
    eq(root_p, root_row, 0.0)
    root_q = zy.copy()
    root_q[o_q0] = 1.0
    for bi in children[0]:
        root_q[o_fq + bi] = 1.0
    eq(zx, root_q, 0.0)
    for node in range(1, n):
        prow = zy.copy()
        qrow = zy.copy()
        for di, d in enumerate(feeder.ders):
            if d.node == node:
                prow[o_pg + di] = 1.0
                qrow[o_qg + di] = 1.0
        prow[o_fp + parent_branch[node]] = 1.0
        qrow[o_fq + parent_branch[node]] = 1.0
        for bi in children[node]:
            prow[o_fp + bi] = -1.0
            qrow[o_fq + bi] = -1.0
        eq(zx, prow, feeder.loads_p[node])
        eq(zx, qrow, feeder.loads_q[node])
    # linearized DistFlow voltage drops
    for bi, u, v in tree:
        b = feeder.branches[bi]
        row = zy.copy()
        row[o_v + u] = 1.0
        row[o_v + v] = -1.0
        row[o_fp + bi] = -2.0 * b.resistance
        row[o_fq + bi] = -2.0 * b.reactance
        eq(zx, row, 0.0)
    # inscribed-polygon capacity
    for bi, b in enumerate(feeder.branches):
        if not np.isfinite(b.cap):
            continue
        for k in range(ns):
            ang = 2.0 * k * np.pi / ns
            row = zy.copy()
            row[o_fp + bi] = np.cos(ang)
            row[o_fq + bi] = np.sin(ang)
            add(zx, row, np.cos(np.pi / ns) * b.cap)
    # voltage limits; the root is pinned
    vroot = zy.copy()
    vroot[o_v] = 1.0
    eq(zx, vroot, feeder.v0_2)
    for node in range(1, n):
        row = zy.copy()
        row[o_v + node] = 1.0
        add(zx, row, feeder.v_max2)
        add(zx, -row, -feeder.v_min2)
    # DER capability boxes
    for di, d in enumerate(feeder.ders):
        prow = zy.copy()
        prow[o_pg + di] = 1.0
        add(zx, prow, d.p_max)
        add(zx, -prow, -d.p_min)
        qrow = zy.copy()
        qrow[o_qg + di] = 1.0
        add(zx, qrow, d.q_max)
        add(zx, -qrow, -d.q_min)

    region = HPolytope(num_x=nx, num_y=ny,
                       A=np.array(rows_A), B=np.array(rows_B), c=np.array(rhs))
    feas = lp.solve(lp.region_lp(region, np.zeros(region.num_vars)))
    if feas.status is lp.LpStatus.INFEASIBLE:
        raise InfeasibleFeeder("feeder has no feasible operating point")
    return region


def compute_feeder_ep(feeder: FeederSystem,
                      config: PveConfig | None = None) -> PveResult:
    """Projected (exchange, cost) polygon of the feeder."""
    return project(build_feeder_region(feeder), config or PveConfig())


# ---------------------------------------------------------------------------
# network-free cost aggregation


@dataclass(frozen=True)
class CostCurve:
    """Convex piecewise-linear curve as (exchange, cost) breakpoints."""

    points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float).reshape(-1, 2))

    @property
    def x_min(self) -> float:
        return float(self.points[0, 0])

    @property
    def x_max(self) -> float:
        return float(self.points[-1, 0])

    def value(self, x: float) -> float:
        xs, ys = self.points[:, 0], self.points[:, 1]
        if x < xs[0] - 1e-9 or x > xs[-1] + 1e-9:
            raise ValueError("exchange outside the curve domain")
        return float(np.interp(x, xs, ys))


def _der_blocks(d: DerUnit):
    """Constant-slope intervals of one DER's convex cost on [p_min, p_max]."""
    segs = list(d.cost_segments)
    cuts = {d.p_min, d.p_max}
    for i, (a1, b1) in enumerate(segs):
        for a2, b2 in segs[i + 1:]:
            if abs(a2 - a1) > 1e-15:
                p = (b1 - b2) / (a2 - a1)
                if d.p_min < p < d.p_max:
                    cuts.add(p)
    grid = sorted(cuts)
    blocks = []
    for lo, hi in zip(grid, grid[1:]):
        if hi - lo <= 1e-12:
            continue
        slope = (d.cost_at(hi) - d.cost_at(lo)) / (hi - lo)
        blocks.append((slope, lo, hi))
    return blocks


def aggregate_der_cost(feeder: FeederSystem) -> CostCurve:
    """Merit-order cost of all DERs ignoring every network constraint.

    Exchange is total dispatch minus total load, so the curve starts with all
    units at their minimum output.
    """
    total_load = float(np.sum(feeder.loads_p))
    base_x = sum(d.p_min for d in feeder.ders) - total_load
    base_cost = sum(d.cost_at(d.p_min) for d in feeder.ders)
    blocks = []
    for di, d in enumerate(feeder.ders):
        for a, lo, hi in _der_blocks(d):
            blocks.append((a, hi - lo, di))
    blocks.sort(key=lambda t: (t[0], t[2]))
    pts = [(base_x, base_cost)]
    x, cost = base_x, base_cost
    for a, width, _ in blocks:
        if width <= 1e-15:
            continue
        x += width
        cost += a * width
        pts.append((x, cost))
    return CostCurve(np.array(pts))


# ---------------------------------------------------------------------------
# coordination problems


@dataclass(frozen=True)
class TdDispatchResult:
    objective: float
    tn_generation: np.ndarray
    tn_cost: float
    feeder_exchange: np.ndarray
    feeder_costs: np.ndarray
    feeder_dispatch: tuple[np.ndarray, ...] | None = None


def _ep_hull(ep) -> VRep:
    return ep.hull if isinstance(ep, PveResult) else ep


def solve_tn_coordinator(eps: list, tn: TransmissionSystem) -> TdDispatchResult:
    """Transmission dispatch against the feeders' (exchange, cost) polygons."""
    hulls = [_ep_hull(e) for e in eps]
    R = len(hulls)
    if len(tn.feeder_nodes) != R:
        raise ValueError("one attachment node is needed per feeder")
    gens = tn.generators
    ng = len(gens)
    o_pg = 0
    o_cg = ng
    o_f = 2 * ng          # per feeder: [exchange, cost]
    nvar = o_f + 2 * R

    ineq: list[np.ndarray] = []
    ineq_rhs: list[float] = []
    for gi, g in enumerate(gens):
        for a, b in g.cost_segments:
            row = np.zeros(nvar)
            row[o_pg + gi] = a
            row[o_cg + gi] = -1.0
            ineq.append(row)
            ineq_rhs.append(-b)
    for li in range(len(tn.line_caps)):
        t = tn.ptdf[li]
        row = np.zeros(nvar)
        for gi, g in enumerate(gens):
            row[o_pg + gi] = t[g.node]
        for r, node in enumerate(tn.feeder_nodes):
            row[o_f + 2 * r] = t[node]
        shift = float(t @ tn.loads)
        cap = float(tn.line_caps[li])
        ineq.append(row.copy())
        ineq_rhs.append(cap + shift)
        ineq.append(-row)
        ineq_rhs.append(cap - shift)
    for r, hull in enumerate(hulls):
        for f in hull.facets:
            row = np.zeros(nvar)
            row[o_f + 2 * r] = f.normal[0]
            row[o_f + 2 * r + 1] = f.normal[1]
            ineq.append(row)
            ineq_rhs.append(f.offset)

    bal = np.zeros(nvar)
    bal[o_pg: o_pg + ng] = 1.0
    bal[o_f: nvar: 2] = 1.0
    eq = bal.reshape(1, -1)
    eq_rhs = np.array([float(np.sum(tn.loads))])

    bounds = lp.free_bounds(nvar)
    for gi, g in enumerate(gens):
        bounds[o_pg + gi] = [g.p_min, g.p_max]
    obj = np.zeros(nvar)
    obj[o_cg: o_cg + ng] = -1.0
    obj[o_f + 1: nvar: 2] = -1.0
    sol = lp.solve(lp.LpProblem(obj, np.array(ineq), np.array(ineq_rhs),
                                bounds, G_eq=eq, g_eq=eq_rhs))
    if not sol.is_optimal:
        raise InfeasibleCoordination(f"transmission coordinator LP is {sol.status.value}")
    z = sol.z_star
    tn_cost = float(np.sum(z[o_cg: o_cg + ng]))
    fx = z[o_f: nvar: 2].copy()
    fc = z[o_f + 1: nvar: 2].copy()
    return TdDispatchResult(
        objective=tn_cost + float(np.sum(fc)),
        tn_generation=z[o_pg: o_pg + ng].copy(),
        tn_cost=tn_cost,
        feeder_exchange=fx,
        feeder_costs=fc,
    )


def solve_feeder_dispatch(feeder: FeederSystem, fixed_p0: float):
    """Cheapest feeder dispatch at a fixed root exchange.

    Returns (der_p, der_q, cost). Raises InfeasibleBoundary when the exchange
    is not realizable.
    """
    region = build_feeder_region(feeder)
    n = region.num_vars
    nd = len(feeder.ders)
    eq = np.zeros((1, n))
    eq[0, 0] = 1.0
    obj = np.zeros(n)
    obj[1] = -1.0
    sol = lp.solve(lp.LpProblem(obj, region.stacked(), region.c,
                                lp.free_bounds(n),
                                G_eq=eq, g_eq=np.array([float(fixed_p0)])))
    if not sol.is_optimal:
        raise InfeasibleBoundary("root exchange outside the feeder's region")
    z = sol.z_star
    der_p = z[2 + 1: 2 + 1 + nd].copy()
    der_q = z[2 + 1 + nd: 2 + 1 + 2 * nd].copy()
    return der_p, der_q, float(z[1])


def solve_joint_td(tn: TransmissionSystem,
                   feeders: list[FeederSystem]) -> TdDispatchResult:
    """Monolithic transmission-plus-feeders optimum (the oracle)."""
    regions = [build_feeder_region(f) for f in feeders]
    R = len(feeders)
    gens = tn.generators
    ng = len(gens)
    o_pg = 0
    o_cg = ng
    base = 2 * ng
    offsets = np.concatenate([[base], base + np.cumsum([r.num_vars for r in regions])]).astype(int)
    nvar = int(offsets[-1])

    ineq_blocks = []
    rhs_blocks = []
    for r, reg in enumerate(regions):
        block = np.zeros((reg.num_rows, nvar))
        block[:, offsets[r]: offsets[r + 1]] = reg.stacked()
        ineq_blocks.append(block)
        rhs_blocks.append(reg.c)
    seg_rows = []
    seg_rhs = []
    for gi, g in enumerate(gens):
        for a, b in g.cost_segments:
            row = np.zeros(nvar)
            row[o_pg + gi] = a
            row[o_cg + gi] = -1.0
            seg_rows.append(row)
            seg_rhs.append(-b)
    line_rows = []
    line_rhs = []
    for li in range(len(tn.line_caps)):
        t = tn.ptdf[li]
        row = np.zeros(nvar)
        for gi, g in enumerate(gens):
            row[o_pg + gi] = t[g.node]
        for r, node in enumerate(tn.feeder_nodes):
            row[offsets[r]] = t[node]
        shift = float(t @ tn.loads)
        cap = float(tn.line_caps[li])
        line_rows.append(row.copy())
        line_rhs.append(cap + shift)
        line_rows.append(-row)
        line_rhs.append(cap - shift)
    G = np.vstack([np.array(seg_rows + line_rows).reshape(-1, nvar)] + ineq_blocks) \
        if (seg_rows or line_rows or ineq_blocks) else np.zeros((0, nvar))
    g_vec = np.concatenate([np.array(seg_rhs + line_rhs)] + rhs_blocks) \
        if (seg_rhs or line_rhs or rhs_blocks) else np.zeros(0)

    bal = np.zeros(nvar)
    bal[o_pg: o_pg + ng] = 1.0
    for r in range(R):
        bal[offsets[r]] = 1.0
    eq = bal.reshape(1, -1)
    eq_rhs = np.array([float(np.sum(tn.loads))])

    bounds = lp.free_bounds(nvar)
    for gi, g in enumerate(gens):
        bounds[o_pg + gi] = [g.p_min, g.p_max]
    obj = np.zeros(nvar)
    obj[o_cg: o_cg + ng] = -1.0
    for r in range(R):
        obj[offsets[r] + 1] = -1.0
    sol = lp.solve(lp.LpProblem(obj, G, g_vec, bounds, G_eq=eq, g_eq=eq_rhs))
    if not sol.is_optimal:
        raise InfeasibleCoordination(f"joint LP is {sol.status.value}")
    z = sol.z_star
    tn_cost = float(np.sum(z[o_cg: o_cg + ng]))
    fx = np.array([z[offsets[r]] for r in range(R)])
    fc = np.array([z[offsets[r] + 1] for r in range(R)])
    nd_list = [len(f.ders) for f in feeders]
    disp = tuple(z[offsets[r] + 3: offsets[r] + 3 + nd_list[r]].copy() for r in range(R))
    return TdDispatchResult(
        objective=tn_cost + float(np.sum(fc)),
        tn_generation=z[o_pg: o_pg + ng].copy(),
        tn_cost=tn_cost,
        feeder_exchange=fx,
        feeder_costs=fc,
        feeder_dispatch=disp,
    )

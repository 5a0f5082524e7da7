"""Multi-area coordinated dispatch on a DC network model.

Each area exposes only its boundary injections and a cost epigraph value; the
coordinator schedules tie-line flows against the areas' projected operating
regions, and each area then re-dispatches its generators at the published
boundary schedule. A monolithic formulation of the same system doubles as the
equivalence oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lp
from .errors import (
    InfeasibleArea,
    InfeasibleBoundary,
    InfeasibleCoordination,
)
from .geometry import HPolytope, VRep
from .pve import PveConfig, PveResult, project


@dataclass(frozen=True)
class Generator:
    """Dispatchable unit with a convex piecewise-linear cost."""

    node: int
    p_min: float
    p_max: float
    cost_segments: tuple[tuple[float, float], ...]  # (slope $/MWh, intercept $/h)

    def __post_init__(self):
        if self.p_min > self.p_max:
            raise ValueError("generator p_min exceeds p_max")
        segs = tuple((float(a), float(b)) for a, b in self.cost_segments)
        if not segs:
            raise ValueError("generator needs at least one cost segment")
        slopes = [a for a, _ in segs]
        if any(s2 < s1 - 1e-12 for s1, s2 in zip(slopes, slopes[1:])):
            raise ValueError("cost segment slopes must be nondecreasing")
        object.__setattr__(self, "cost_segments", segs)

    def cost_at(self, p: float) -> float:
        return max(a * p + b for a, b in self.cost_segments)


@dataclass(frozen=True)
class AreaSystem:
    """One regional network: generators, loads, PTDF-limited branches."""

    id: int
    generators: tuple[Generator, ...]
    loads: np.ndarray                  # MW per node
    ptdf: np.ndarray                   # monitored branches x nodes
    branch_caps: np.ndarray            # MW per monitored branch
    boundary_nodes: tuple[int, ...]
    cost_cap: float | None = None

    def __post_init__(self):
        loads = np.atleast_1d(np.asarray(self.loads, dtype=float))
        nn = len(loads)
        caps = np.atleast_1d(np.asarray(self.branch_caps, dtype=float))
        ptdf = np.asarray(self.ptdf, dtype=float).reshape(len(caps), nn)
        if np.any(caps <= 0):
            raise ValueError("branch capacities must be positive")
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "loads", loads)
        object.__setattr__(self, "ptdf", ptdf)
        object.__setattr__(self, "branch_caps", caps)
        object.__setattr__(self, "boundary_nodes", tuple(int(n) for n in self.boundary_nodes))
        for g in self.generators:
            if not (0 <= g.node < nn):
                raise ValueError(f"generator node {g.node} outside the area")
        for n in self.boundary_nodes:
            if not (0 <= n < nn):
                raise ValueError(f"boundary node {n} outside the area")

    @property
    def num_nodes(self) -> int:
        return len(self.loads)

    def effective_cost_cap(self) -> float:
        if self.cost_cap is not None:
            return float(self.cost_cap)
        top = sum(max(0.0, g.cost_at(g.p_max)) for g in self.generators)
        return 1.5 * top if top > 0 else 1.0


@dataclass(frozen=True)
class TieLine:
    from_area: int
    to_area: int
    from_node: int
    to_node: int
    reactance: float
    flow_min: float
    flow_max: float

    def __post_init__(self):
        if self.reactance <= 0:
            raise ValueError("tie-line reactance must be positive")
        if self.flow_min > self.flow_max:
            raise ValueError("tie-line flow_min exceeds flow_max")


@dataclass(frozen=True)
class TieLineSystem:
    tie_lines: tuple[TieLine, ...]
    reference_area: int = 0

    def __post_init__(self):
        object.__setattr__(self, "tie_lines", tuple(self.tie_lines))


@dataclass(frozen=True)
class DispatchResult:
    """Coordinator or joint outcome; generator dispatch is filled by the
    regional solves when the coordinator path is used."""

    objective: float
    area_costs: np.ndarray
    boundary_injections: tuple[np.ndarray, ...]
    tie_flows: np.ndarray
    generator_dispatch: tuple[np.ndarray, ...] | None = None


# ---------------------------------------------------------------------------
# area region construction


def build_area_region(area: AreaSystem) -> HPolytope:
    """Operating region over ([boundary injections, cost], [dispatch, unit costs]).

    Coordination block: one injection per boundary node then the area cost
    epigraph value. Internal block: generator outputs then per-unit cost
    epigraph values. Raises InfeasibleArea when the region is empty.
    """
    gens = area.generators
    nb, ng = len(area.boundary_nodes), len(gens)
    nx, ny = nb + 1, 2 * ng
    pi_col = nb
    rows_A: list[np.ndarray] = []
    rows_B: list[np.ndarray] = []
    rhs: list[float] = []

    def add(ax, by, c):
        rows_A.append(ax)
        rows_B.append(by)
        rhs.append(float(c))

    zx, zy = np.zeros(nx), np.zeros(ny)
    cap_row = zx.copy()
    cap_row[pi_col] = 1.0
    add(cap_row, zy, area.effective_cost_cap())
    lower = zx.copy()
    lower[pi_col] = -1.0
    seg_sum = zy.copy()
    seg_sum[ng:] = 1.0
    add(lower, seg_sum, 0.0)
    for gi, g in enumerate(gens):
        for a, b in g.cost_segments:
            row = zy.copy()
            row[gi] = a
            row[ng + gi] = -1.0
            add(zx, row, -b)
    total_load = float(np.sum(area.loads))
    bal_x = zx.copy()
    bal_x[:nb] = -1.0
    bal_y = zy.copy()
    bal_y[:ng] = 1.0
    add(bal_x, bal_y, total_load)
    add(-bal_x, -bal_y, -total_load)
    for li in range(len(area.branch_caps)):
        t = area.ptdf[li]
        gen_part = zy.copy()
        for gi, g in enumerate(gens):
            gen_part[gi] = t[g.node]
        bnd_part = zx.copy()
        for bi, n in enumerate(area.boundary_nodes):
            bnd_part[bi] = -t[n]
        shift = float(t @ area.loads)
        cap = float(area.branch_caps[li])
        add(bnd_part, gen_part, cap + shift)
        add(-bnd_part, -gen_part, cap - shift)
    for gi, g in enumerate(gens):
        row = zy.copy()
        row[gi] = 1.0
        add(zx, row, g.p_max)
        add(zx, -row, -g.p_min)

    region = HPolytope(num_x=nx, num_y=ny,
                       A=np.array(rows_A), B=np.array(rows_B), c=np.array(rhs))
    feas = lp.solve(lp.region_lp(region, np.zeros(region.num_vars)))
    if feas.status is lp.LpStatus.INFEASIBLE:
        raise InfeasibleArea(f"area {area.id} has no feasible dispatch")
    return region


def compute_area_ep(area: AreaSystem, config: PveConfig | None = None) -> PveResult:
    """Projected operating region over the area's coordination block."""
    return project(build_area_region(area), config or PveConfig())


def model_reduction_rate(region: HPolytope, hull: VRep) -> float:
    """1 - (projected vars x rows) / (original vars x rows)."""
    orig = region.num_vars * region.num_rows
    red = hull.dim * len(hull.facets)
    return 1.0 - red / orig if orig else 0.0


# ---------------------------------------------------------------------------
# coordinator, regional, and joint problems


def _ep_hull(ep) -> VRep:
    return ep.hull if isinstance(ep, PveResult) else ep


def solve_coordinator(eps: list, ties: TieLineSystem,
                      boundary_nodes: list[tuple[int, ...]]) -> DispatchResult:
    """Tie-line schedule minimizing total declared cost over the area hulls.

    boundary_nodes gives, per area, the node ids in the order the area's hull
    coordinates use (the build_area_region layout).
    """
    hulls = [_ep_hull(e) for e in eps]
    R = len(hulls)
    S = len(ties.tie_lines)
    nb = [len(b) for b in boundary_nodes]
    off_theta = 0
    off_flow = R
    off_pb = off_flow + S
    pb_offsets = np.concatenate([[0], np.cumsum(nb)]).astype(int)
    off_pi = off_pb + int(pb_offsets[-1])
    nvar = off_pi + R

    def pb_col(r, node):
        return off_pb + pb_offsets[r] + boundary_nodes[r].index(node)

    eq_rows: list[np.ndarray] = []
    eq_rhs: list[float] = []
    ref = np.zeros(nvar)
    ref[off_theta + ties.reference_area] = 1.0
    eq_rows.append(ref)
    eq_rhs.append(0.0)
    for s, t in enumerate(ties.tie_lines):
        row = np.zeros(nvar)
        row[off_flow + s] = 1.0
        row[off_theta + t.from_area] -= 1.0 / t.reactance
        row[off_theta + t.to_area] += 1.0 / t.reactance
        eq_rows.append(row)
        eq_rhs.append(0.0)
    for r in range(R):
        for node in boundary_nodes[r]:
            row = np.zeros(nvar)
            row[pb_col(r, node)] = 1.0
            for s, t in enumerate(ties.tie_lines):
                if t.from_area == r and t.from_node == node:
                    row[off_flow + s] -= 1.0
                if t.to_area == r and t.to_node == node:
                    row[off_flow + s] += 1.0
            eq_rows.append(row)
            eq_rhs.append(0.0)

    ineq_rows: list[np.ndarray] = []
    ineq_rhs: list[float] = []
    for r, hull in enumerate(hulls):
        cols = [off_pb + pb_offsets[r] + i for i in range(nb[r])] + [off_pi + r]
        for f in hull.facets:
            row = np.zeros(nvar)
            row[cols] = f.normal
            ineq_rows.append(row)
            ineq_rhs.append(f.offset)

    bounds = lp.free_bounds(nvar)
    for s, t in enumerate(ties.tie_lines):
        bounds[off_flow + s] = [t.flow_min, t.flow_max]
    obj = np.zeros(nvar)
    obj[off_pi:] = -1.0
    sol = lp.solve(lp.LpProblem(
        objective=obj,
        G=np.array(ineq_rows) if ineq_rows else np.zeros((0, nvar)),
        g=np.array(ineq_rhs),
        variable_bounds=bounds,
        G_eq=np.array(eq_rows),
        g_eq=np.array(eq_rhs),
    ))
    if not sol.is_optimal:
        raise InfeasibleCoordination(f"coordinator LP is {sol.status.value}")
    z = sol.z_star
    inj = tuple(z[off_pb + pb_offsets[r]: off_pb + pb_offsets[r + 1]].copy()
                for r in range(R))
    costs = z[off_pi:].copy()
    return DispatchResult(
        objective=float(np.sum(costs)),
        area_costs=costs,
        boundary_injections=inj,
        tie_flows=z[off_flow: off_flow + S].copy(),
    )


def solve_regional(area: AreaSystem, fixed_boundary) -> tuple[np.ndarray, float]:
    """Cheapest internal dispatch meeting a fixed boundary schedule.

    Raises InfeasibleBoundary when the schedule is outside the area's region;
    a conservative projected region makes that impossible for coordinator
    output.
    """
    region = build_area_region(area)
    fixed = np.atleast_1d(np.asarray(fixed_boundary, dtype=float))
    nb = len(area.boundary_nodes)
    ng = len(area.generators)
    n = region.num_vars
    eq = np.zeros((nb, n))
    for i in range(nb):
        eq[i, i] = 1.0
    obj = np.zeros(n)
    obj[nb] = -1.0  # minimize the epigraph value
    sol = lp.solve(lp.LpProblem(
        objective=obj,
        G=region.stacked(),
        g=region.c,
        variable_bounds=lp.free_bounds(n),
        G_eq=eq,
        g_eq=fixed,
    ))
    if not sol.is_optimal:
        raise InfeasibleBoundary(
            f"boundary schedule infeasible for area {area.id}")
    dispatch = sol.z_star[nb + 1: nb + 1 + ng].copy()
    return dispatch, float(sol.z_star[nb])


def solve_joint(areas: list[AreaSystem], ties: TieLineSystem) -> DispatchResult:
    """Monolithic optimum of the full multi-area system (the oracle)."""
    regions = [build_area_region(a) for a in areas]
    R = len(areas)
    S = len(ties.tie_lines)
    offsets = np.concatenate([[0], np.cumsum([r.num_vars for r in regions])]).astype(int)
    off_theta = int(offsets[-1])
    off_flow = off_theta + R
    nvar = off_flow + S

    G_blocks = []
    g_blocks = []
    for r, reg in enumerate(regions):
        block = np.zeros((reg.num_rows, nvar))
        block[:, offsets[r]: offsets[r + 1]] = reg.stacked()
        G_blocks.append(block)
        g_blocks.append(reg.c)
    G = np.vstack(G_blocks)
    g = np.concatenate(g_blocks)

    def pb_col(r, node):
        return offsets[r] + areas[r].boundary_nodes.index(node)

    eq_rows = []
    eq_rhs = []
    ref = np.zeros(nvar)
    ref[off_theta + ties.reference_area] = 1.0
    eq_rows.append(ref)
    eq_rhs.append(0.0)
    for s, t in enumerate(ties.tie_lines):
        row = np.zeros(nvar)
        row[off_flow + s] = 1.0
        row[off_theta + t.from_area] -= 1.0 / t.reactance
        row[off_theta + t.to_area] += 1.0 / t.reactance
        eq_rows.append(row)
        eq_rhs.append(0.0)
    for r, area in enumerate(areas):
        for node in area.boundary_nodes:
            row = np.zeros(nvar)
            row[pb_col(r, node)] = 1.0
            for s, t in enumerate(ties.tie_lines):
                if t.from_area == r and t.from_node == node:
                    row[off_flow + s] -= 1.0
                if t.to_area == r and t.to_node == node:
                    row[off_flow + s] += 1.0
            eq_rows.append(row)
            eq_rhs.append(0.0)

    bounds = lp.free_bounds(nvar)
    for s, t in enumerate(ties.tie_lines):
        bounds[off_flow + s] = [t.flow_min, t.flow_max]
    obj = np.zeros(nvar)
    for r, area in enumerate(areas):
        obj[offsets[r] + len(area.boundary_nodes)] = -1.0
    sol = lp.solve(lp.LpProblem(obj, G, g, bounds,
                                G_eq=np.array(eq_rows), g_eq=np.array(eq_rhs)))
    if not sol.is_optimal:
        raise InfeasibleCoordination(f"joint LP is {sol.status.value}")
    z = sol.z_star
    costs = np.array([z[offsets[r] + len(a.boundary_nodes)] for r, a in enumerate(areas)])
    inj = tuple(z[offsets[r]: offsets[r] + len(a.boundary_nodes)].copy()
                for r, a in enumerate(areas))
    disp = tuple(
        z[offsets[r] + len(a.boundary_nodes) + 1:
          offsets[r] + len(a.boundary_nodes) + 1 + len(a.generators)].copy()
        for r, a in enumerate(areas)
    )
    return DispatchResult(
        objective=float(np.sum(costs)),
        area_costs=costs,
        boundary_injections=inj,
        tie_flows=z[off_flow: off_flow + S].copy(),
        generator_dispatch=disp,
    )

"""Dense primal simplex solver with bounded variables and warm starts.

Self-contained on purpose: the projection loop re-solves the same constraint
system under many objectives, so the solver exposes a reusable basis token and
accepts tokens from a problem with extra trailing rows (the lexicographic
refinement appends rows without disturbing existing column indices).

Constraints are G z <= g plus an optional equality block; per-variable bounds
may be +-inf. Maximization convention throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import EmptyRegion, NotPolytope, NumericalFailure
from .geometry import HPolytope

FEAS_TOL = 1e-8
_PIVOT_TOL = 1e-9
_COST_TOL = 1e-9
_RATIO_TOL = 1e-11
_REFACTOR_EVERY = 200
_BLAND_AFTER = 40


class LpStatus(Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class Basis:
    """Opaque warm-start token: which columns were basic at optimality."""

    num_vars: int
    num_ineq: int
    num_eq: int
    basic: tuple[int, ...]
    at_upper: tuple[int, ...]

    def extended(self, extra_rows: int) -> "Basis":
        """Token for the same problem with extra trailing <= rows.

        New slacks index past every existing column, so the old basis stays
        valid with the new slacks basic.
        """
        first = self.num_vars + self.num_ineq
        return Basis(
            num_vars=self.num_vars,
            num_ineq=self.num_ineq + extra_rows,
            num_eq=self.num_eq,
            basic=self.basic + tuple(range(first, first + extra_rows)),
            at_upper=self.at_upper,
        )


@dataclass(frozen=True)
class LpProblem:
    """maximize objective . z  s.t.  G z <= g,  G_eq z == g_eq,  lo <= z <= hi."""

    objective: np.ndarray
    G: np.ndarray
    g: np.ndarray
    variable_bounds: np.ndarray
    G_eq: np.ndarray | None = None
    g_eq: np.ndarray | None = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.objective, dtype=float))
        n = len(c)
        g = np.atleast_1d(np.asarray(self.g, dtype=float)) if np.size(self.g) else np.zeros(0)
        G = np.asarray(self.G, dtype=float).reshape(len(g), n)
        bounds = np.asarray(self.variable_bounds, dtype=float).reshape(n, 2)
        if np.any(bounds[:, 0] > bounds[:, 1]):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "variable_bounds", bounds)
        if self.G_eq is not None:
            ge = np.atleast_1d(np.asarray(self.g_eq, dtype=float))
            Ge = np.asarray(self.G_eq, dtype=float).reshape(len(ge), n)
            object.__setattr__(self, "G_eq", Ge)
            object.__setattr__(self, "g_eq", ge)

    @property
    def num_vars(self) -> int:
        return len(self.objective)

    @property
    def num_ineq(self) -> int:
        return len(self.g)

    @property
    def num_eq(self) -> int:
        return 0 if self.g_eq is None else len(self.g_eq)


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    z_star: np.ndarray | None
    objective_value: float
    basis: Basis | None

    @property
    def is_optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class _Tableau:
    """Mutable simplex state over the standard form [G I; G_eq 0]."""

    def __init__(self, problem: LpProblem):
        n, m_le, m_eq = problem.num_vars, problem.num_ineq, problem.num_eq
        m = m_le + m_eq
        N = n + m_le
        A = np.zeros((m, N))
        b = np.zeros(m)
        if m_le:
            A[:m_le, :n] = problem.G
            A[:m_le, n:] = np.eye(m_le)
            b[:m_le] = problem.g
        if m_eq:
            A[m_le:, :n] = problem.G_eq
            b[m_le:] = problem.g_eq
        # row equilibration: rescaling an inequality does not change the set
        if m:
            scale = np.maximum(np.max(np.abs(A), axis=1), 1.0)
            A /= scale[:, None]
            b /= scale
        self.n, self.m_le, self.m_eq, self.m, self.N = n, m_le, m_eq, m, N
        self.A, self.b = A, b
        self.lo = np.concatenate([problem.variable_bounds[:, 0], np.zeros(m_le)])
        self.hi = np.concatenate([problem.variable_bounds[:, 1], np.full(m_le, np.inf)])
        self.n_art = 0
        self.basis = np.zeros(m, dtype=np.int64)
        self.at_upper = np.zeros(N, dtype=bool)
        self.Binv = np.eye(m)
        self.xB = np.zeros(m)

    # -- state helpers -----------------------------------------------------

    def canonicalize_nonbasic(self):
        """Nonbasic columns must sit at a finite bound (or 0 when free)."""
        only_upper = ~np.isfinite(self.lo[: self.N]) & np.isfinite(self.hi[: self.N])
        self.at_upper[only_upper] = True
        no_upper = ~np.isfinite(self.hi[: self.N])
        self.at_upper[no_upper] = False

    def nonbasic_values(self) -> np.ndarray:
        vals = np.where(np.isfinite(self.lo), self.lo, 0.0)
        up = np.zeros(len(vals), dtype=bool)
        up[: self.N] = self.at_upper
        up &= np.isfinite(self.hi)
        vals[up] = self.hi[up]
        return vals

    def compute_xB(self):
        vals = self.nonbasic_values()
        vals[self.basis] = 0.0
        self.xB = self.Binv @ (self.b - self.A @ vals)

    def refactorize(self):
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis during refactorization") from exc
        self.compute_xB()

    def solution(self) -> np.ndarray:
        vals = self.nonbasic_values()
        vals[self.basis] = self.xB
        return vals[: self.n].copy()

    def add_artificials(self):
        """Slack start; artificial columns for rows it cannot satisfy."""
        self.basis = np.zeros(self.m, dtype=np.int64)
        struct_vals = self.nonbasic_values()[: self.n]
        resid = self.b - self.A[:, : self.n] @ struct_vals
        art_rows = [i for i in range(self.m_le) if resid[i] < 0.0]
        art_rows += list(range(self.m_le, self.m))
        cols = np.zeros((self.m, len(art_rows)))
        for k, i in enumerate(art_rows):
            cols[i, k] = 1.0 if resid[i] >= 0.0 else -1.0
        self.A = np.hstack([self.A, cols])
        self.lo = np.append(self.lo, np.zeros(len(art_rows)))
        self.hi = np.append(self.hi, np.full(len(art_rows), np.inf))
        self.n_art = len(art_rows)
        for i in range(self.m_le):
            self.basis[i] = self.n + i
        for k, i in enumerate(art_rows):
            self.basis[i] = self.N + k
        self.refactorize()

    def drop_artificials(self):
        """Pin artificials to zero; pivot basic ones out where possible."""
        for r in range(self.m):
            j = self.basis[r]
            if j < self.N:
                continue
            row = self.Binv[r] @ self.A[:, : self.N]
            in_basis = set(int(i) for i in self.basis)
            for col in np.where(np.abs(row) > _PIVOT_TOL)[0]:
                if int(col) not in in_basis:
                    self._replace_basic(r, int(col))
                    break
        self.lo[self.N:] = 0.0
        self.hi[self.N:] = 0.0

    def _replace_basic(self, row: int, entering: int):
        w = self.Binv @ self.A[:, entering]
        piv = w[row]
        if abs(piv) <= _PIVOT_TOL / 10:
            return
        self.Binv[row] /= piv
        others = np.arange(self.m) != row
        self.Binv[others] -= np.outer(w[others], self.Binv[row])
        self.basis[row] = entering
        self.at_upper[entering] = False
        self.compute_xB()


def _price(tab: _Tableau, cvec: np.ndarray, bland: bool) -> tuple[int, int] | None:
    """Entering column and step direction, or None at optimality."""
    y = tab.Binv.T @ cvec[tab.basis]
    d = cvec - y @ tab.A
    ncols = tab.N + tab.n_art
    mask = np.ones(ncols, dtype=bool)
    mask[tab.basis] = False
    mask &= (tab.hi - tab.lo) > _RATIO_TOL
    free = mask & ~np.isfinite(tab.lo) & ~np.isfinite(tab.hi)
    at_up = np.zeros(ncols, dtype=bool)
    at_up[: tab.N] = tab.at_upper
    at_up &= mask
    at_low = mask & ~at_up & ~free
    can_increase = (at_low | free) & (d > _COST_TOL)
    can_decrease = (at_up | free) & (d < -_COST_TOL)
    eligible = np.where(can_increase | can_decrease)[0]
    if len(eligible) == 0:
        return None
    j = int(eligible[0]) if bland else int(eligible[np.argmax(np.abs(d[eligible]))])
    return j, (1 if d[j] > 0 else -1)


def _ratio_test(tab: _Tableau, j: int, sigma: int, w: np.ndarray):
    """Max step along the entering column; returns (theta, blocking_row)."""
    own = tab.hi[j] - tab.lo[j]
    if tab.m:
        sw = sigma * w
        lo_b = tab.lo[tab.basis]
        hi_b = tab.hi[tab.basis]
        dec = sw > _PIVOT_TOL
        inc = sw < -_PIVOT_TOL
        ratios = np.full(tab.m, np.inf)
        ratios[dec] = (tab.xB[dec] - lo_b[dec]) / sw[dec]
        ratios[inc] = (hi_b[inc] - tab.xB[inc]) / (-sw[inc])
        ratios[~np.isfinite(lo_b) & dec] = np.inf
        ratios[~np.isfinite(hi_b) & inc] = np.inf
        ratios = np.maximum(ratios, 0.0)
        rmin = float(np.min(ratios)) if tab.m else np.inf
    else:
        ratios = np.zeros(0)
        rmin = np.inf
    if not np.isfinite(rmin) and not np.isfinite(own):
        return np.inf, -1
    if rmin < own - _RATIO_TOL or (not np.isfinite(own)):
        tied = np.where(ratios <= rmin + _RATIO_TOL)[0]
        block = int(tied[np.argmin(tab.basis[tied])])
        return rmin, block
    return own, -1


def _run_simplex(tab: _Tableau, cvec: np.ndarray, max_iter: int) -> str:
    bland = False
    stall = 0
    since_refactor = 0
    for _ in range(max_iter):
        choice = _price(tab, cvec, bland)
        if choice is None:
            return "optimal"
        j, sigma = choice
        w = tab.Binv @ tab.A[:, j]
        theta, block = _ratio_test(tab, j, sigma, w)
        if not np.isfinite(theta):
            return "unbounded"
        if theta <= _RATIO_TOL:
            stall += 1
            if stall > _BLAND_AFTER:
                bland = True
        else:
            stall = 0
            bland = False
        if block < 0:
            # bound flip: the entering variable crosses its whole range
            tab.xB -= sigma * theta * w
            if j < tab.N:
                tab.at_upper[j] = sigma > 0
            continue
        leave = int(tab.basis[block])
        if j < tab.N and tab.at_upper[j] and np.isfinite(tab.hi[j]):
            entering_val = tab.hi[j]
        elif np.isfinite(tab.lo[j]):
            entering_val = tab.lo[j]
        else:
            entering_val = 0.0
        tab.xB -= sigma * theta * w
        piv = w[block]
        tab.Binv[block] /= piv
        others = np.arange(tab.m) != block
        tab.Binv[others] -= np.outer(w[others], tab.Binv[block])
        if leave < tab.N:
            tab.at_upper[leave] = bool(sigma * piv < 0 and np.isfinite(tab.hi[leave]))
        tab.basis[block] = j
        if j < tab.N:
            tab.at_upper[j] = False
        tab.xB[block] = entering_val + sigma * theta
        since_refactor += 1
        if since_refactor >= _REFACTOR_EVERY:
            tab.refactorize()
            since_refactor = 0
    raise NumericalFailure("simplex iteration limit exceeded")


def _try_warm_start(tab: _Tableau, warm: Basis) -> bool:
    if warm.num_vars != tab.n or warm.num_eq != tab.m_eq or warm.num_ineq != tab.m_le:
        return False
    basic = np.asarray(warm.basic, dtype=np.int64)
    if len(basic) != tab.m or len(np.unique(basic)) != tab.m:
        return False
    if tab.m and (np.any(basic < 0) or np.any(basic >= tab.N)):
        return False
    tab.basis = basic.copy()
    tab.at_upper[:] = False
    for j in warm.at_upper:
        if 0 <= j < tab.N and np.isfinite(tab.hi[j]):
            tab.at_upper[j] = True
    tab.canonicalize_nonbasic()
    tab.at_upper[tab.basis] = False
    try:
        tab.refactorize()
    except NumericalFailure:
        return False
    lo_b, hi_b = tab.lo[tab.basis], tab.hi[tab.basis]
    ok = np.all(tab.xB >= lo_b - 1e-7) and np.all(tab.xB <= hi_b + 1e-7)
    return bool(ok)


def solve(problem: LpProblem, warm_start: Basis | None = None) -> LpSolution:
    """Solve the LP, returning a basic optimal solution when one exists.

    Infeasible and unbounded outcomes are reported in the status, never
    raised; NumericalFailure signals pivot breakdown after the anti-cycling
    fallback is exhausted. A warm-start token incompatible with the problem
    shape (or no longer primal feasible) silently falls back to a cold start.
    """
    tab = _Tableau(problem)
    max_iter = 20000 + 60 * tab.m
    warmed = warm_start is not None and _try_warm_start(tab, warm_start)
    if not warmed:
        tab.canonicalize_nonbasic()
        tab.add_artificials()
        if tab.n_art:
            phase1 = np.zeros(tab.N + tab.n_art)
            phase1[tab.N:] = -1.0
            status = _run_simplex(tab, phase1, max_iter)
            if status != "optimal":
                raise NumericalFailure("phase-1 simplex did not terminate cleanly")
            infeas = float(np.sum(_full_values(tab)[tab.N:]))
            if infeas > 1e-7:
                return LpSolution(LpStatus.INFEASIBLE, None, np.nan, None)
            tab.drop_artificials()
    cvec = np.zeros(tab.N + tab.n_art)
    cvec[: tab.n] = problem.objective
    status = _run_simplex(tab, cvec, max_iter)
    if status == "unbounded":
        return LpSolution(LpStatus.UNBOUNDED, None, np.inf, None)
    tab.refactorize()
    z = tab.solution()
    z = np.clip(z, problem.variable_bounds[:, 0], problem.variable_bounds[:, 1])
    value = float(problem.objective @ z)
    token = None
    if all(int(i) < tab.N for i in tab.basis):
        basic = tuple(int(i) for i in tab.basis)
        in_basis = set(basic)
        ups = tuple(int(i) for i in np.where(tab.at_upper[: tab.N])[0] if int(i) not in in_basis)
        token = Basis(tab.n, tab.m_le, tab.m_eq, basic, ups)
    return LpSolution(LpStatus.OPTIMAL, z, value, token)


def _full_values(tab: _Tableau) -> np.ndarray:
    vals = tab.nonbasic_values()
    vals[tab.basis] = tab.xB
    return vals


def free_bounds(n: int) -> np.ndarray:
    """Bounds array for n unbounded variables."""
    return np.column_stack([np.full(n, -np.inf), np.full(n, np.inf)])


def region_lp(region: HPolytope, objective: np.ndarray) -> LpProblem:
    """LP maximizing objective over the joint (x, y) region."""
    return LpProblem(
        objective=objective,
        G=region.stacked(),
        g=region.c,
        variable_bounds=free_bounds(region.num_vars),
    )


def _interior_point(M: np.ndarray, c: np.ndarray) -> np.ndarray | None:
    """Strictly interior point via the Chebyshev-center LP, or None."""
    m, n = M.shape
    norms = np.linalg.norm(M, axis=1)
    norms = np.maximum(norms, 1e-12)
    obj = np.zeros(n + 1)
    obj[n] = 1.0
    G = np.hstack([M, norms[:, None]])
    bounds = np.vstack([free_bounds(n), [[0.0, 1e6]]])
    sol = solve(LpProblem(obj, G, c, bounds))
    if sol.status is LpStatus.INFEASIBLE:
        raise EmptyRegion("cannot remove redundancy from an empty region")
    if not sol.is_optimal or sol.objective_value <= 1e-9:
        return None
    return sol.z_star[:n]


def _redundant_rows_naive(M: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Row-by-row LP tests against the current active set."""
    m, n = M.shape
    active = np.ones(m, dtype=bool)
    for i in range(m):
        mask = active.copy()
        mask[i] = False
        if not mask.any():
            continue
        sol = solve(LpProblem(M[i], M[mask], c[mask], free_bounds(n)))
        if sol.is_optimal and sol.objective_value <= c[i] + FEAS_TOL:
            active[i] = False
    return active


def _redundant_rows_clarkson(M: np.ndarray, c: np.ndarray,
                             x0: np.ndarray) -> np.ndarray:
    """Output-sensitive removal: LPs are sized by the irredundant set.

    Each candidate row is tested against the rows already known to be
    irredundant, with its own bound relaxed so the test LP stays bounded in
    the objective direction. An optimistic verdict triggers a ray shot from
    the interior point toward the maximizer; the first constraint crossed is
    provably irredundant and joins the support set.
    """
    m, n = M.shape
    scale = 1.0 + np.abs(c)
    support: list[int] = []
    active = np.ones(m, dtype=bool)
    decided = np.zeros(m, dtype=bool)
    queue = list(range(m))
    guard = 0
    while queue:
        guard += 1
        if guard > 4 * m + 8 * m:
            return _redundant_rows_naive(M, c)
        i = queue.pop(0)
        if decided[i]:
            continue
        rows = support + [i]
        rhs = c[rows].copy()
        rhs[-1] = c[i] + 1.0 + abs(c[i])
        sol = solve(LpProblem(M[i], M[rows], rhs, free_bounds(n)))
        if not sol.is_optimal:
            return _redundant_rows_naive(M, c)
        if sol.objective_value <= c[i] + FEAS_TOL * scale[i]:
            decided[i] = True
            active[i] = bool(i in support)
            continue
        # ray shoot from the interior point toward the maximizer
        d = sol.z_star - x0
        num = c - M @ x0
        den = M @ d
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(den > 1e-12 * np.linalg.norm(d) + 1e-300, num / den, np.inf)
        t = np.where(num < 0, 0.0, t)
        j = int(np.argmin(t))
        if not np.isfinite(t[j]) or decided[j] and not active[j]:
            return _redundant_rows_naive(M, c)
        if j not in support:
            support.append(j)
            decided[j] = True
            active[j] = True
        if i != j:
            queue.append(i)
        else:
            decided[i] = True
            active[i] = True
    return active


def remove_redundant(region: HPolytope) -> HPolytope:
    """Drop every row whose bound is implied by the remaining rows.

    A row is removed iff maximizing its left-hand side subject to the other
    surviving rows stays within its right-hand side (plus tolerance); of two
    duplicate rows exactly one survives. Raises EmptyRegion on an infeasible
    input.
    """
    M = region.stacked()
    c = region.c
    if region.num_rows == 0:
        return region
    x0 = _interior_point(M, c)
    if x0 is None:
        active = _redundant_rows_naive(M, c)
    else:
        active = _redundant_rows_clarkson(M, c, x0)
    return HPolytope(
        num_x=region.num_x,
        num_y=region.num_y,
        A=region.A[active],
        B=region.B[active],
        c=region.c[active],
    )


def ensure_polytope(region: HPolytope) -> None:
    """Raise unless the region is nonempty and bounded in every coordinate."""
    M = region.stacked()
    n = region.num_vars
    for i in range(n):
        for sign in (1.0, -1.0):
            obj = np.zeros(n)
            obj[i] = sign
            sol = solve(LpProblem(obj, M, region.c, free_bounds(n)))
            if sol.status is LpStatus.INFEASIBLE:
                raise EmptyRegion("region is infeasible")
            if sol.status is LpStatus.UNBOUNDED:
                raise NotPolytope(direction=sign * np.eye(n)[i])

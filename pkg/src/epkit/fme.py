"""Fourier-Motzkin elimination of the internal variable block.

Serves as the exactness oracle for the vertex-enumeration projector. Internal
variables are eliminated one at a time, cheapest first (fewest sign pairings),
with optional LP-based redundancy removal between steps to contain the row
blowup.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lp
from .errors import RowExplosion
from .geometry import HPolytope

ZERO_COEF_TOL = 1e-10
DEFAULT_ROW_CAP = 200_000


@dataclass(frozen=True)
class FmeResult:
    """Projection as a pure-x inequality system plus per-step row counts."""

    hrep: HPolytope
    generated_rows_per_step: tuple[int, ...]


def _eliminate_column(M: np.ndarray, c: np.ndarray, col: int):
    coef = M[:, col]
    pos = np.where(coef > ZERO_COEF_TOL)[0]
    neg = np.where(coef < -ZERO_COEF_TOL)[0]
    zero = np.where(np.abs(coef) <= ZERO_COEF_TOL)[0]
    rows = [np.delete(M[zero], col, axis=1)]
    rhs = [c[zero]]
    for p in pos:
        lam = coef[p]
        mu = -coef[neg]  # positive weights that cancel the column
        comb = mu[:, None] * M[p][None, :] + lam * M[neg]
        comb_rhs = mu * c[p] + lam * c[neg]
        rows.append(np.delete(comb, col, axis=1))
        rhs.append(comb_rhs)
    M2 = np.vstack(rows)
    c2 = np.concatenate(rhs)
    # normalize row scale to keep coefficients from compounding
    scale = np.maximum(np.max(np.abs(M2), axis=1, initial=0.0), 1e-12)
    vacuous = np.max(np.abs(M2), axis=1, initial=0.0) <= ZERO_COEF_TOL
    keep = ~(vacuous & (c2 >= -ZERO_COEF_TOL))
    M2, c2, scale = M2[keep], c2[keep], scale[keep]
    return M2 / scale[:, None], c2 / scale


def _collapse_parallel(M: np.ndarray, c: np.ndarray):
    """Merge rows with identical (rounded) coefficients, keeping the tight rhs."""
    if not len(c):
        return M, c
    keys = np.round(M, 12)
    best: dict[bytes, int] = {}
    order: list[int] = []
    for i, key in enumerate(keys):
        kb = key.tobytes()
        if kb in best:
            j = best[kb]
            if c[i] < c[j]:
                best[kb] = i
        else:
            best[kb] = i
            order.append(kb)
    idx = [best[k] for k in order]
    return M[idx], c[idx]


def _pairing_cost(M: np.ndarray, cols: list[int]) -> list[tuple[int, int]]:
    costs = []
    for col in cols:
        coef = M[:, col]
        p = int(np.sum(coef > ZERO_COEF_TOL))
        n = int(np.sum(coef < -ZERO_COEF_TOL))
        costs.append((p * n, col))
    return sorted(costs)


def eliminate(region: HPolytope, redundancy_removal: bool = True,
              row_cap: int = DEFAULT_ROW_CAP) -> FmeResult:
    """Project out all internal variables of the region.

    The feasible set of the returned system equals {x : exists y with
    A x + B y <= c}. Raises RowExplosion when an intermediate system exceeds
    row_cap rows.
    """
    num_x = region.num_x
    M = region.stacked().copy()
    c = region.c.copy()
    generated = []
    while M.shape[1] > num_x:
        # cheapest elimination first: fewest positive*negative pairings
        cols = list(range(num_x, M.shape[1]))
        _, col = _pairing_cost(M, cols)[0]
        M, c = _eliminate_column(M, c, col)
        if len(c) > row_cap:
            raise RowExplosion(rows=len(c), cap=row_cap)
        generated.append(len(c))
        M, c = _collapse_parallel(M, c)
        if redundancy_removal and len(c):
            inter = HPolytope(num_x=num_x, num_y=M.shape[1] - num_x,
                              A=M[:, :num_x], B=M[:, num_x:], c=c)
            inter = lp.remove_redundant(inter)
            M, c = inter.stacked(), inter.c
    hrep = HPolytope(num_x=num_x, num_y=0, A=M, B=np.zeros((len(c), 0)), c=c)
    return FmeResult(hrep=hrep, generated_rows_per_step=tuple(generated))

"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Solves ``max c @ x  s.t.  A x = b, x >= 0``.  Kept deliberately small: the
moment programs here have six rows and at most a few hundred columns, and
they are highly degenerate (most right-hand sides are zero), so Bland's rule
is used in both phases.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import NumericDegeneracyError

PIVOT_TOL = 1e-11
COST_TOL = 1e-10
FEAS_TOL = 1e-9


@dataclass
class SimplexResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray
    objective: float
    iterations: int


def _pivot(T: np.ndarray, basis: list, row: int, col: int) -> None:
    piv = T[row, col]
    if abs(piv) < PIVOT_TOL:
        raise NumericDegeneracyError(f"pivot magnitude {abs(piv):.3e} below {PIVOT_TOL:g}")
    T[row] /= piv
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col


def _run(T: np.ndarray, basis: list, ncols: int, max_iter: int) -> tuple:
    """Iterate on tableau ``T`` whose last row holds reduced costs (maximisation).

    Only the first ``ncols`` columns may enter.  Returns (status, iterations).
    """
    m = T.shape[0] - 1
    it = 0
    while it < max_iter:
        cost = T[-1, :ncols]
        entering = np.flatnonzero(cost > COST_TOL)
        if entering.size == 0:
            return "optimal", it
        col = int(entering[0])
        column = T[:m, col]
        rows = np.flatnonzero(column > PIVOT_TOL)
        if rows.size == 0:
            return "unbounded", it
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, basis, row, col)
        it += 1
    raise RuntimeError(f"simplex did not terminate in {max_iter} iterations")


def solve(c, A, b, max_iter: int = 10000) -> SimplexResult:
    """Maximise ``c @ x`` subject to ``A x = b``, ``x >= 0``."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    c = np.array(c, dtype=float)
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # Phase 1: artificials n..n+m-1, maximise -sum(artificials).
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = A.sum(axis=0)
    T[-1, -1] = b.sum()
    basis = list(range(n, n + m))
    status, it1 = _run(T, basis, n, max_iter)
    if T[-1, -1] > FEAS_TOL * max(1.0, b.sum()):
        return SimplexResult("infeasible", np.zeros(n), float("nan"), it1)

    # Drive zero-level artificials out of the basis; drop redundant rows.
    keep = []
    for r in range(m):
        if basis[r] >= n:
            cand = np.flatnonzero(np.abs(T[r, :n]) > PIVOT_TOL)
            if cand.size == 0:
                continue
            _pivot(T, basis, r, int(cand[0]))
        keep.append(r)
    T = np.vstack([T[keep][:, list(range(n)) + [-1]], np.zeros((1, n + 1))])
    basis = [basis[r] for r in keep]

    # Phase 2 reduced costs: c - c_B B^-1 A, objective value in the last cell.
    T[-1, :n] = c
    T[-1, -1] = 0.0
    for r, j in enumerate(basis):
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[r]
    status, it2 = _run(T, basis, n, max_iter)
    x = np.zeros(n)
    for r, j in enumerate(basis):
        x[j] = T[r, -1]
    return SimplexResult(status, x, float(c @ x), it1 + it2)

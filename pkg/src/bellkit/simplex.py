"""Dense phase-one simplex for feasibility of ``A x = b, x >= 0``.

Artificial variables start in the basis and their sum is minimized. Bland's
rule (lowest eligible index, both for the entering column and for ties in
the ratio test) rules out cycling. At the optimum the simplex multipliers
``y`` satisfy ``y @ A[:, j] <= 0`` for every column and ``y @ b`` equals the
phase-one objective, so an infeasible system comes with its own Farkas
certificate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import SolverError

PIVOT_TOL = 1e-11


@dataclass(frozen=True)
class PhaseOneResult:
    x: np.ndarray
    objective: float
    duals: np.ndarray
    basis: tuple[int, ...]
    iterations: int


def phase_one(A, b, max_iter: Optional[int] = None, pivot_tol: float = PIVOT_TOL) -> PhaseOneResult:
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    m, n = A.shape
    if b.shape != (m,):
        raise ValueError(f"right-hand side has shape {b.shape}, expected ({m},)")
    sign = np.where(b < 0, -1.0, 1.0)
    A = A * sign[:, None]
    b = b * sign
    full = np.hstack([A, np.eye(m)])
    cost = np.concatenate([np.zeros(n), np.ones(m)])

    T = np.zeros((m + 1, n + m + 1))
    T[:m, : n + m] = full
    T[:m, -1] = b
    T[m, :n] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    basis = list(range(n, n + m))
    limit = max_iter if max_iter is not None else 50 * (n + m) + 1000

    it = 0
    while True:
        reduced = T[m, : n + m]
        eligible = np.nonzero(reduced < -pivot_tol)[0]
        if eligible.size == 0:
            break
        if it >= limit:
            raise SolverError(f"phase-one simplex hit the iteration limit ({limit})")
        col = int(eligible[0])
        column = T[:m, col]
        rows = np.nonzero(column > pivot_tol)[0]
        if rows.size == 0:
            # Cannot happen for a phase-one problem (objective bounded below by 0).
            raise SolverError("phase-one simplex found an unbounded direction")
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + pivot_tol * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        T[row] /= T[row, col]
        for r in range(m + 1):
            if r != row and T[r, col] != 0.0:
                T[r] -= T[r, col] * T[row]
        basis[row] = col
        it += 1

    # Recompute primal and dual values from the final basis rather than the
    # accumulated tableau.
    B = full[:, basis]
    try:
        xb = np.linalg.solve(B, b)
        y = np.linalg.solve(B.T, cost[basis])
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"final simplex basis is singular: {exc}") from exc
    x = np.zeros(n + m)
    x[basis] = xb
    objective = float(x[n:].sum())
    return PhaseOneResult(x[:n], objective, y * sign, tuple(basis), it)

"""Single-stage LP: ``min f_t(x_prev, x; xi) + lower(x)``, optionally regularized.

The regularized form replaces the fixed incoming state by a free copy ``z``
and charges ``M ||z - x_prev||_1``. Writing ``z - p + q = x_prev`` with
``p, q >= 0`` makes the multipliers of those copy rows the derivative of
the value with respect to ``x_prev``, and they are bounded by ``M``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .approx import LowerApprox
from .errors import InfeasibleProblem, NumericalFailure
from .lp import BasisCache, LinearProgram, LpStatus
from .model import StageModel


@dataclass
class StageSolution:
    value: float  # full objective: stage cost (+ penalty) + cost-to-go
    stage_cost: float  # constant + (A xi + a)'(y, x), no penalty, no cost-to-go
    cost_to_go: float
    state: np.ndarray
    decisions: np.ndarray
    gradient: np.ndarray  # derivative of ``value`` w.r.t. x_prev


class StageSubproblem:
    """Reusable LP template for one stage and one fixed cut pool."""

    def __init__(self, stage: StageModel, lower: LowerApprox = None, regularization=None):
        self.stage = stage
        self.lower = lower
        self.M = regularization
        self.regularized = regularization is not None and np.isfinite(regularization)
        self.has_theta = lower is not None and not lower.terminal
        self._build()
        self.cache = BasisCache()

    def _build(self):
        s = self.stage
        d_in, nd = s.dim_in, s.n_decisions
        nz = 3 * d_in if self.regularized else 0
        nth = 1 if self.has_theta else 0
        n = nz + nd + nth
        self.w_slice = slice(nz, nz + nd)
        self.x_slice = slice(nz + s.dim_internal, nz + nd)
        self.theta_index = nz + nd if nth else None

        U, r = self.lower.epigraph_rows() if self.has_theta else (np.zeros((0, s.dim_out)), np.zeros(0))
        r1, rc, re = s.ineq.rows, U.shape[0], s.eq.rows
        G = np.zeros((r1 + rc, n))
        G[:r1, self.w_slice] = s.ineq.decision_matrix()
        if rc:
            G[r1:, self.x_slice] = U
            G[r1:, self.theta_index] = -1.0
        g = np.concatenate([s.ineq.h, r])
        ncopy = d_in if self.regularized else 0
        E = np.zeros((re + ncopy, n))
        E[:re, self.w_slice] = s.eq.decision_matrix()
        e = np.concatenate([s.eq.h, np.zeros(ncopy)])
        c = np.zeros(n)
        lb, ub = np.zeros(n), np.full(n, np.inf)
        if self.regularized:
            G[:r1, :d_in] = s.ineq.E
            E[:re, :d_in] = s.eq.E
            E[re:, :d_in] = np.eye(d_in)
            E[re:, d_in : 2 * d_in] = -np.eye(d_in)
            E[re:, 2 * d_in : 3 * d_in] = np.eye(d_in)
            c[d_in : 3 * d_in] = self.M
            lb[:d_in] = -np.inf
        lo, hi = s.decision_bounds()
        lb[self.w_slice], ub[self.w_slice] = lo, hi
        if nth:
            c[self.theta_index] = 1.0
            lb[self.theta_index] = self.lower.floor
        c[self.w_slice] = s.cost_vector
        self.lp = LinearProgram(c, G, g, E, e, lb, ub)
        self._r1, self._re = r1, re

    def _set_data(self, x_prev, xi):
        s, lp = self.stage, self.lp
        r1, re = self._r1, self._re
        lp.g[:r1] = s.ineq.h + s.ineq.H @ xi
        lp.e[:re] = s.eq.h + s.eq.H @ xi
        if self.regularized:
            lp.e[re:] = x_prev
        else:
            lp.g[:r1] -= s.ineq.E @ x_prev
            lp.e[:re] -= s.eq.E @ x_prev
        lp.c[self.w_slice] = s.cost(xi)

    def solve(self, x_prev, xi) -> StageSolution:
        s = self.stage
        x_prev = np.asarray(x_prev, dtype=float)
        xi = np.asarray(xi, dtype=float)
        self._set_data(x_prev, xi)
        sol = self.cache.solve(self.lp)
        if sol.status is LpStatus.INFEASIBLE:
            raise InfeasibleProblem(f"stage {s.index} LP infeasible")
        if sol.status is LpStatus.UNBOUNDED:
            raise NumericalFailure(f"stage {s.index} LP unbounded")
        w = sol.x[self.w_slice]
        stage_cost = float(self.lp.c[self.w_slice] @ w) + s.cost_constant
        theta = float(sol.x[self.theta_index]) if self.has_theta else 0.0
        if self.regularized:
            grad = -sol.eq_duals[self._re :]
        else:
            grad = s.ineq.E.T @ sol.ineq_duals[: self._r1] + s.eq.E.T @ sol.eq_duals[: self._re]
        return StageSolution(
            value=float(sol.objective) + s.cost_constant,
            stage_cost=stage_cost,
            cost_to_go=theta,
            state=sol.x[self.x_slice].copy(),
            decisions=w.copy(),
            gradient=np.asarray(grad, dtype=float),
        )

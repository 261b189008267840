"""Oracle for stages whose uncertainty enters only the right-hand side.

The stage value is convex in the uncertainty, so the worst-case measure is
supported on extreme points of the lifted sets
``{(zeta, xi): xi in box, zeta >= ||xi - atom||_1}``. One regularized stage
LP is solved per distinct extreme point; a small master LP over the
transport multipliers then weighs them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..approx import Cut, LowerApprox, UpperApprox
from ..errors import MissingGrowthRate, NumericalFailure, TooManyVertices
from ..lp import LinearProgram, solve
from ..measures import DiscreteMeasure
from ..model import AmbiguitySpec, StageModel, UncertaintySet
from ..stage import StageSubproblem
from .base import OracleOutput, first_argmax, gap_at

VERTEX_CAP = 2000


@dataclass
class LiftedVertices:
    """Extreme points of one atom's lifted set: rows of ``xis`` and distances ``zetas``."""

    xis: np.ndarray
    zetas: np.ndarray
    atom_index: int  # row holding the atom itself (zeta = 0)


def _active_rank(xi, atom, unc: UncertaintySet):
    d = xi.size
    rows = []
    fixed = np.sign(xi - atom)
    free = np.flatnonzero(fixed == 0)
    for signs in itertools.product((-1.0, 1.0), repeat=free.size):
        sigma = fixed.copy()
        sigma[free] = signs
        rows.append(np.concatenate([[1.0], -sigma]))
    for i in range(d):
        if xi[i] == unc.lower[i] or xi[i] == unc.upper[i]:
            e = np.zeros(d + 1)
            e[i + 1] = 1.0
            rows.append(e)
    return np.linalg.matrix_rank(np.array(rows))


def lifted_vertices(unc: UncertaintySet, atom, metric="L1", cap=VERTEX_CAP) -> LiftedVertices:
    if metric != "L1":
        raise ValueError("vertex enumeration is implemented for the L1 metric only")
    atom = np.asarray(atom, dtype=float)
    cands = []
    for i in range(unc.dim):
        vals = {float(atom[i])}
        for b in (unc.lower[i], unc.upper[i]):
            if np.isfinite(b):
                vals.add(float(b))
        cands.append(sorted(vals))
    count = int(np.prod([len(cd) for cd in cands]))
    if count > cap:
        raise TooManyVertices(f"{count} candidate vertices exceed the cap {cap}")
    xis, zetas = [], []
    for combo in itertools.product(*cands):
        xi = np.array(combo, dtype=float)
        if _active_rank(xi, atom, unc) == unc.dim + 1:
            xis.append(xi)
            zetas.append(float(np.abs(xi - atom).sum()))
    xis = np.array(xis).reshape(len(xis), unc.dim)
    zetas = np.array(zetas)
    atom_index = int(np.flatnonzero(np.all(xis == atom, axis=1))[0])
    return LiftedVertices(xis, zetas, atom_index)


def growth_rate(stage: StageModel) -> float:
    """Asymptotic slope of the stage value in the uncertainty (0 on bounded boxes)."""
    if stage.uncertainty.bounded or not stage.has_rhs_uncertainty():
        return 0.0
    rate = stage.declared.get("growth_rate")
    if rate is None:
        raise MissingGrowthRate(f"stage {stage.index}: unbounded uncertainty set needs a declared growth rate")
    return float(rate)


@dataclass
class ConvexMasterResult:
    value: float
    kappa: list  # per atom, weights over its vertices
    theta: float
    lp_value: float
    dual_value: float


def solve_master(values_per_atom, vertex_sets, data: DiscreteMeasure, ambiguity: AmbiguitySpec, rate) -> ConvexMasterResult:
    """``min rho'lam + sum_k p_k tau_k`` s.t. ``tau_k >= Q_kl - lam0 zeta_l - sum_j lam_j g_j(xi_l)``, ``lam0 >= rate``."""
    moments = ambiguity.moments if ambiguity.kind == "wasserstein" else []
    m = len(moments)
    n = data.n
    nv = 1 + m + n
    c = np.concatenate([[ambiguity.radius], [mc.bound for mc in moments], data.weights])
    rows, rhs = [], []
    for k, (vals, vs) in enumerate(zip(values_per_atom, vertex_sets)):
        for l in range(vs.xis.shape[0]):
            row = np.zeros(nv)
            row[0] = -vs.zetas[l]
            for j, mc in enumerate(moments):
                row[1 + j] = -mc(vs.xis[l])
            row[1 + m + k] = -1.0
            rows.append(row)
            rhs.append(-vals[l])
    growth = np.zeros(nv)
    growth[0] = -1.0
    rows.append(growth)
    rhs.append(-rate)
    lb = np.concatenate([np.zeros(1 + m), np.full(n, -np.inf)])
    lp = LinearProgram(c, np.array(rows), np.array(rhs), lb=lb)
    sol = solve(lp)
    if not sol.optimal:
        raise NumericalFailure(f"transport master LP ended with status {sol.status.value}")
    duals = sol.ineq_duals
    kappa, pos = [], 0
    for vs in vertex_sets:
        L = vs.xis.shape[0]
        kappa.append(duals[pos : pos + L].copy())
        pos += L
    theta = float(duals[pos])
    dual_value = sum(float(kap @ vals) for kap, vals in zip(kappa, values_per_atom)) + theta * rate
    return ConvexMasterResult(float(sol.objective), kappa, theta, float(sol.objective), dual_value)


def evaluate(stage, ambiguity, data, lower: LowerApprox, upper: UpperApprox, x_prev, M, vertices=None, rate=None, subproblem=None) -> OracleOutput:
    x_prev = np.asarray(x_prev, dtype=float)
    if vertices is None:
        vertices = [lifted_vertices(stage.uncertainty, a, ambiguity.metric) for a in data.atoms]
    if rate is None:
        rate = growth_rate(stage)
    sub = subproblem or StageSubproblem(stage, lower, M)
    solved = {}
    values, grads, states, gaps = [], [], [], []
    for vs in vertices:
        vv, gg, xx, gp = [], [], [], []
        for xi in vs.xis:
            key = xi.tobytes()
            if key not in solved:
                res = sub.solve(x_prev, xi)
                solved[key] = (res, gap_at(lower, upper, res.state))
            res, gap = solved[key]
            vv.append(res.value)
            gg.append(res.gradient)
            xx.append(res.state)
            gp.append(gap)
        values.append(np.array(vv))
        grads.append(gg)
        states.append(xx)
        gaps.append(np.array(gp))
    master = solve_master(values, vertices, data, ambiguity, rate)
    grad = np.zeros(stage.dim_in)
    for kap, gg in zip(master.kappa, grads):
        for w, g in zip(kap, gg):
            grad += w * g
    atom_gap = [float(gp.max()) for gp in gaps]
    pick = [first_argmax(gp) for gp in gaps]
    k = first_argmax(atom_gap)
    weighted = sum(p * g for p, g in zip(data.weights, atom_gap) if p > 0)
    return OracleOutput(
        cut=Cut(master.value, grad, x_prev.copy(), stage.index - 1),
        overestimate=master.value + weighted,
        next_state=states[k][pick[k]],
        gap=atom_gap[k],
        value=master.value,
        outcome_states=[states[i][vs.atom_index] for i, vs in enumerate(vertices)],
        outcome_gaps=[gaps[i][vs.atom_index] for i, vs in enumerate(vertices)],
    )

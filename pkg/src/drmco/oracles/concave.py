"""Oracle for stages whose uncertainty enters only the objective.

The worst-case expectation over the Wasserstein ball is computed from a
single joint LP. For each data atom the inner supremum over the box is
dualized into a support-function term, the transport multiplier ``lam0``
bounds the dual-norm variable ``zeta_k``, and every atom carries its own
regularized copy of the stage problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..approx import Cut, LowerApprox, UpperApprox
from ..errors import NumericalFailure, UnboundedUncertainty
from ..lp import LinearProgram, LpSolution, solve
from ..measures import DiscreteMeasure
from ..model import AmbiguitySpec, StageModel
from .base import OracleOutput, first_argmax, gap_at


@dataclass
class ConcaveMaster:
    lp: LinearProgram
    n_moments: int
    atom_w: list  # slices of the stacked (y, x) block per atom
    atom_x: list  # slices of the outgoing state per atom
    copy_rows: list  # equality-row slices of the copy block per atom


class _Layout:
    def __init__(self):
        self.n = 0

    def take(self, k):
        s = slice(self.n, self.n + k)
        self.n += k
        return s


def assemble(stage: StageModel, ambiguity: AmbiguitySpec, data: DiscreteMeasure, lower: LowerApprox, x_prev, M) -> ConcaveMaster:
    unc = stage.uncertainty
    if not unc.bounded:
        raise UnboundedUncertainty(f"stage {stage.index}: objective-uncertainty oracle needs a bounded box")
    x_prev = np.asarray(x_prev, dtype=float)
    d_in, d_xi, nd = stage.dim_in, stage.dim_xi, stage.n_decisions
    moments = ambiguity.moments if ambiguity.kind == "wasserstein" else []
    m = len(moments)
    radius = ambiguity.radius
    B = np.array([np.asarray(mc.b, dtype=float) for mc in moments]).reshape(m, d_xi)
    offsets = np.array([mc.offset for mc in moments], dtype=float)
    bounds = np.array([mc.bound for mc in moments], dtype=float)
    linf = ambiguity.metric == "Linf"
    has_theta = not lower.terminal
    U, r = lower.epigraph_rows() if has_theta else (np.zeros((0, stage.dim_out)), np.zeros(0))
    A = stage.cost_matrix
    W = stage.ineq.decision_matrix()
    Weq = stage.eq.decision_matrix()
    lo_w, hi_w = stage.decision_bounds()

    lay = _Layout()
    lam = lay.take(m + 1)
    blocks = []
    for _ in range(data.n):
        blk = {
            "zeta": lay.take(d_xi),
            "zabs": lay.take(d_xi) if linf else None,
            "z": lay.take(d_in),
            "p": lay.take(d_in),
            "q": lay.take(d_in),
            "w": lay.take(nd),
            "theta": lay.take(1) if has_theta else None,
            "s": lay.take(d_xi),
        }
        blocks.append(blk)
    n = lay.n
    c = np.zeros(n)
    lb, ub = np.zeros(n), np.full(n, np.inf)
    c[lam.start] = radius
    G_rows, g_rows, E_rows, e_rows = [], [], [], []

    def row(entries):
        v = np.zeros(n)
        for sl, coef in entries:
            v[sl] += coef
        return v

    atom_w, atom_x, copy_rows = [], [], []
    for k, blk in enumerate(blocks):
        pk = data.weights[k]
        xi_k = data.atoms[k]
        lam_j = slice(lam.start + 1, lam.stop)
        c[blk["w"]] += pk * (A @ xi_k + stage.cost_vector)
        c[blk["p"]] += pk * M
        c[blk["q"]] += pk * M
        c[blk["s"]] += pk
        if has_theta:
            c[blk["theta"]] += pk
            lb[blk["theta"]] = lower.floor
        if m:
            c[lam_j] -= pk * (B @ xi_k + offsets)
        lb[blk["zeta"]] = -np.inf
        lb[blk["z"]] = -np.inf
        lb[blk["s"]] = -np.inf
        lb[blk["w"]], ub[blk["w"]] = lo_w, hi_w
        # stage constraints on this atom's copy
        for i in range(stage.ineq.rows):
            G_rows.append(row([(blk["z"], stage.ineq.E[i]), (blk["w"], W[i])]))
            g_rows.append(stage.ineq.h[i])
        for i in range(U.shape[0]):
            xs = slice(blk["w"].start + stage.dim_internal, blk["w"].stop)
            G_rows.append(row([(xs, U[i]), (blk["theta"], -1.0)]))
            g_rows.append(r[i])
        for i in range(stage.eq.rows):
            E_rows.append(row([(blk["z"], stage.eq.E[i]), (blk["w"], Weq[i])]))
            e_rows.append(stage.eq.h[i])
        start = len(E_rows)
        for i in range(d_in):
            E_rows.append(row([(slice(blk["z"].start + i, blk["z"].start + i + 1), 1.0),
                               (slice(blk["p"].start + i, blk["p"].start + i + 1), -1.0),
                               (slice(blk["q"].start + i, blk["q"].start + i + 1), 1.0)]))
            e_rows.append(x_prev[i])
        copy_rows.append(slice(start, len(E_rows)))
        # dual norm of the transport metric bounds zeta by lam0
        for i in range(d_xi):
            zi = slice(blk["zeta"].start + i, blk["zeta"].start + i + 1)
            if linf:
                ai = slice(blk["zabs"].start + i, blk["zabs"].start + i + 1)
                G_rows.append(row([(zi, 1.0), (ai, -1.0)]))
                G_rows.append(row([(zi, -1.0), (ai, -1.0)]))
                g_rows += [0.0, 0.0]
            else:
                lam0 = slice(lam.start, lam.start + 1)
                G_rows.append(row([(zi, 1.0), (lam0, -1.0)]))
                G_rows.append(row([(zi, -1.0), (lam0, -1.0)]))
                g_rows += [0.0, 0.0]
        if linf:
            G_rows.append(row([(blk["zabs"], 1.0), (slice(lam.start, lam.start + 1), -1.0)]))
            g_rows.append(0.0)
        # support function of the box around the atom
        for i in range(d_xi):
            zi = slice(blk["zeta"].start + i, blk["zeta"].start + i + 1)
            si = slice(blk["s"].start + i, blk["s"].start + i + 1)
            for side in (unc.lower[i] - xi_k[i], unc.upper[i] - xi_k[i]):
                entries = [(zi, side), (blk["w"], side * A[:, i]), (si, -1.0)]
                if m:
                    entries.append((lam_j, -side * B[:, i]))
                G_rows.append(row(entries))
                g_rows.append(0.0)
        atom_w.append(blk["w"])
        atom_x.append(slice(blk["w"].start + stage.dim_internal, blk["w"].stop))
    for j in range(m):
        c[lam.start + 1 + j] += bounds[j]
    lp = LinearProgram(
        c,
        np.array(G_rows).reshape(len(G_rows), n),
        np.array(g_rows),
        np.array(E_rows).reshape(len(E_rows), n),
        np.array(e_rows),
        lb,
        ub,
    )
    return ConcaveMaster(lp, m, atom_w, atom_x, copy_rows)


def evaluate(stage, ambiguity, data, lower: LowerApprox, upper: UpperApprox, x_prev, M) -> OracleOutput:
    x_prev = np.asarray(x_prev, dtype=float)
    master = assemble(stage, ambiguity, data, lower, x_prev, M)
    sol: LpSolution = solve(master.lp)
    if not sol.optimal:
        raise NumericalFailure(f"stage {stage.index} master LP ended with status {sol.status.value}")
    value = float(sol.objective) + stage.cost_constant
    grad = np.zeros(stage.dim_in)
    for rows in master.copy_rows:
        grad -= sol.eq_duals[rows]
    states = [sol.x[sl].copy() for sl in master.atom_x]
    gaps = [gap_at(lower, upper, x) for x in states]
    k = first_argmax(gaps)
    weighted = sum(p * g for p, g in zip(data.weights, gaps) if p > 0)
    return OracleOutput(
        cut=Cut(value, grad, x_prev.copy(), stage.index - 1),
        overestimate=value + weighted,
        next_state=states[k],
        gap=gaps[k],
        value=value,
        outcome_states=states,
        outcome_gaps=gaps,
    )

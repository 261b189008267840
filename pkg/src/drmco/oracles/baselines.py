"""Baseline oracles: risk-neutral expectation, CVaR mixture and worst-case vertex."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..approx import Cut, LowerApprox, UpperApprox
from ..errors import UnboundedUncertainty
from ..measures import DiscreteMeasure
from ..model import StageModel
from ..stage import StageSubproblem
from .base import OracleOutput, first_argmax, gap_at


@dataclass
class CvarWeights:
    p: np.ndarray
    alpha: float
    beta: float


def cvar_weights(values, alpha, beta, base=None) -> CvarWeights:
    """Maximizing weights of ``beta*E + (1-beta)*CVaR_alpha`` for the given outcome values.

    Each weight is capped at ``beta*w + (1-beta)*w/alpha`` for base weight ``w``
    (uniform by default). Mass is poured into the largest values first; equal
    values are filled in index order.
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    base = np.full(n, 1.0 / n) if base is None else np.asarray(base, dtype=float)
    cap = beta * base + (1.0 - beta) * base / alpha
    order = np.lexsort((np.arange(n), -values))
    p = np.zeros(n)
    left = 1.0
    for i in order:
        take = min(cap[i], left)
        p[i] = take
        left -= take
        if left <= 0:
            break
    if beta == 1.0:
        p = base.copy()
    return CvarWeights(p, alpha, beta)


def _solve_outcomes(sub, lower, upper, x_prev, points):
    out = []
    cache = {}
    for xi in points:
        key = np.asarray(xi, dtype=float).tobytes()
        if key not in cache:
            res = sub.solve(x_prev, xi)
            cache[key] = (res, gap_at(lower, upper, res.state))
        out.append(cache[key])
    return out


def cvar_evaluate(stage: StageModel, ambiguity, data: DiscreteMeasure, lower: LowerApprox, upper: UpperApprox, x_prev, M, subproblem=None) -> OracleOutput:
    """CVaR-mixture oracle; ``beta = 1`` gives the risk-neutral expectation."""
    x_prev = np.asarray(x_prev, dtype=float)
    sub = subproblem or StageSubproblem(stage, lower, M)
    solved = _solve_outcomes(sub, lower, upper, x_prev, data.atoms)
    values = np.array([r.value for r, _ in solved])
    gaps = np.array([g for _, g in solved])
    alpha, beta = ambiguity.alpha, ambiguity.beta
    if ambiguity.kind == "nominal":
        beta = 1.0
    low = cvar_weights(values, alpha, beta, data.weights).p
    grad = sum(w * r.gradient for w, (r, _) in zip(low, solved))
    value = float(low @ values)
    if np.all(np.isfinite(gaps)):
        high = cvar_weights(values + gaps, alpha, beta, data.weights).p
        over = float(high @ (values + gaps))
    else:
        over = np.inf
    k = first_argmax(gaps)
    states = [r.state for r, _ in solved]
    return OracleOutput(
        cut=Cut(value, np.asarray(grad, dtype=float), x_prev.copy(), stage.index - 1),
        overestimate=over,
        next_state=states[k],
        gap=float(gaps[k]),
        value=value,
        outcome_states=states,
        outcome_gaps=list(gaps),
    )


def mrco_evaluate(stage: StageModel, lower: LowerApprox, upper: UpperApprox, x_prev, M, vertices=None, subproblem=None) -> OracleOutput:
    """Worst case over the corners of a bounded uncertainty box."""
    if not stage.uncertainty.bounded:
        raise UnboundedUncertainty(f"stage {stage.index}: robust oracle needs a bounded box")
    x_prev = np.asarray(x_prev, dtype=float)
    if vertices is None:
        vertices = stage.uncertainty.vertices()
    sub = subproblem or StageSubproblem(stage, lower, M)
    solved = _solve_outcomes(sub, lower, upper, x_prev, vertices)
    values = np.array([r.value for r, _ in solved])
    gaps = np.array([g for _, g in solved])
    worst = first_argmax(values)
    k = first_argmax(gaps)
    res = solved[worst][0]
    states = [r.state for r, _ in solved]
    return OracleOutput(
        cut=Cut(float(values[worst]), res.gradient, x_prev.copy(), stage.index - 1),
        overestimate=float(np.max(values + gaps)),
        next_state=states[k],
        gap=float(gaps[k]),
        value=float(values[worst]),
        outcome_states=states,
        outcome_gaps=list(gaps),
    )

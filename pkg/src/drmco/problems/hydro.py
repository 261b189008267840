"""Hydro-thermal planning over a few interconnected regions.

State: stored energy per region. Decisions per stage, in order::

    y^h (hydro) | y^s (spillage) | y^g (thermal plants) | y^e (exchange j->j') | y^a (deficit) | x^l

Inflows enter the storage balance right-hand side, so stages use the
convex-uncertainty oracle on the nonnegative orthant. The shipped parameters
in ``data/hydro_default.json`` are synthetic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from importlib import resources

import numpy as np

from ..measures import ArLognormalModel, DiscreteMeasure
from ..model import AmbiguitySpec, ConstraintBlock, Instance, StageModel, UncertaintySet


@dataclass
class HydroParams:
    J: int
    T: int
    spillage_cost: float
    thermal_region: list
    thermal_cost: list
    thermal_lower: list
    thermal_upper: list
    exchange_cost: float
    exchange_bound: float
    deficit_cost: list
    demand: list
    storage_bound: list
    hydro_bound: list
    initial_storage: list
    inflow_mean: list
    inflow_seasonality: float
    inflow_period: int
    ar_coefficient: float
    log_variance: float
    log_correlation: float

    @classmethod
    def default(cls, **overrides):
        text = resources.files("drmco.problems").joinpath("data/hydro_default.json").read_text()
        d = json.loads(text)
        d.update(overrides)
        return cls.from_dict(d)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown hydro parameters: {sorted(unknown)}")
        return cls(**d)

    def pairs(self):
        return [(j, k) for j in range(self.J) for k in range(self.J) if j != k]

    def deficit_bounds(self):
        """Split each region's demand evenly over its deficit accounts."""
        D = np.asarray(self.demand, dtype=float)
        return np.array([D[j] / (self.J - 1) for j, _ in self.pairs()])

    def inflow_model(self):
        J, T = self.J, self.T
        t = np.arange(1, T + 1)[:, None]
        season = 1.0 + self.inflow_seasonality * np.sin(2.0 * np.pi * t / self.inflow_period)
        mu = np.log(np.asarray(self.inflow_mean, dtype=float) * season)
        phi = np.full((T, J), self.ar_coefficient)
        corr = np.full((J, J), self.log_correlation)
        np.fill_diagonal(corr, 1.0)
        sigma = np.repeat((self.log_variance * corr)[None], T, axis=0)
        return ArLognormalModel(mu, phi, sigma)

    @property
    def lipschitz(self):
        return float(max(self.spillage_cost, np.max(self.deficit_cost)))


def _stage(p: HydroParams, t):
    J = p.J
    L = len(p.thermal_cost)
    pairs = p.pairs()
    P = len(pairs)
    yh, ys = np.arange(J), J + np.arange(J)
    yg = 2 * J + np.arange(L)
    ye = 2 * J + L + np.arange(P)
    ya = 2 * J + L + P + np.arange(P)
    n_int = 2 * J + L + 2 * P
    cost = np.zeros(n_int + J)
    cost[ys] = p.spillage_cost
    cost[yg] = p.thermal_cost
    cost[ye] = p.exchange_cost
    cost[ya] = [p.deficit_cost[j][k] for j, k in pairs]

    rows = 2 * J
    E = np.zeros((rows, J))
    W = np.zeros((rows, n_int + J))
    h = np.zeros(rows)
    H = np.zeros((rows, J))
    for j in range(J):
        # storage balance: x^l + y^h + y^s - x^l_prev = inflow
        E[j, j] = -1.0
        W[j, yh[j]] = W[j, ys[j]] = 1.0
        W[j, n_int + j] = 1.0
        H[j, j] = 1.0
        # demand balance
        r = J + j
        W[r, yh[j]] = 1.0
        for l, region in enumerate(p.thermal_region):
            if region == j:
                W[r, yg[l]] = 1.0
        for q, (a, b) in enumerate(pairs):
            if a == j:
                W[r, ya[q]] += 1.0
                W[r, ye[q]] -= 1.0
            if b == j:
                W[r, ye[q]] += 1.0
        h[r] = p.demand[j]
    eq = ConstraintBlock(E, W[:, :n_int], W[:, n_int:], h, H)
    ineq = ConstraintBlock.empty(J, n_int, J, J)
    lo = np.concatenate([np.zeros(2 * J), p.thermal_lower, np.zeros(2 * P)])
    hi = np.concatenate([p.hydro_bound, np.full(J, np.inf), p.thermal_upper, np.full(P, p.exchange_bound), p.deficit_bounds()])
    return StageModel(
        index=t,
        dim_in=J,
        dim_out=J,
        dim_internal=n_int,
        cost_matrix=np.zeros((n_int + J, J)),
        cost_vector=cost,
        ineq=ineq,
        eq=eq,
        internal_lower=lo,
        internal_upper=hi,
        state_lower=np.zeros(J),
        state_upper=np.asarray(p.storage_bound, dtype=float),
        uncertainty=UncertaintySet(np.zeros(J), np.full(J, np.inf)),
        declared={"lipschitz_state": p.lipschitz, "lipschitz_uncertainty": p.lipschitz, "growth_rate": p.spillage_cost * J},
    )


class InflowSampler:
    """Paths of the log-AR(1) inflow process started from the known first-stage inflow."""

    def __init__(self, model: ArLognormalModel, xi1):
        self.model = model
        self.xi1 = np.asarray(xi1, dtype=float)

    def sample(self, rng, n):
        T, J = self.model.mu.shape
        noise = rng.standard_normal((n, T - 1, J))
        out = [np.empty((n, J)) for _ in range(T - 1)]
        for i in range(n):
            xi = self.xi1
            for t in range(1, T):
                xi = self.model.step(t, xi, noise[i, t - 1])
                out[t - 1][i] = xi
        return out


def build_hydro(params=None, data_seed=0, n=5):
    if isinstance(params, HydroParams):
        p = params
    else:
        p = HydroParams.default(**(params or {}))
    model = p.inflow_model()
    xi1 = np.exp(model.mu[0])
    sampler = InflowSampler(model, xi1)
    data = [DiscreteMeasure(s) for s in sampler.sample(np.random.default_rng(data_seed), n)]
    inst = Instance(
        stages=[_stage(p, t) for t in range(1, p.T + 1)],
        ambiguity=[AmbiguitySpec("nominal") for _ in range(p.T - 1)],
        data=data,
        x0=np.asarray(p.initial_storage, dtype=float),
        xi1=xi1,
        regularization=[p.lipschitz] * p.T,
        name="hydro",
    )
    return inst, sampler

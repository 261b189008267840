"""Multi-commodity inventory with uncertain demands or uncertain prices.

Per product ``j`` the state is the inventory level ``x^l_j`` (negative means
backlog) and the order ``x^b_j`` placed this stage for delivery next stage.
Decision order inside a stage::

    y^a (express orders) | y^r (rejected demand) | [x^l]_+ | [x^l]_- | x^l | x^b
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ..measures import DiscreteMeasure
from ..model import AmbiguitySpec, ConstraintBlock, Instance, StageModel, UncertaintySet


@dataclass
class InventoryParams:
    J: int = 3
    T: int = 5
    tau: int = 5
    C_a: float = 5.0
    C_b: float = 1.0
    C_H: float = 2.0
    C_B: float = 10.0
    C_r: float = 100.0
    C_F: float = 1.0
    B_c: float = 15.0
    B_a: float = 10.0
    B_b: float = 20.0
    B_l_minus: float = 10.0
    B_l_plus: float = 100.0
    D0: float = 5.0
    D_bar: float = 50.0
    # price variant
    C0: float = 1.0
    C1: float = 5.0
    C_bar: float = 0.1
    C_low: float = 0.001
    sigma_cap: float = 6.0
    model_seed: int = 0

    @classmethod
    def price_defaults(cls, **overrides):
        base = dict(J=5, T=10, tau=5, C_H=1.0, C_B=10.0, C_r=100.0, B_c=15.0, B_a=10.0, B_b=20.0, B_l_minus=20.0, B_l_plus=20.0, D0=5.0, D_bar=10.0)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown inventory parameters: {sorted(unknown)}")
        return cls(**d)

    def vec(self, name):
        """Per-product array for a scalar or list-valued parameter."""
        v = np.asarray(getattr(self, name), dtype=float)
        return np.full(self.J, float(v)) if v.ndim == 0 else v


def base_demand(p: InventoryParams, t):
    j = np.arange(1, p.J + 1)
    return p.D0 * (1.0 + np.cos(2.0 * np.pi * (t + j) / p.tau))


def price_mean(p: InventoryParams, t):
    j = np.arange(1, p.J + 1)
    return p.C0 * (1.0 + np.sin(2.0 * np.pi * (t + j) / p.tau))


def _stage(p: InventoryParams, t, variant, xi_upper=None):
    J = p.J
    nd = 6 * J
    ya, yr, hp, hm, xl, xb = (slice(k * J, (k + 1) * J) for k in range(6))
    dim_int = 4 * J
    Ca, Cb, CH, CB, Cr = (p.vec(n) for n in ("C_a", "C_b", "C_H", "C_B", "C_r"))
    cost = np.zeros(nd)
    cost[ya], cost[yr], cost[hp], cost[hm], cost[xb] = Ca, Cr, CH, CB, Cb
    A = np.zeros((nd, J))
    if variant == "demand":
        demand = base_demand(p, t)
        D_slope = p.D_bar
        unc = UncertaintySet(np.zeros(J), np.ones(J))
    else:
        demand = base_demand(p, t) + p.D_bar
        D_slope = 0.0
        cost[ya] = 0.0
        cost[xb] = 0.0
        A[ya, :] = p.C1 * np.eye(J)
        A[xb, :] = np.eye(J)
        unc = UncertaintySet(np.full(J, p.C_low), xi_upper)

    rows = 1 + 2 * J
    E = np.zeros((rows, 2 * J))
    W = np.zeros((rows, nd))
    h = np.zeros(rows)
    H = np.zeros((rows, J))
    W[0, ya] = 1.0
    h[0] = p.B_c
    for j in range(J):
        r = 1 + j  # inventory balance
        E[r, j] = -1.0
        E[r, J + j] = -1.0
        W[r, ya.start + j] = -1.0
        W[r, yr.start + j] = -1.0
        W[r, xl.start + j] = 1.0
        h[r] = -demand[j]
        H[r, j] = -D_slope
        r = 1 + J + j  # rejections bounded by demand
        W[r, yr.start + j] = 1.0
        h[r] = demand[j]
        H[r, j] = D_slope
    ineq = ConstraintBlock(E, W[:, :dim_int], W[:, dim_int:], h, H)
    Weq = np.zeros((J, nd))
    for j in range(J):
        Weq[j, xl.start + j] = 1.0
        Weq[j, hp.start + j] = -1.0
        Weq[j, hm.start + j] = 1.0
    eq = ConstraintBlock(np.zeros((J, 2 * J)), Weq[:, :dim_int], Weq[:, dim_int:], np.zeros(J), np.zeros((J, J)))
    Ba, Bb, Blm, Blp = (p.vec(n) for n in ("B_a", "B_b", "B_l_minus", "B_l_plus"))
    int_lo = np.zeros(dim_int)
    int_hi = np.concatenate([Ba, np.full(J, np.inf), Blp, Blm])
    if variant == "demand":
        l_unc = p.D_bar * float(Cr.max())
    else:
        l_unc = float(np.max(Bb + p.C1 * Ba))
    declared = {"lipschitz_state": float(Cr.sum()), "lipschitz_uncertainty": l_unc}
    return StageModel(
        index=t,
        dim_in=2 * J,
        dim_out=2 * J,
        dim_internal=dim_int,
        cost_matrix=A,
        cost_vector=cost,
        ineq=ineq,
        eq=eq,
        internal_lower=int_lo,
        internal_upper=int_hi,
        state_lower=np.concatenate([-Blm, np.zeros(J)]),
        state_upper=np.concatenate([Blp, Bb]),
        uncertainty=unc,
        cost_constant=p.C_F,
        declared=declared,
    )


class DemandSampler:
    """Stagewise independent demand noise: a uniform first coordinate, then a
    chain of uniforms whose range follows the previous coordinate."""

    def __init__(self, J, T):
        self.J, self.T = J, T

    @staticmethod
    def transform(u):
        xi = np.empty_like(u)
        xi[..., 0] = u[..., 0]
        for j in range(1, u.shape[-1]):
            prev = xi[..., j - 1]
            low = np.where(prev <= 0.5, 0.0, prev / 2.0)
            high = np.where(prev <= 0.5, (1.0 + prev) / 2.0, 1.0)
            xi[..., j] = low + (high - low) * u[..., j]
        return xi

    def sample(self, rng, n):
        u = rng.random((n, self.T - 1, self.J))
        xi = self.transform(u)
        return [xi[:, t, :] for t in range(self.T - 1)]


class PriceSampler:
    """Truncated correlated normal prices, clipped to ``[C_low, cap]``."""

    def __init__(self, means, covs, scale, low, caps):
        self.means = np.asarray(means)  # (T-1, J)
        self.factors = [np.linalg.cholesky(c + 1e-12 * np.eye(c.shape[0])) for c in covs]
        self.scale = scale
        self.low = low
        self.caps = np.asarray(caps)

    def sample(self, rng, n):
        z = rng.standard_normal((n, self.means.shape[0], self.means.shape[1]))
        out = []
        for t in range(self.means.shape[0]):
            xi = self.means[t] + np.sqrt(self.scale) * z[:, t, :] @ self.factors[t].T
            out.append(np.clip(xi, self.low, self.caps[t]))
        return out


def random_covariance(rng, J):
    """``U U'`` for uniform ``U``, scaled to unit largest eigenvalue."""
    U = rng.random((J, J))
    S = U @ U.T
    return S / np.linalg.eigvalsh(S).max()


def _measures(samples):
    return [DiscreteMeasure(s) for s in samples]


def build_inventory_demand(params=None, data_seed=0, n=5):
    p = params if isinstance(params, InventoryParams) else InventoryParams.from_dict(params or {})
    stages = [_stage(p, t, "demand") for t in range(1, p.T + 1)]
    sampler = DemandSampler(p.J, p.T)
    data = _measures(sampler.sample(np.random.default_rng(data_seed), n))
    M = stages[0].declared["lipschitz_state"]
    inst = Instance(
        stages=stages,
        ambiguity=[AmbiguitySpec("nominal") for _ in range(p.T - 1)],
        data=data,
        x0=np.zeros(2 * p.J),
        xi1=np.zeros(p.J),
        regularization=[M] * p.T,
        name="inventory_demand",
    )
    return inst, sampler


def build_inventory_price(params=None, data_seed=0, n=5):
    if isinstance(params, InventoryParams):
        p = params
    else:
        p = InventoryParams.price_defaults(**(params or {}))
    model_rng = np.random.default_rng(p.model_seed)
    means = np.array([price_mean(p, t) for t in range(1, p.T + 1)])
    covs = [random_covariance(model_rng, p.J) for _ in range(p.T)]
    caps = means + p.sigma_cap * np.sqrt(p.C_bar)
    stages = [_stage(p, t, "price", caps[t - 1]) for t in range(1, p.T + 1)]
    sampler = PriceSampler(means[1:], covs[1:], p.C_bar, p.C_low, caps[1:])
    sampler.covariances = covs
    data = _measures(sampler.sample(np.random.default_rng(data_seed), n))
    M = stages[0].declared["lipschitz_state"]
    inst = Instance(
        stages=stages,
        ambiguity=[AmbiguitySpec("nominal") for _ in range(p.T - 1)],
        data=data,
        x0=np.zeros(2 * p.J),
        xi1=np.clip(means[0], p.C_low, caps[0]),
        regularization=[M] * p.T,
        name="inventory_price",
    )
    return inst, sampler

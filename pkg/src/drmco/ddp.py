"""Consecutive dual dynamic programming with inner and outer approximations."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .approx import LowerApprox, UpperApprox
from .errors import DrmcoError, InfeasibleProblem, NumericalFailure, OracleFailure
from .model import Instance
from .oracles import make_oracles
from .stage import StageSubproblem

log = logging.getLogger(__name__)

_CROSS_TOL = 1e-9


@dataclass
class DdpConfig:
    epsilon: float = 1e-6
    rel_epsilon: float = 0.0  # stop also when the gap is below rel_epsilon * |upper|
    max_iters: int = 200
    time_cap: float = np.inf
    forward_mode: str = "gapmax"  # or "sampled"
    seed: int = 0


@dataclass
class IterationRecord:
    iteration: int
    lower: float
    upper: float
    gaps: list
    seconds: float


@dataclass
class SolveReport:
    name: str
    status: str
    iterations: list
    x1: np.ndarray
    lowers: list
    uppers: list
    config: DdpConfig = field(default_factory=DdpConfig)

    @property
    def lower_bound(self):
        return self.iterations[-1].lower

    @property
    def upper_bound(self):
        return self.iterations[-1].upper

    @property
    def value(self):
        """In-sample value reported for the model (the final lower bound)."""
        return self.lower_bound

    def to_dict(self):
        fin = lambda v: v if np.isfinite(v) else None
        return {
            "name": self.name,
            "status": self.status,
            "lower_bound": self.lower_bound,
            "upper_bound": fin(self.upper_bound),
            "x1": np.asarray(self.x1).tolist(),
            "config": {k: (fin(v) if isinstance(v, float) else v) for k, v in vars(self.config).items()},
            "iterations": [
                {"iteration": r.iteration, "lower": r.lower, "upper": fin(r.upper), "gaps": [fin(g) for g in r.gaps], "seconds": r.seconds}
                for r in self.iterations
            ],
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    def save_bounds_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "lower", "upper", "seconds"])
            for r in self.iterations:
                w.writerow([r.iteration, repr(r.lower), repr(r.upper), f"{r.seconds:.6f}"])

    def save_cuts(self, path):
        save_pools(path, self.lowers, self.uppers)


def save_pools(path, lowers, uppers=None):
    doc = {"lower": [a.to_dict() for a in lowers]}
    if uppers is not None:
        doc["upper"] = [a.to_dict() for a in uppers]
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_pools(path):
    with open(path) as fh:
        doc = json.load(fh)
    lowers = [LowerApprox.from_dict(d) for d in doc["lower"]]
    uppers = [UpperApprox.from_dict(d) for d in doc.get("upper", [])]
    return lowers, uppers


def initial_approximations(instance: Instance):
    """Empty pools: ``lowers[t]`` / ``uppers[t]`` approximate the cost-to-go after stage t+1."""
    T = instance.T
    lowers, uppers = [], []
    for t in range(T):
        dim = instance.stages[t].dim_out
        terminal = t == T - 1
        M = instance.regularization[t + 1] if not terminal else np.inf
        lowers.append(LowerApprox(dim, stage=t + 1, lipschitz=M, terminal=terminal))
        uppers.append(UpperApprox(dim, M if not terminal else 1.0, stage=t + 1, terminal=terminal))
    return lowers, uppers


def initial_oracle(stage1, lower: LowerApprox, upper: UpperApprox, x0, xi1):
    """Solve the first-stage LP against ``lower``.

    Returns ``(x1, gap, lower_value, upper_value)`` where the two values are
    the stage cost plus the lower/upper cost-to-go at ``x1``.
    """
    sub = StageSubproblem(stage1, lower, None)
    try:
        res = sub.solve(x0, xi1)
    except InfeasibleProblem as exc:
        raise InfeasibleProblem("no feasible first-stage decision") from exc
    up = upper.evaluate(res.state)
    low = lower.evaluate(res.state)
    gap = up - low if np.isfinite(up) else np.inf
    return res.state, gap, res.stage_cost + low, res.stage_cost + up


def _stop(lower, upper, cfg):
    if not np.isfinite(upper):
        return False
    return upper - lower <= max(cfg.epsilon, cfg.rel_epsilon * abs(upper))


def run(instance: Instance, oracles=None, config: DdpConfig = None) -> SolveReport:
    """Run DDP until the bound gap closes, the iteration cap or the time cap."""
    cfg = config or DdpConfig()
    oracles = oracles or make_oracles(instance)
    T = instance.T
    lowers, uppers = initial_approximations(instance)
    rng = np.random.default_rng(cfg.seed)
    start = time.perf_counter()
    s1 = instance.stages[0]
    x1, g1, lb, ub = initial_oracle(s1, lowers[0], uppers[0], instance.x0, instance.xi1)
    incumbent = x1
    records = [IterationRecord(0, lb, ub, [g1], time.perf_counter() - start)]
    status = "IterCap"
    it = 0
    while True:
        if _stop(lb, ub, cfg):
            status = "GapReached"
            break
        if it >= cfg.max_iters:
            status = "IterCap"
            break
        if time.perf_counter() - start > cfg.time_cap:
            status = "TimeCap"
            break
        it += 1
        x_prev = x1
        gaps = [g1]
        timed_out = False
        for t in range(2, T + 1):
            try:
                out = oracles[t - 1](x_prev, lowers[t - 1], uppers[t - 1])
                lowers[t - 2].add_cut(out.cut)
            except DrmcoError as exc:
                raise OracleFailure(f"stage {t}, iteration {it}: {exc}", stage=t, iteration=it) from exc
            uppers[t - 2].add_point(x_prev, out.overestimate)
            if cfg.forward_mode == "sampled":
                k = int(rng.integers(len(out.outcome_states)))
                x_prev, gap = out.outcome_states[k], out.outcome_gaps[k]
            else:
                x_prev, gap = out.next_state, out.gap
            gaps.append(gap)
            if time.perf_counter() - start > cfg.time_cap:
                timed_out = True
                break
        x1, g1, lb_new, ub_new = initial_oracle(s1, lowers[0], uppers[0], instance.x0, instance.xi1)
        lb = max(lb, lb_new)
        if ub_new < ub:
            ub, incumbent = ub_new, x1
        if ub < lb:
            # bounds may cross by rounding once the gap has closed
            if lb - ub > _CROSS_TOL * max(1.0, abs(lb)):
                raise NumericalFailure(f"upper bound {ub!r} fell below lower bound {lb!r} at iteration {it}")
            ub = lb
        gaps[0] = g1
        records.append(IterationRecord(it, lb, ub, gaps, time.perf_counter() - start))
        log.info("iteration %d lower %.8g upper %.8g", it, lb, ub)
        if timed_out:
            status = "GapReached" if _stop(lb, ub, cfg) else "TimeCap"
            break
    return SolveReport(instance.name, status, records, incumbent, lowers, uppers, cfg)

"""Out-of-sample simulation of the policy induced by trained cut pools."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InfeasibleProblem
from .model import Instance
from .stage import StageSubproblem

log = logging.getLogger(__name__)

QUANTILES = (0.01, 0.10, 0.25, 0.50, 0.75, 0.90, 0.99)
CHUNK = 256  # paths per independent solver cache; fixed so results do not depend on the worker count


@dataclass
class PolicyRun:
    stage_costs: np.ndarray  # (N, T); NaN from the failing stage on for aborted paths
    states: list  # per stage, (N, dim_out)
    aborted: np.ndarray  # (N,) bool
    seed: int = 0

    @property
    def N(self):
        return self.stage_costs.shape[0]

    @property
    def totals(self):
        return self.stage_costs.sum(axis=1)

    @property
    def completed_totals(self):
        return self.totals[~self.aborted]

    @property
    def value(self):
        """Sample mean of completed path costs (NaN if none completed)."""
        tot = self.completed_totals
        return float(tot.mean()) if tot.size else float("nan")

    def to_csv(self, path):
        T = self.stage_costs.shape[1]
        width = max((s.shape[1] for s in self.states), default=0)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["path", "stage", "cost"] + [f"state_{i}" for i in range(width)])
            for k in range(self.N):
                for t in range(T):
                    st = self.states[t][k]
                    row = [k, t + 1, repr(float(self.stage_costs[k, t]))] + [repr(float(v)) for v in st]
                    w.writerow(row + [""] * (width - st.size))

    @classmethod
    def read_totals(cls, path):
        """Per-path totals recomputed from an exported CSV."""
        totals = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                k = int(row["path"])
                totals[k] = totals.get(k, 0.0) + float(row["cost"])
        return np.array([totals[k] for k in sorted(totals)])


@dataclass
class EvalStats:
    n: int
    aborted: int
    mean: float
    std: float
    quantiles: dict  # "q01", "q10", ... -> value

    def to_dict(self):
        return asdict(self)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)


def quantile_key(q):
    return f"q{int(round(100 * q)):02d}"


def summarize(run: PolicyRun) -> EvalStats:
    tot = run.completed_totals
    if tot.size == 0:
        raise ValueError("no completed paths to summarize")
    std = float(tot.std(ddof=1)) if tot.size > 1 else 0.0
    qs = np.quantile(tot, QUANTILES, method="linear")
    return EvalStats(
        n=int(tot.size),
        aborted=int(run.aborted.sum()),
        mean=float(tot.mean()),
        std=std,
        quantiles={quantile_key(q): float(v) for q, v in zip(QUANTILES, qs)},
    )


def _simulate_chunk(instance: Instance, lowers, paths):
    """Simulate a block of paths; ``paths[t]`` holds the stage t+2 outcomes."""
    T = instance.T
    N = paths[0].shape[0] if paths else 0
    first = StageSubproblem(instance.stages[0], lowers[0]).solve(instance.x0, instance.xi1)
    costs = np.full((N, T), np.nan)
    states = [np.full((N, s.dim_out), np.nan) for s in instance.stages]
    aborted = np.zeros(N, dtype=bool)
    costs[:, 0] = first.stage_cost
    states[0][:] = first.state
    x = np.repeat(first.state[None, :], N, axis=0)
    for t in range(1, T):
        sub = StageSubproblem(instance.stages[t], lowers[t])
        for k in range(N):
            if aborted[k]:
                continue
            try:
                res = sub.solve(x[k], paths[t - 1][k])
            except InfeasibleProblem:
                aborted[k] = True
                continue
            costs[k, t] = res.stage_cost
            states[t][k] = res.state
        x = states[t]
    return costs, states, aborted


def sample_paths(sampler, N, seed):
    if N == 0:
        return []
    return sampler.sample(np.random.default_rng(seed), N)


def simulate_policy(instance: Instance, lowers, sampler=None, N=0, seed=0, paths=None, workers=1) -> PolicyRun:
    """Run the greedy policy ``argmin f_t + lower_t`` along ``N`` sampled paths.

    Pass ``paths`` (list over stages 2..T of ``(N, dim_xi)`` arrays) to reuse
    a fixed evaluation sample across several policies.
    """
    if paths is None:
        paths = sample_paths(sampler, N, seed) if instance.T > 1 else []
    N = paths[0].shape[0] if paths else N
    T = instance.T
    if N == 0:
        return PolicyRun(np.zeros((0, T)), [np.zeros((0, s.dim_out)) for s in instance.stages], np.zeros(0, dtype=bool), seed)
    blocks = [(i, min(i + CHUNK, N)) for i in range(0, N, CHUNK)]
    jobs = [[p[a:b] for p in paths] for a, b in blocks]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_simulate_chunk, [instance] * len(jobs), [lowers] * len(jobs), jobs))
    else:
        parts = [_simulate_chunk(instance, lowers, job) for job in jobs]
    costs = np.vstack([c for c, _, _ in parts])
    states = [np.vstack([s[t] for _, s, _ in parts]) for t in range(T)]
    aborted = np.concatenate([a for _, _, a in parts])
    if aborted.any():
        log.warning("%d of %d evaluation paths hit an infeasible stage LP", int(aborted.sum()), N)
    return PolicyRun(costs, states, aborted, seed)


@dataclass
class ConservatismReport:
    difference: float
    bound: float
    margin: float
    holds: bool


def conservatism_check(dr_value, nominal_value, lipschitz, radii, epsilon=0.0) -> ConservatismReport:
    """Check ``dr - nominal <= sum_t l_t rho_t + 2 eps`` for values solved to gap ``eps``."""
    bound = float(np.dot(lipschitz, radii)) + 2.0 * epsilon
    diff = float(dr_value - nominal_value)
    return ConservatismReport(diff, bound, bound - diff, diff <= bound)


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "drmco"  # stable element ids across runs
    import matplotlib.pyplot as plt

    return plt


def plot_quantiles(rows, path, quantiles=("q10", "q50", "q90")):
    """Quantile-versus-radius lines from rows of ``(gamma, EvalStats)``."""
    plt = _pyplot()

    rows = sorted(rows, key=lambda r: r[0])
    fig, ax = plt.subplots(figsize=(6, 4))
    gammas = [g for g, _ in rows]
    for q in quantiles:
        ax.plot(gammas, [s.quantiles[q] for _, s in rows], marker="o", label=q)
    ax.set_xlabel("relative radius")
    ax.set_ylabel("out-of-sample cost")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_mean_std(rows, path):
    """Mean-versus-standard-deviation scatter from rows of ``(label, EvalStats)``."""
    plt = _pyplot()

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, s in rows:
        ax.scatter(s.std, s.mean)
        ax.annotate(str(label), (s.std, s.mean), fontsize=7)
    ax.set_xlabel("standard deviation")
    ax.set_ylabel("mean")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)

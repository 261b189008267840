"""Experiment pipeline: build data, train every model, evaluate on shared paths."""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ddp, problems
from .config import ExperimentConfig, ambiguity_for
from .errors import ConfigError
from .evaluation import QUANTILES, plot_mean_std, plot_quantiles, quantile_key, sample_paths, simulate_policy, summarize
from .lp import write_mps
from .measures import fit_saa, radius_hat, wasserstein_discrete
from .stage import StageSubproblem

log = logging.getLogger(__name__)

SUMMARY_FIELDS = ["model", "kind", "gamma", "alpha", "beta", "status", "iterations", "in_sample", "upper_bound", "eval_mean", "eval_std"] + [
    quantile_key(q) for q in QUANTILES
] + ["aborted"]


def slug(label):
    return re.sub(r"[^A-Za-z0-9.]+", "_", label).strip("_")


@dataclass
class Setup:
    config: ExperimentConfig
    instance: object
    sampler: object
    bases: list  # radius basis per stage 2..T
    saa: list  # SAA measures per stage 2..T, or None

    def model_instance(self, label, kind, params):
        data = self.saa if self.saa is not None and kind in ("nominal", "cvar") else self.instance.data
        specs = ambiguity_for(kind, params, self.bases)
        return self.instance.with_ambiguity(specs, data=data, name=label)

    def ddp_config(self):
        c = self.config
        return ddp.DdpConfig(
            epsilon=c.epsilon,
            rel_epsilon=c.rel_epsilon,
            max_iters=c.max_iters,
            time_cap=c.time_cap if c.time_cap is not None else np.inf,
            forward_mode=c.forward_mode,
            seed=c.seeds.algorithm,
        )


def prepare(config: ExperimentConfig) -> Setup:
    try:
        inst, sampler = problems.build(config.problem.name, config.problem.params, config.seeds.data, config.n)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"problem.params: {exc}", field="problem.params") from None
    saa = None
    if config.saa_atoms is not None:
        rng = np.random.default_rng([config.seeds.data, 1])
        saa = [fit_saa(m.atoms, config.saa_atoms, rng).measure for m in inst.data]
    if config.radius_basis == "saa":
        bases = [wasserstein_discrete(m, s) for m, s in zip(inst.data, saa)]
    else:
        bases = [radius_hat(m) for m in inst.data]
    return Setup(config, inst, sampler, bases, saa)


def _model_dir(out, label):
    d = Path(out) / "models" / slug(label)
    d.mkdir(parents=True, exist_ok=True)
    return d


def solve_models(setup: Setup, out):
    """Train every configured model; returns ``{label: SolveReport}``."""
    reports = {}
    for label, kind, params in setup.config.expand_models():
        inst = setup.model_instance(label, kind, params)
        log.info("solving %s", label)
        rep = ddp.run(inst, config=setup.ddp_config())
        d = _model_dir(out, label)
        rep.save(d / "report.json")
        rep.save_bounds_csv(d / "bounds.csv")
        rep.save_cuts(d / "cuts.json")
        reports[label] = rep
    return reports


def evaluate_models(setup: Setup, out, workers=1):
    """Evaluate saved cut pools on one shared path sample; returns ``{label: EvalStats}``."""
    cfg = setup.config
    paths = sample_paths(setup.sampler, cfg.eval_paths, cfg.seeds.evaluation)
    stats = {}
    for label, _, _ in cfg.expand_models():
        d = _model_dir(out, label)
        cuts = d / "cuts.json"
        if not cuts.exists():
            raise ConfigError(f"no trained cuts for model {label}; run 'solve' first", field="models")
        lowers, _ = ddp.load_pools(cuts)
        run = simulate_policy(setup.instance, lowers, paths=paths, seed=cfg.seeds.evaluation, workers=workers)
        run.to_csv(d / "eval.csv")
        if run.N:
            stats[label] = summarize(run)
            stats[label].save(d / "eval.json")
    return stats


def _fmt(v):
    if v is None or v == "":
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_summary(setup: Setup, out, reports, stats):
    rows = []
    for label, kind, params in setup.config.expand_models():
        row = {"model": label, "kind": kind, "gamma": params.get("gamma"), "alpha": params.get("alpha"), "beta": params.get("beta")}
        rep = reports.get(label)
        if rep is None:
            with open(_model_dir(out, label) / "report.json") as fh:
                doc = json.load(fh)
            row.update(status=doc["status"], iterations=len(doc["iterations"]) - 1, in_sample=doc["lower_bound"], upper_bound=doc["upper_bound"])
        else:
            row.update(status=rep.status, iterations=len(rep.iterations) - 1, in_sample=rep.lower_bound, upper_bound=rep.upper_bound)
        st = stats.get(label)
        if st is not None:
            row.update(eval_mean=st.mean, eval_std=st.std, aborted=st.aborted, **st.quantiles)
        rows.append(row)
    path = Path(out) / "summary.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_FIELDS)
        for r in rows:
            w.writerow([_fmt(r.get(k)) for k in SUMMARY_FIELDS])
    return path, rows


def write_plots(setup: Setup, out, stats):
    labelled = [(label, kind, params) for label, kind, params in setup.config.expand_models() if label in stats]
    wass = [(p["gamma"], stats[label]) for label, kind, p in labelled if kind == "wasserstein"]
    if len(wass) > 1:
        plot_quantiles(wass, Path(out) / "quantiles.svg")
    if labelled:
        plot_mean_std([(label, stats[label]) for label, _, _ in labelled], Path(out) / "mean_std.svg")


def run_experiment(config: ExperimentConfig, out, workers=1):
    Path(out).mkdir(parents=True, exist_ok=True)
    setup = prepare(config)
    with open(Path(out) / "config.json", "w") as fh:
        json.dump(config.model_dump(), fh, indent=1)
    reports = solve_models(setup, out)
    stats = evaluate_models(setup, out, workers)
    path, _ = write_summary(setup, out, reports, stats)
    write_plots(setup, out, stats)
    return path


def export_lps(config: ExperimentConfig, out):
    """Write each stage LP (at the first data atom, trained cuts if present) as MPS."""
    setup = prepare(config)
    inst = setup.instance
    target = Path(out) / "lp"
    target.mkdir(parents=True, exist_ok=True)
    lowers, _ = ddp.initial_approximations(inst)
    label = config.expand_models()[0][0]
    cuts = Path(out) / "models" / slug(label) / "cuts.json"
    if cuts.exists():
        lowers, _ = ddp.load_pools(cuts)
    written = []
    x_prev = inst.x0
    for t, stage in enumerate(inst.stages):
        M = None if t == 0 else inst.regularization[t]
        sub = StageSubproblem(stage, lowers[t], M)
        xi = inst.xi1 if t == 0 else inst.data[t - 1].atoms[0]
        res = sub.solve(x_prev, xi)
        path = target / f"stage_{t + 1}.mps"
        write_mps(sub.lp, path, f"STAGE{t + 1}")
        written.append(path)
        x_prev = res.state
    return written

"""Acceptance suite: one test per numbered criterion, each printing a PASS/FAIL line."""

import itertools
import time

import numpy as np
import pytest
from conftest import record_criterion
from oracles import (
    cvar_lp_weights,
    extensive_cost_to_go,
    extensive_value,
    highs,
    transport_vertex_value,
    two_point_toy_value,
    vertex_enumeration_lp,
)

from drmco import ddp, problems
from drmco.evaluation import conservatism_check, simulate_policy, summarize
from drmco.lp import LinearProgram, solve
from drmco.measures import DiscreteMeasure, radius_hat, wasserstein_discrete
from drmco.model import AmbiguitySpec
from drmco.oracles import concave, convex
from drmco.oracles.baselines import cvar_weights
from drmco.problems import build_affine_toy

GAMMAS = (0.0, 0.1, 0.5, 1.0, 2.0)
TIGHT = ddp.DdpConfig(epsilon=1e-8)


def _wasserstein(inst, gamma):
    specs = [AmbiguitySpec("wasserstein", gamma * radius_hat(m)) for m in inst.data]
    return inst.with_ambiguity(specs, name=f"wasserstein({gamma:g})")


def _declared_uncertainty_lipschitz(inst):
    return np.array([s.declared["lipschitz_uncertainty"] for s in inst.stages[1:]])


@pytest.fixture(scope="module")
def nominal_run(small_inventory):
    inst, _ = small_inventory
    start = time.perf_counter()
    rep = ddp.run(inst, config=TIGHT)
    return inst, rep, time.perf_counter() - start


@pytest.fixture(scope="module")
def radius_runs(small_inventory):
    inst, _ = small_inventory
    out = {}
    for g in GAMMAS:
        w = _wasserstein(inst, g)
        out[g] = (w, ddp.run(w, config=TIGHT))
    return out


TOY_PAIR = dict(atoms=((0.2, 0.7), (0.9, 0.1), (0.5, 0.5)), slopes=(1.0, 2.0), shortfall=1.0, radius=0.15)


@pytest.fixture(scope="module")
def affine_pair():
    out = {}
    for enc in ("objective", "rhs"):
        inst = build_affine_toy(enc, **TOY_PAIR)
        out[enc] = (inst, ddp.run(inst, config=TIGHT))
    return out


@pytest.fixture(scope="module")
def toy_runs():
    out = {}
    for enc in ("objective", "rhs"):
        inst = build_affine_toy(enc, radius=0.2)
        out[enc] = (inst, ddp.run(inst, config=TIGHT))
    return out


def test_criterion_01_extensive_form(nominal_run):
    inst, rep, seconds = nominal_run
    exact = extensive_value(inst)
    rel = abs(rep.value - exact) / abs(exact)
    ok = rel <= 1e-3 and seconds < 60 and rep.status == "GapReached"
    record_criterion(1, "nominal DDP matches the extensive form", ok, f"ddp {rep.value:.10g} exact {exact:.10g} rel {rel:.2e} time {seconds:.2f}s")
    assert ok


def test_criterion_02_zero_radius(nominal_run, radius_runs):
    _, nom, _ = nominal_run
    _, zero = radius_runs[0.0]
    diff = abs(zero.value - nom.value)
    ok = diff <= 1e-5
    record_criterion(2, "zero-radius Wasserstein equals nominal", ok, f"|diff| {diff:.2e}")
    assert ok


def test_criterion_03_radius_monotonicity(small_inventory, radius_runs, nominal_run):
    inst, _ = small_inventory
    _, nom, _ = nominal_run
    values = [radius_runs[g][1].value for g in GAMMAS]
    lip = _declared_uncertainty_lipschitz(inst)
    bases = np.array([radius_hat(m) for m in inst.data])
    slope_bound = float(lip @ bases)
    monotone = all(b >= a - 1e-8 for a, b in zip(values, values[1:]))
    steps = list(zip(zip(GAMMAS, values), zip(GAMMAS[1:], values[1:])))
    slopes = [(b - a) / (g1 - g0) for (g0, a), (g1, b) in steps]
    # each value is certified only to the DDP gap, so a difference quotient carries 2*eps/step
    slope_ok = all(s <= slope_bound + 2 * TIGHT.epsilon / (g1 - g0) for s, ((g0, _), (g1, _)) in zip(slopes, steps))
    checks = [conservatism_check(v, nom.value, lip, g * bases, TIGHT.epsilon) for g, v in zip(GAMMAS, values)]
    ok = monotone and slope_ok and all(c.holds for c in checks) and all(radius_runs[g][1].status == "GapReached" for g in GAMMAS)
    record_criterion(
        3,
        "in-sample value nondecreasing in the radius, slope within the Lipschitz bound",
        ok,
        f"values {', '.join(f'{v:.6g}' for v in values)}; max slope {max(slopes):.6g} <= {slope_bound:.6g}",
    )
    assert ok


def test_criterion_04_oracle_agreement(affine_pair):
    v_obj = affine_pair["objective"][1].value
    v_rhs = affine_pair["rhs"][1].value
    ok = abs(v_obj - v_rhs) <= 1e-4
    record_criterion(4, "objective-route and rhs-route oracles agree on an affine instance", ok, f"{v_obj:.12g} vs {v_rhs:.12g}")
    assert ok


def test_criterion_05_dual_recursion_toy(toy_runs):
    brute = two_point_toy_value(0.5, 0.2)
    inst_c = build_affine_toy("objective", radius=0.2)
    inst_v = build_affine_toy("rhs", radius=0.2)
    s_c, s_v = inst_c.stages[1], inst_v.stages[1]
    lower_c, upper_c = ddp.initial_approximations(inst_c)
    lower_v, upper_v = ddp.initial_approximations(inst_v)
    master_c = concave.evaluate(s_c, inst_c.ambiguity[0], inst_c.data[0], lower_c[1], upper_c[1], np.zeros(1), inst_c.regularization[1]).value
    master_v = convex.evaluate(s_v, inst_v.ambiguity[0], inst_v.data[0], lower_v[1], upper_v[1], np.zeros(1), inst_v.regularization[1]).value
    ddp_c = toy_runs["objective"][1].value
    ddp_v = toy_runs["rhs"][1].value
    vals = [brute, master_c, master_v, ddp_c, ddp_v]
    ok = all(abs(v - 0.7) <= 1e-6 for v in vals)
    record_criterion(5, "radius-0.2 toy evaluates to 0.7", ok, "brute {:.9f} concave {:.9f} convex {:.9f} ddp {:.9f}/{:.9f}".format(*vals))
    assert ok


def test_criterion_06_cvar_weights():
    rng = np.random.default_rng(6)
    worst = 0.0
    feasible = True
    for _ in range(100):
        n = int(rng.integers(1, 12))
        values = np.round(rng.normal(size=n) * 10, int(rng.integers(0, 3)))
        alpha = float(rng.uniform(0.01, 0.99))
        beta = float(rng.uniform(0, 1))
        w = cvar_weights(values, alpha, beta).p
        ref, _, cap = cvar_lp_weights(values, alpha, beta)
        feasible &= bool(abs(w.sum() - 1) <= 1e-12 and np.all(w >= 0) and np.all(w <= cap + 1e-15))
        worst = max(worst, abs(float(w @ values) - ref))
    uniform = all(np.array_equal(cvar_weights(rng.normal(size=n), 0.3, 1.0).p, np.full(n, 1.0 / n)) for n in range(1, 9))
    ok = worst <= 1e-9 and feasible and uniform
    record_criterion(6, "CVaR sorting weights match the LP on 100 triples, beta=1 uniform", ok, f"max gap {worst:.2e}")
    assert ok


TRANSPORT_SET = [
    DiscreteMeasure([[0.0]]),
    DiscreteMeasure([[0.0], [1.0]]),
    DiscreteMeasure([[0.0], [2.0]]),
    DiscreteMeasure([[0.5], [1.5], [4.0]], [0.2, 0.3, 0.5]),
    DiscreteMeasure([[-1.0], [3.0], [3.5]], [0.6, 0.1, 0.3]),
    DiscreteMeasure([[2.0], [2.0]], [0.25, 0.75]),
]
TRANSPORT_SET_2D = [
    DiscreteMeasure([[0.0, 0.0]]),
    DiscreteMeasure([[0.0, 1.0], [1.0, 0.0]]),
    DiscreteMeasure([[0.3, 0.2], [1.0, 1.0], [0.0, 2.0]], [0.5, 0.25, 0.25]),
    DiscreteMeasure([[1.5, -0.5], [0.2, 0.9]], [0.7, 0.3]),
]


def _random_measure(rng, dim):
    n = int(rng.integers(1, 5))
    return DiscreteMeasure(rng.normal(size=(n, dim)), rng.dirichlet(np.ones(n)))


def test_criterion_07_transport():
    worst = 0.0
    for group in (TRANSPORT_SET, TRANSPORT_SET_2D):
        for a, b in itertools.product(group, repeat=2):
            for metric in ("L1", "Linf"):
                ref = transport_vertex_value(a.atoms, a.weights, b.atoms, b.weights, metric)
                worst = max(worst, abs(wasserstein_discrete(a, b, metric) - ref))
    rng = np.random.default_rng(7)
    axiom = 0.0
    for _ in range(60):
        dim = int(rng.integers(1, 3))
        x, y, z = (_random_measure(rng, dim) for _ in range(3))
        dxy, dyx = wasserstein_discrete(x, y), wasserstein_discrete(y, x)
        dxz, dyz = wasserstein_discrete(x, z), wasserstein_discrete(y, z)
        axiom = max(axiom, abs(dxy - dyx), dxz - (dxy + dyz))
    ok = worst <= 1e-9 and axiom <= 1e-8
    record_criterion(7, "transport LP matches vertex brute force, metric axioms hold", ok, f"max error {worst:.2e}, axiom slack {axiom:.2e}")
    assert ok


def _exact_twin(label, inst):
    """Instance whose cost-to-go the extensive-form oracle can evaluate directly."""
    if label.startswith("toy-objective"):
        return build_affine_toy("rhs", **TOY_PAIR)
    return inst


def _states(stage, rng, k=100):
    return rng.uniform(stage.state_lower, stage.state_upper, size=(k, stage.dim_out))


def test_criterion_08_cut_validity(nominal_run, radius_runs, affine_pair):
    runs = [("nominal", nominal_run[0], nominal_run[1])]
    runs += [(f"wasserstein({g:g})", *radius_runs[g]) for g in GAMMAS]
    runs += [(f"toy-{enc}", *affine_pair[enc]) for enc in ("objective", "rhs")]
    rng = np.random.default_rng(8)
    worst_cut, worst_over, checked = -np.inf, -np.inf, 0
    for label, inst, rep in runs:
        exact = _exact_twin(label, inst)
        for t in range(inst.T - 1):
            stage = inst.stages[t]
            xs = _states(stage, rng)
            q = np.array([extensive_cost_to_go(exact, t + 1, x) for x in xs])
            lower, upper = rep.lowers[t], rep.uppers[t]
            for cut in lower.cuts:
                worst_cut = max(worst_cut, float(np.max([cut(x) for x in xs] - q)))
                checked += 1
            up = np.array([upper.evaluate(x) for x in xs])
            worst_over = max(worst_over, float(np.max(q - up)))
            for x, v in zip(upper.points, upper.values):
                worst_over = max(worst_over, extensive_cost_to_go(exact, t + 1, x) - v)
                checked += 1
    ok = worst_cut <= 1e-5 and worst_over <= 1e-5
    record_criterion(8, "every cut and overestimate from criteria 1-4 is valid at 100 random states", ok, f"{checked} objects, cut excess {worst_cut:.2e}, overestimate shortfall {worst_over:.2e}")
    assert ok


def _bounds_ok(rep):
    lows = [r.lower for r in rep.iterations]
    ups = [r.upper for r in rep.iterations]
    return all(b >= a for a, b in zip(lows, lows[1:])) and all(u >= l for l, u in zip(lows, ups))


def test_criterion_09_bound_discipline(nominal_run, radius_runs, affine_pair, toy_runs):
    reports = [nominal_run[1]] + [r for _, r in radius_runs.values()] + [r for _, r in affine_pair.values()] + [r for _, r in toy_runs.values()]
    extra = []
    for kind in (AmbiguitySpec("cvar", alpha=0.2, beta=0.3), AmbiguitySpec("robust")):
        extra.append(ddp.run(nominal_run[0].with_ambiguity(kind)))
    price, _ = problems.build_inventory_price({"J": 2, "T": 3}, data_seed=0, n=3)
    extra.append(ddp.run(_wasserstein(price, 0.5)))
    reports += extra
    bad = [rep.name for rep in reports if not _bounds_ok(rep)]
    ok = not bad
    record_criterion(9, "lower bound nondecreasing and upper >= lower in every run", ok, f"{len(reports)} runs, {sum(len(r.iterations) for r in reports)} records")
    assert ok, bad


def _random_lp(rng, max_vars, max_rows, box):
    """Random feasible bounded LP with integer data in [-5, 5]."""
    n = int(rng.integers(1, max_vars + 1))
    m = int(rng.integers(1, max_rows + 1))
    c = rng.integers(-5, 6, n).astype(float)
    G = rng.integers(-5, 6, (m, n)).astype(float)
    x0 = rng.integers(-2, 3, n).astype(float)
    g = G @ x0 + rng.integers(0, 6, m)
    lb, ub = np.full(n, -box), np.full(n, box)
    meq = int(rng.integers(0, 2)) if n > 1 else 0
    E = rng.integers(-5, 6, (meq, n)).astype(float)
    e = E @ x0
    return LinearProgram(c, G, g, E if meq else None, e if meq else None, lb, ub)


def _dual_objective(lp, sol):
    lam = sol.ineq_duals
    mu = sol.eq_duals if lp.n_eq else np.zeros(0)
    r = lp.c + lp.G.T @ lam + (lp.E.T @ mu if lp.n_eq else 0.0)
    return float(-lp.g @ lam - (lp.e @ mu if lp.n_eq else 0.0) + np.sum(np.where(r > 0, r * lp.lb, r * lp.ub))), float(lam.min(initial=0.0))


def test_criterion_10_lp_engine():
    rng = np.random.default_rng(10)
    duality, vertex_err, highs_err, neg = 0.0, 0.0, 0.0, 0.0
    for _ in range(1000):
        lp = _random_lp(rng, 12, 12, 5.0)
        sol = solve(lp)
        assert sol.optimal
        dobj, lam_min = _dual_objective(lp, sol)
        duality = max(duality, abs(dobj - sol.objective) / (1 + abs(sol.objective)))
        neg = min(neg, lam_min)
        ref = highs(lp.c, lp.G, lp.g, lp.E if lp.n_eq else None, lp.e if lp.n_eq else None, list(zip(lp.lb, lp.ub)))
        highs_err = max(highs_err, abs(ref.fun - sol.objective))
    for _ in range(1000):
        lp = _random_lp(rng, 4, 6, 5.0)
        if lp.n_eq:
            lp = LinearProgram(lp.c, np.vstack([lp.G, lp.E, -lp.E]), np.concatenate([lp.g, lp.e, -lp.e]), lb=lp.lb, ub=lp.ub)
        sol = solve(lp)
        assert sol.optimal
        dobj, lam_min = _dual_objective(lp, sol)
        duality = max(duality, abs(dobj - sol.objective) / (1 + abs(sol.objective)))
        ref, _ = vertex_enumeration_lp(lp.c, lp.G, lp.g, lp.lb, lp.ub)
        vertex_err = max(vertex_err, abs(ref - sol.objective))
    ok = duality <= 1e-7 and vertex_err <= 1e-7 and highs_err <= 1e-7 and neg >= -1e-12
    record_criterion(10, "LP engine: strong duality and vertex-oracle agreement on random LPs", ok, f"duality {duality:.1e}, vertex {vertex_err:.1e}, highs {highs_err:.1e}")
    assert ok


def test_criterion_11_out_of_sample_smoke():
    hits, lines = 0, []
    for seed in range(10):
        inst, sampler = problems.build_inventory_demand({"J": 2, "T": 3}, data_seed=seed, n=5)
        dr = _wasserstein(inst, 1.0)
        rep = ddp.run(dr, config=ddp.DdpConfig(epsilon=1e-6, seed=seed))
        run = simulate_policy(inst, rep.lowers, sampler, N=2000, seed=1000 + seed)
        v_eval = run.value
        hits += v_eval <= rep.value
        lines.append(f"{v_eval:.0f}/{rep.value:.0f}")
    ok = hits >= 7
    record_criterion(11, "out-of-sample cost below in-sample value in at least 7 of 10 trials", ok, f"{hits}/10 (eval/in-sample: {' '.join(lines)})")
    assert ok


def test_criterion_12_tail_quantile():
    inst, sampler = problems.build_inventory_demand({"J": 2, "T": 3}, data_seed=0, n=5)
    grid = np.logspace(-1.4, -1.0, 5)
    paths = sampler.sample(np.random.default_rng(1000), 5000)
    q90 = {}
    for g in (0.0, *grid):
        rep = ddp.run(_wasserstein(inst, g))
        q90[g] = summarize(simulate_policy(inst, rep.lowers, paths=paths)).quantiles["q90"]
    best = min(q90[g] for g in grid)
    # policies that coincide give tail quantiles equal up to rounding
    ok = best <= q90[0.0] * (1 + 1e-9)
    record_criterion(12, "90% quantile at the best radius in [10^-1.4, 10^-1] no worse than at radius 0", ok, f"q90(0) {q90[0.0]:.6f}, best {best:.6f}, relative change {(best - q90[0.0]) / q90[0.0]:.1e}")
    assert ok

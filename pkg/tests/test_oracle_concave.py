import numpy as np
import pytest
from oracles import scalar_dual_recursion, stage_value_highs, two_point_toy_value

from drmco import ddp, problems
from drmco.errors import UnboundedUncertainty
from drmco.lp import solve
from drmco.model import AmbiguitySpec, MomentConstraint, UncertaintySet
from drmco.oracles import concave
from drmco.problems import build_affine_toy


def _fresh_pools(inst):
    return ddp.initial_approximations(inst)


def _evaluate(inst, x_prev, lowers=None, uppers=None):
    lo, up = _fresh_pools(inst)
    lowers, uppers = lowers or lo, uppers or up
    return concave.evaluate(inst.stages[1], inst.ambiguity[0], inst.data[0], lowers[1], uppers[1], np.asarray(x_prev, dtype=float), inst.regularization[1])


def test_deterministic_objective_reduces_to_the_stage_lp():
    inst = build_affine_toy("objective", radius=0.3, slopes=(0.0,), shortfall=1.0)
    x_prev = np.array([0.4])
    lo, _ = _fresh_pools(inst)
    master = concave.assemble(inst.stages[1], inst.ambiguity[0], inst.data[0], lo[1], x_prev, inst.regularization[1])
    sol = solve(master.lp)
    assert sol.x[0] == pytest.approx(0.0, abs=1e-12)  # transport multiplier
    assert sol.objective == pytest.approx(stage_value_highs(inst.stages[1], x_prev, [0.5]), abs=1e-9)


@pytest.mark.parametrize("radius, expected", [(0.0, 0.5), (0.2, 0.7), (0.5, 1.0), (0.8, 1.0)])
def test_toy_values(radius, expected):
    inst = build_affine_toy("objective", radius=radius)
    assert two_point_toy_value(0.5, radius) == pytest.approx(expected, abs=1e-9)
    lo, _ = _fresh_pools(inst)
    master = concave.assemble(inst.stages[1], inst.ambiguity[0], inst.data[0], lo[1], np.zeros(1), inst.regularization[1])
    sol = solve(master.lp)
    assert sol.objective == pytest.approx(expected, abs=1e-9)
    if radius >= 0.5:
        assert sol.x[0] <= 1.0 + 1e-9


def test_linf_metric_agrees_in_one_dimension():
    inst = build_affine_toy("objective", radius=0.2)
    inst.ambiguity[0].metric = "Linf"
    assert _evaluate(inst, [0.0]).value == pytest.approx(0.7, abs=1e-9)


def test_affine_moment_constraint_caps_the_mean():
    inst = build_affine_toy("objective", radius=0.2)
    inst.ambiguity[0].moments = [MomentConstraint(np.array([1.0]), 0.0, 0.6)]
    assert _evaluate(inst, [0.0]).value == pytest.approx(0.6, abs=1e-9)


def test_unbounded_support_rejected():
    inst = build_affine_toy("objective", radius=0.2)
    inst.stages[1].uncertainty = UncertaintySet([0.0], [np.inf])
    with pytest.raises(UnboundedUncertainty):
        _evaluate(inst, [0.0])


def test_empty_upper_pool_gives_infinite_overestimate():
    price, _ = problems.build_inventory_price({"J": 1, "T": 3}, 0, 2)
    price = price.with_ambiguity(AmbiguitySpec("wasserstein", 0.3))
    out = _evaluate(price, np.array([-5.0, 2.0]))
    assert out.overestimate == np.inf and np.isfinite(out.cut(np.array([-5.0, 2.0])))


@pytest.fixture(scope="module")
def price_two_stage():
    inst, _ = problems.build_inventory_price({"J": 1, "T": 2}, 0, 2)
    return inst.with_ambiguity(AmbiguitySpec("wasserstein", 0.3))


def _states(inst, rng, k):
    s = inst.stages[0]
    return rng.uniform(s.state_lower, s.state_upper, size=(k, s.dim_out))


def test_oracle_equals_the_dual_recursion(price_two_stage):
    inst = price_two_stage
    rng = np.random.default_rng(2)
    data = inst.data[0]
    for x in np.vstack([_states(inst, rng, 6), [[-20.0, 0.0], [-8.0, 5.0]]]):
        out = _evaluate(inst, x)
        exact, grid = scalar_dual_recursion(inst.stages[1], x, data.atoms, data.weights, inst.ambiguity[0].radius)
        assert out.cut(x) <= exact + 1e-5
        assert out.overestimate >= exact - 1e-5
        assert grid >= exact - 1e-9 and grid - exact <= 1e-2


def test_trained_cuts_are_valid(price_two_stage):
    inst = price_two_stage
    rep = ddp.run(inst, config=ddp.DdpConfig(epsilon=1e-7))
    assert rep.status == "GapReached"
    data = inst.data[0]
    rng = np.random.default_rng(5)
    for x in _states(inst, rng, 20):
        exact, _ = scalar_dual_recursion(inst.stages[1], x, data.atoms, data.weights, inst.ambiguity[0].radius)
        assert max(c(x) for c in rep.lowers[0].cuts) <= exact + 1e-5
    for x, v in zip(rep.uppers[0].points, rep.uppers[0].values):
        exact, _ = scalar_dual_recursion(inst.stages[1], x, data.atoms, data.weights, inst.ambiguity[0].radius)
        assert v >= exact - 1e-5


def test_value_grows_with_radius_within_the_lipschitz_bound():
    inst, _ = problems.build_inventory_price({"J": 2, "T": 2}, 0, 3)
    l_t = inst.stages[1].declared["lipschitz_uncertainty"]
    x = np.array([-10.0, 3.0, 5.0, 1.0])
    values = []
    for rho in (0.0, 0.05, 0.1, 0.3, 0.6, 1.2):
        values.append(_evaluate(inst.with_ambiguity(AmbiguitySpec("wasserstein", rho)), x).value)
        assert values[-1] <= rho * l_t + values[0] + 1e-7
    assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))


def test_gap_is_controlled_by_the_outcome_gaps():
    inst, _ = problems.build_inventory_price({"J": 1, "T": 3}, 0, 2)
    inst = inst.with_ambiguity(AmbiguitySpec("wasserstein", 0.2))
    rep = ddp.run(inst, config=ddp.DdpConfig(max_iters=2))
    x = rep.x1
    out = _evaluate(inst, x, rep.lowers, rep.uppers)
    mean_gap = float(inst.data[0].weights @ np.array(out.outcome_gaps))
    assert out.overestimate - out.cut(x) == pytest.approx(mean_gap, abs=1e-9)
    assert mean_gap <= out.gap + 1e-12
    rep.lowers[0].add_cut(out.cut)
    again = _evaluate(inst, x, rep.lowers, rep.uppers)
    assert again.overestimate - rep.lowers[0].evaluate(x) <= again.gap + 1e-9

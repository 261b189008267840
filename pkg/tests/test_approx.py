import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import extensive_cost_to_go, highs

from drmco import ddp, problems
from drmco.approx import Cut, LowerApprox, UpperApprox, lower_eval, upper_eval
from drmco.errors import CutRejected

coords = st.floats(-5, 5, allow_nan=False)


def test_lower_examples():
    pool = LowerApprox(1, lipschitz=10.0)
    assert lower_eval(pool, [3.0]) == 0.0
    pool.add_cut(Cut(2.0, np.array([1.0]), np.array([0.0])))
    assert lower_eval(pool, [3.0]) == 5.0


def test_crossing_cuts_give_the_pointwise_max():
    cuts = [Cut(1.0, np.array([-1.0]), np.array([0.0])), Cut(0.0, np.array([1.0]), np.array([1.0]))]
    pool = LowerApprox(1, lipschitz=5.0, floor=-np.inf)
    for c in cuts:
        pool.add_cut(c)
    for x in (0.0, 1.0, 2.0):
        assert pool.evaluate([x]) == max(c([x]) for c in cuts)


def test_terminal_pool_is_zero_and_closed():
    pool = LowerApprox(2, terminal=True)
    assert pool.evaluate([1.0, 2.0]) == 0.0
    with pytest.raises(CutRejected):
        pool.add_cut(Cut(1.0, np.zeros(2), np.zeros(2)))


def test_steep_cut_rejected():
    pool = LowerApprox(2, lipschitz=3.0)
    with pytest.raises(CutRejected):
        pool.add_cut(Cut(0.0, np.array([0.0, 3.5]), np.zeros(2)))
    pool.add_cut(Cut(0.0, np.array([0.0, 3.0]), np.zeros(2)))


def test_dominated_cut_changes_nothing():
    rng = np.random.default_rng(0)
    pool = LowerApprox(2, lipschitz=10.0)
    pool.add_cut(Cut(5.0, np.array([1.0, -1.0]), np.zeros(2)))
    xs = rng.uniform(-3, 3, (100, 2))
    before = [pool.evaluate(x) for x in xs]
    pool.add_cut(Cut(-20.0, np.array([1.0, -1.0]), np.zeros(2)))
    assert [pool.evaluate(x) for x in xs] == before


def test_tangent_cuts_under_a_parabola():
    pool = LowerApprox(1, lipschitz=10.0, floor=-np.inf)
    for a in (-2.0, -1.0, 0.0, 0.5, 2.0):
        pool.add_cut(Cut(a * a, np.array([2 * a]), np.array([a])))
    grid = np.linspace(-3, 3, 50)
    assert all(pool.evaluate([x]) <= x * x + 1e-12 for x in grid)


def test_upper_examples():
    env = UpperApprox(1, 2.0)
    assert upper_eval(env, [0.0]) == np.inf
    env.add_point([0.0], 10.0)
    assert upper_eval(env, [1.0]) == 12.0
    env = UpperApprox(1, 5.0)
    env.add_point([0.0], 0.0)
    env.add_point([2.0], 0.0)
    assert upper_eval(env, [1.0]) == pytest.approx(0.0, abs=1e-12)


def _envelope_reference(points, values, M, x):
    """Envelope LP in (mu, s) with s >= |x - P mu| solved by HiGHS."""
    P = np.array(points).T
    d, N = P.shape
    c = np.concatenate([values, np.full(d, M)])
    A_ub = np.block([[-P, -np.eye(d)], [P, -np.eye(d)]])
    b_ub = np.concatenate([-x, x])
    A_eq = np.concatenate([np.ones(N), np.zeros(d)])[None, :]
    res = highs(c, A_ub, b_ub, A_eq, [1.0], [(0, None)] * N + [(None, None)] * d)
    return res.fun


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(coords, coords, st.floats(0, 50)), min_size=1, max_size=6), st.tuples(coords, coords), st.tuples(coords, coords))
def test_envelope_matches_lp_and_is_lipschitz(pts, x, y):
    M = 3.0
    env = UpperApprox(2, M)
    for a, b, v in pts:
        env.add_point([a, b], v)
    x, y = np.array(x), np.array(y)
    ux, uy = env.evaluate(x), env.evaluate(y)
    assert ux == pytest.approx(_envelope_reference([p[:2] for p in pts], [p[2] for p in pts], M, x), abs=1e-7)
    assert abs(ux - uy) <= M * np.abs(x - y).sum() + 1e-7


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(coords, coords, st.floats(-20, 20)), min_size=2, max_size=8))
def test_refinement_is_monotone(items):
    rng = np.random.default_rng(1)
    xs = rng.uniform(-5, 5, (25, 1))
    lower, upper = LowerApprox(1, lipschitz=6.0), UpperApprox(1, 6.0)
    prev_lo = np.array([lower.evaluate(x) for x in xs])
    prev_up = np.array([upper.evaluate(x) for x in xs])
    for anchor, slope, value in items:
        lower.add_cut(Cut(value, np.array([slope]), np.array([anchor])))
        upper.add_point([anchor], abs(value))
        lo = np.array([lower.evaluate(x) for x in xs])
        up = np.array([upper.evaluate(x) for x in xs])
        assert np.all(lo >= prev_lo - 1e-12)
        assert np.all(up <= prev_up + 1e-9)
        prev_lo, prev_up = lo, up


def test_point_below_envelope_lowers_it_at_the_anchor():
    env = UpperApprox(1, 2.0)
    env.add_point([0.0], 4.0)
    env.add_point([2.0], 4.0)
    before = env.evaluate([1.0])
    env.add_point([1.0], 1.0)
    assert env.evaluate([1.0]) < before


def test_serialization_round_trip():
    lower = LowerApprox(2, stage=3, lipschitz=4.0)
    lower.add_cut(Cut(1.5, np.array([0.5, -1.0]), np.array([2.0, 1.0]), 3))
    upper = UpperApprox(2, 4.0, stage=3)
    upper.add_point([0.0, 1.0], 3.0)
    upper.add_point([1.0, 1.0], 2.0)
    lo2, up2 = LowerApprox.from_dict(lower.to_dict()), UpperApprox.from_dict(upper.to_dict())
    for x in ([0.0, 0.0], [1.0, 2.0], [-3.0, 0.5]):
        assert lo2.evaluate(x) == lower.evaluate(x)
        assert up2.evaluate(x) == pytest.approx(upper.evaluate(x), abs=1e-12)


def test_converged_pools_sandwich_the_exact_cost_to_go():
    inst, _ = problems.build_inventory_demand({"J": 1, "T": 2}, data_seed=3, n=3)
    rep = ddp.run(inst, config=ddp.DdpConfig(epsilon=1e-8))
    stage = inst.stages[0]
    g1 = np.linspace(stage.state_lower[0], stage.state_upper[0], 10)
    g2 = np.linspace(stage.state_lower[1], stage.state_upper[1], 10)
    worst = -np.inf
    for a in g1:
        for b in g2:
            x = np.array([a, b])
            q = extensive_cost_to_go(inst, 1, x)
            worst = max(worst, rep.lowers[0].evaluate(x) - q, q - rep.uppers[0].evaluate(x))
    assert worst <= 1e-6

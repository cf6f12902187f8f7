import numpy as np
import pytest

import oracles
from shdempc.coordinator import plate_model
from shdempc.config import ExperimentSpec
from shdempc.model import StationaryPoint, rollout
from shdempc.objective import NeighborPlan, PlateCost, horizon_cost
from shdempc.solver import (
    SolverConfig,
    StationaryProblem,
    TrajectoryProblem,
    check_gradient,
    solve_stationary,
    solve_trajectory,
)
from shdempc.topology import chain, cost_coupling_sets

H = 5
L = 0.25
COST = PlateCost(L, 1e-3)
MODEL = plate_model(ExperimentSpec())


def plan_at(x, u=0.0):
    states = np.zeros((H + 1, 2))
    states[:, 0] = x
    return NeighborPlan(states, np.full((H, 1), u), np.array([x, 0.0]), np.array([u]))


def zero_warm():
    return np.zeros((H, 1)), np.zeros(2), np.zeros(1)


def test_single_agent_stationary_stays_at_origin():
    (nb,) = cost_coupling_sets(chain(1))
    res = solve_stationary(MODEL, nb, COST, np.zeros(2), {}, zero_warm())
    np.testing.assert_allclose(res.stationary.x_s, 0.0, atol=1e-12)
    np.testing.assert_allclose(res.stationary.u_s, 0.0, atol=1e-12)
    assert res.objective_exact == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("coupling,weight", [("direct", 1.0), ("cooperative", 2.0)])
def test_two_agent_stationary_matches_grid_oracle(coupling, weight):
    nb = cost_coupling_sets(chain(2), coupling)[0]
    res = solve_stationary(MODEL, nb, COST, np.zeros(2), {1: plan_at(0.0)}, zero_warm())
    # the cooperative cost counts the shared overlap in both plates' terms
    best = np.inf
    for u in np.arange(-2500, 2501) * 1e-4:
        best = min(best, weight * oracles.overlap(u) + u * u)
    assert res.objective_exact <= best + 1e-3
    assert res.objective_exact >= best - 1e-9
    assert abs(res.stationary.x_s[0]) == pytest.approx(res.stationary.u_s[0] / 1.0 * np.sign(res.stationary.x_s[0]), abs=1e-8)


def test_two_agent_grid_oracle_frozen_value():
    value, u = oracles.stationary_grid_2chain()
    assert value == pytest.approx(0.046875)
    assert abs(u) == pytest.approx(0.125)


def test_stationary_pair_is_reachable_fixed_point():
    nb = cost_coupling_sets(chain(2), "direct")[0]
    res = solve_stationary(MODEL, nb, COST, np.zeros(2), {1: plan_at(0.0)}, zero_warm())
    st = res.stationary
    np.testing.assert_allclose(MODEL.A @ st.x_s + MODEL.B @ st.u_s, st.x_s, atol=1e-8)
    np.testing.assert_allclose(res.trajectory.states[-1], st.x_s, atol=1e-8)
    assert np.all(np.abs(res.trajectory.inputs) <= 0.25)


def test_zero_input_box_forces_origin():
    model = MODEL.with_input_bounds([0.0], [0.0])
    nb = cost_coupling_sets(chain(2), "direct")[0]
    res = solve_stationary(model, nb, COST, np.zeros(2), {1: plan_at(0.0)}, zero_warm())
    np.testing.assert_array_equal(res.stationary.x_s, [0.0, 0.0])


def test_trajectory_single_agent_zero():
    (nb,) = cost_coupling_sets(chain(1))
    res = solve_trajectory(MODEL, nb, COST, np.zeros(2), StationaryPoint([0, 0], [0]), {},
                           np.zeros((H, 1)))
    np.testing.assert_allclose(res.trajectory.inputs, 0.0, atol=1e-12)
    assert res.objective_exact == 0.0


def test_trajectory_beats_zero_warm_start():
    nb = cost_coupling_sets(chain(2), "direct")[0]
    assumed = {1: plan_at(0.0)}
    stat = solve_stationary(MODEL, nb, COST, np.zeros(2), assumed, zero_warm())
    # warm start: the stationary solve's reachability witness
    warm = stat.trajectory.inputs
    res = solve_trajectory(MODEL, nb, COST, np.zeros(2), stat.stationary, assumed, warm)
    warm_cost = horizon_cost(nb, COST, rollout(MODEL, np.zeros(2), warm), assumed)
    assert res.objective_exact <= warm_cost + 1e-12
    np.testing.assert_allclose(res.trajectory.states[-1], stat.stationary.x_s, atol=1e-8)
    zero_cost = horizon_cost(nb, COST, rollout(MODEL, np.zeros(2), np.zeros((H, 1))), assumed)
    assert res.objective_exact < zero_cost


def test_trajectory_optimal_warm_start_is_kept():
    nb = cost_coupling_sets(chain(2), "direct")[0]
    assumed = {1: plan_at(0.0)}
    stat = solve_stationary(MODEL, nb, COST, np.zeros(2), assumed, zero_warm())
    first = solve_trajectory(MODEL, nb, COST, np.zeros(2), stat.stationary, assumed,
                             stat.trajectory.inputs)
    again = solve_trajectory(MODEL, nb, COST, np.zeros(2), stat.stationary, assumed,
                             first.trajectory.inputs)
    np.testing.assert_allclose(again.trajectory.inputs, first.trajectory.inputs, atol=1e-6)
    assert again.objective_exact <= first.objective_exact + 1e-12


def random_problems(seed, n=100):
    rng = np.random.default_rng(seed)
    nbs = cost_coupling_sets(chain(5))
    for _ in range(n):
        nb = nbs[int(rng.integers(0, 5))]
        assumed = {}
        for j in nb.cost_upstream:
            x = rng.uniform(-0.4, 0.4)
            p = plan_at(x, rng.uniform(-0.25, 0.25))
            p.states[:, 0] += rng.normal(0, 0.05, H + 1)
            assumed[j] = p
        x0 = np.array([rng.uniform(-0.3, 0.3), rng.uniform(-0.1, 0.1)])
        yield nb, assumed, x0, rng


def test_trajectory_gradient_matches_finite_differences():
    worst = 0.0
    for nb, assumed, x0, rng in random_problems(11):
        prob = TrajectoryProblem(MODEL, nb, COST, x0, StationaryPoint([0, 0], [0]), assumed, H)
        worst = max(worst, check_gradient(prob.f, rng.uniform(-0.25, 0.25, H)))
    assert worst <= 1e-4


def test_stationary_gradient_matches_finite_differences():
    worst = 0.0
    for nb, assumed, x0, rng in random_problems(12):
        prob = StationaryProblem(MODEL, nb, COST, x0, assumed, H)
        z = np.concatenate([rng.uniform(-0.25, 0.25, H), [rng.uniform(-0.3, 0.3), 0.0],
                            [rng.uniform(-0.25, 0.25)]])
        worst = max(worst, check_gradient(prob.f, z))
    assert worst <= 1e-4


def test_gradient_at_exact_kink_is_smooth():
    nb = cost_coupling_sets(chain(2), "direct")[0]
    prob = StationaryProblem(MODEL, nb, COST, np.zeros(2), {1: plan_at(0.0)}, H)
    assert check_gradient(prob.f, np.zeros(H + 3)) <= 1e-4


def test_gradient_check_on_quadratic():
    err = check_gradient(lambda z: (float(z @ z), 2 * z), np.array([0.3, -1.0, 2.0]))
    assert err <= 1e-7


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(penalty_growth=1.0)
    with pytest.raises(ValueError):
        SolverConfig(tol_eq=0.0)
    with pytest.raises(ValueError):
        SolverConfig(inner="newton")

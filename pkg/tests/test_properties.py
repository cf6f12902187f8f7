"""Property tests for the invariants the coordinator relies on."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from shdempc.cli import fmt
from shdempc.config import ExperimentSpec
from shdempc.hierarchy import STATIONARY, TRAJECTORY, HierarchyState, detect_conflict
from shdempc.model import discretize_plate, rollout
from shdempc.netsim import MessageBus
from shdempc.objective import (
    CostReport,
    overlap_area,
    smoothed_overlap_area,
    smoothed_overlap_slope,
)
from shdempc.topology import InfluenceGraph, chain, coloring_edges, cost_coupling_sets, greedy_color

import oracles

finite = st.floats(-5, 5, allow_nan=False)
side = st.floats(0.05, 2.0)
mu_s = st.floats(1e-4, 1e-1)
PLATE = discretize_plate(1.0, 1.0, 1.0, 1.0)


@st.composite
def graphs(draw, max_n=9):
    n = draw(st.integers(1, max_n))
    ups = [draw(st.sets(st.sampled_from([j for j in range(n) if j != i]) if n > 1 else st.nothing(),
                        max_size=n - 1)) for i in range(n)]
    return InfluenceGraph(tuple(ups))


@given(finite, finite, side)
def test_overlap_is_symmetric_and_bounded(a, b, L):
    v = overlap_area(a, b, L)
    assert v == overlap_area(b, a, L)
    assert 0.0 <= v <= L * L
    assert math.isclose(v, oracles.overlap(a - b, L), rel_tol=1e-12, abs_tol=1e-15)


@given(finite, finite, side, mu_s)
def test_smoothed_overlap_error_is_bounded(a, b, L, mu):
    err = abs(smoothed_overlap_area(a, b, L, mu) - overlap_area(a, b, L))
    assert err <= mu * L * math.log(2) * (1 + 1e-9) + 1e-15


@given(finite, finite, side, mu_s)
def test_smoothed_slope_matches_finite_difference(a, b, L, mu):
    h = 1e-6 * mu
    fd = (smoothed_overlap_area(a + h, b, L, mu) - smoothed_overlap_area(a - h, b, L, mu)) / (2 * h)
    assert math.isclose(smoothed_overlap_slope(a, b, L, mu), fd, rel_tol=1e-4, abs_tol=1e-6 * L)


@given(graphs(), st.sampled_from(["direct", "cost_coupled"]))
def test_greedy_coloring_is_proper(g, rule):
    col = greedy_color(g, rule)
    assert len(col.level_of) == g.n_agents
    for i, j in coloring_edges(g, rule):
        assert col.level_of[i] != col.level_of[j]
    assert set(col.level_of) == set(range(1, col.num_colors + 1))


@given(graphs(), st.sampled_from(["direct", "cooperative"]))
def test_cost_sets_are_dual(g, coupling):
    sets = cost_coupling_sets(g, coupling)
    for nb in sets:
        assert nb.self_id not in nb.cost_upstream | nb.cost_downstream
        for j in nb.cost_upstream:
            assert nb.self_id in sets[j].cost_downstream
        for j in nb.cost_downstream:
            assert nb.self_id in sets[j].cost_upstream


@given(st.integers(1, 30))
def test_chain_matches_oracle(n):
    g = chain(n)
    assert [set(s) for s in g.upstream] == [set(s) for s in oracles.chain_neighbours(n)]


@given(st.lists(st.floats(-0.25, 0.25), min_size=5, max_size=5),
       st.lists(st.floats(-0.25, 0.25), min_size=5, max_size=5),
       st.floats(-2, 2), st.floats(-2, 2))
def test_rollout_is_linear(u1, u2, a, b):
    x0 = np.array([0.3, -0.1])
    zero = np.zeros(2)
    U1, U2 = np.array(u1)[:, None], np.array(u2)[:, None]
    lhs = rollout(PLATE, a * x0, a * U1 + b * U2).states
    rhs = (a * rollout(PLATE, x0, U1).states + b * rollout(PLATE, zero, U2).states)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


@given(st.floats(-10, 10), st.floats(-1e-6, 1e-6), st.sampled_from([STATIONARY, TRAJECTORY]))
def test_conflict_rule(naive, delta, phase):
    informed = naive + delta
    rep = CostReport(naive, informed, naive, informed)
    assert detect_conflict(rep, phase) == (informed > naive + 1e-9 * max(1.0, abs(naive)))


@given(st.integers(0, 2**31), st.integers(0, 50), st.integers(1, 4), st.integers(1, 30))
def test_mutation_stays_in_range_and_replays(seed, agent, levels, draws):
    a = HierarchyState.seeded(seed, agent, levels)
    b = HierarchyState.seeded(seed, agent, levels)
    seq = [a.mutate() for _ in range(draws)]
    assert seq == [b.mutate() for _ in range(draws)]
    assert all(1 <= q <= levels for q in seq)
    assert a.mutations == draws


@given(st.permutations(range(6)), st.data())
def test_bus_inbox_order_ignores_send_order(order, data):
    targets = {s: data.draw(st.sets(st.sampled_from([r for r in range(6) if r != s]), min_size=1))
               for s in range(6)}

    def deliver(seq):
        bus = MessageBus(range(6))
        for s in seq:
            bus.broadcast(s, float(s), targets[s])
        assert bus.pending() == sum(len(t) for t in targets.values())
        bus.barrier()
        return {r: [m.sender for m in bus.receive(r)] for r in range(6)}

    got = deliver(order)
    assert got == deliver(range(6))
    for r, senders in got.items():
        assert senders == sorted(senders)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips(x):
    assert float(fmt(x)) == x


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 12), st.integers(1, 3), st.integers(0, 6))
def test_spec_accepts_valid_sizes(n, nq, np_):
    spec = ExperimentSpec(n_agents=n, N_q=nq, N_p=np_)
    assert (spec.n_agents, spec.N_q, spec.N_p) == (n, nq, np_)

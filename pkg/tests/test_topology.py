import itertools

import pytest

import oracles
from shdempc.topology import InfluenceGraph, chain, coloring_edges, cost_coupling_sets, greedy_color


def test_chain_small():
    assert chain(1).upstream == (frozenset(),)
    g = chain(3)
    assert g.upstream == (frozenset({1}), frozenset({0, 2}), frozenset({1}))
    assert g.downstream == g.upstream


def test_chain_ten_edges():
    assert chain(10).directed_edges() == 18 == oracles.count_chain_messages(10)


def test_chain_rejects_empty():
    with pytest.raises(ValueError):
        chain(0)


def test_graph_rejects_self_loop_and_unknown():
    with pytest.raises(ValueError):
        InfluenceGraph(({0},))
    with pytest.raises(ValueError):
        InfluenceGraph(({3},))


def test_cost_upstream_two_hop_closure():
    nbs = cost_coupling_sets(chain(10))
    for i, nb in enumerate(nbs):
        assert set(nb.cost_upstream) == oracles.two_hop_closure(10, i)
    assert nbs[4].cost_upstream == {2, 3, 5, 6}


def test_cost_sets_isolated_and_pair():
    (nb,) = cost_coupling_sets(chain(1))
    assert not (nb.upstream | nb.downstream | nb.cost_upstream | nb.cost_downstream)
    a, b = cost_coupling_sets(chain(2))
    assert a.cost_upstream == {1} and b.cost_upstream == {0}


@pytest.mark.parametrize("coupling", ["direct", "cooperative"])
@pytest.mark.parametrize("n", [1, 2, 5, 12])
def test_cost_sets_duality(coupling, n):
    nbs = cost_coupling_sets(chain(n), coupling)
    for i, j in itertools.permutations(range(n), 2):
        assert (j in nbs[i].cost_upstream) == (i in nbs[j].cost_downstream)


def test_direct_coupling_sets():
    nbs = cost_coupling_sets(chain(10), "direct")
    assert nbs[4].cost_upstream == {3, 5}
    assert nbs[4].downstream == frozenset()


def test_unknown_coupling():
    with pytest.raises(ValueError):
        cost_coupling_sets(chain(3), "global")


def test_greedy_direct_alternates():
    c = greedy_color(chain(10), "direct")
    assert c.num_colors == 2
    assert c.level_of == (1, 2) * 5


def test_greedy_single_agent():
    assert greedy_color(chain(1)).num_colors == 1


def test_greedy_cost_coupled_three_colours():
    c = greedy_color(chain(10), "cost_coupled")
    expected = oracles.greedy_by_hand(10, lambda i: oracles.two_hop_closure(10, i))
    assert list(c.level_of) == expected
    assert c.num_colors == 3


@pytest.mark.parametrize("rule", ["direct", "cost_coupled"])
@pytest.mark.parametrize("n", range(1, 15))
def test_colouring_valid_exhaustive(rule, n):
    g = chain(n)
    c = greedy_color(g, rule)
    for i, j in coloring_edges(g, rule):
        assert c.level_of[i] != c.level_of[j]
    assert greedy_color(g, rule) == c


def test_unknown_edge_rule():
    with pytest.raises(ValueError):
        greedy_color(chain(3), "nearest")

"""Influence graphs, cost-coupling neighbourhoods and greedy level assignment."""

from __future__ import annotations

from dataclasses import dataclass

from .objective import CostNeighborhood


@dataclass(frozen=True)
class InfluenceGraph:
    """``upstream[i]`` holds the agents whose state enters agent ``i``'s local cost."""

    upstream: tuple

    def __post_init__(self):
        ups = tuple(frozenset(s) for s in self.upstream)
        n = len(ups)
        for i, s in enumerate(ups):
            if i in s:
                raise ValueError(f"self-loop at agent {i}")
            if any(not 0 <= j < n for j in s):
                raise ValueError(f"agent {i} references an unknown agent")
        object.__setattr__(self, "upstream", ups)

    @property
    def n_agents(self) -> int:
        return len(self.upstream)

    @property
    def downstream(self) -> tuple:
        down = [set() for _ in range(self.n_agents)]
        for i, s in enumerate(self.upstream):
            for j in s:
                down[j].add(i)
        return tuple(frozenset(d) for d in down)

    def directed_edges(self) -> int:
        return sum(len(s) for s in self.upstream)


def chain(n: int) -> InfluenceGraph:
    """Plates in a row; each one overlaps only its immediate neighbours."""
    if n < 1:
        raise ValueError("a chain needs at least one agent")
    return InfluenceGraph(tuple({j for j in (i - 1, i + 1) if 0 <= j < n} for i in range(n)))


COUPLINGS = ("direct", "cooperative")


def cost_coupling_sets(g: InfluenceGraph, coupling: str = "cooperative") -> list[CostNeighborhood]:
    """Per-agent neighbourhoods for the chosen cost coupling.

    ``cooperative`` adds every downstream neighbour's local cost to ``J_i``,
    so agents two hops apart share a term.  ``direct`` keeps ``J_i`` equal to
    the local cost, coupling only agents joined by an edge.
    """
    if coupling not in COUPLINGS:
        raise ValueError(f"unknown coupling {coupling!r}")
    ups = g.upstream
    if coupling == "direct":
        return [
            CostNeighborhood(self_id=i, upstream=ups[i], downstream=frozenset(),
                             cost_upstream=ups[i], cost_downstream=d, upstream_of={})
            for i, d in enumerate(g.downstream)
        ]
    downs = g.downstream
    cost_up = []
    for i in range(g.n_agents):
        s = set(ups[i]) | set(downs[i])
        for j in downs[i]:
            s |= ups[j]
        s.discard(i)
        cost_up.append(frozenset(s))
    cost_down = [set() for _ in range(g.n_agents)]
    for i, s in enumerate(cost_up):
        for j in s:
            cost_down[j].add(i)
    return [
        CostNeighborhood(
            self_id=i,
            upstream=ups[i],
            downstream=downs[i],
            cost_upstream=cost_up[i],
            cost_downstream=frozenset(cost_down[i]),
            upstream_of={j: ups[j] for j in downs[i]},
        )
        for i in range(g.n_agents)
    ]


@dataclass(frozen=True)
class Coloring:
    level_of: tuple  # 1-based colour per agent
    num_colors: int


def coloring_edges(g: InfluenceGraph, edge_rule: str = "direct") -> set:
    """Undirected edges that must not join two agents of the same level.

    ``cost_coupled`` uses the cooperative neighbourhoods.
    """
    if edge_rule == "direct":
        adj = [ups | downs for ups, downs in zip(g.upstream, g.downstream)]
    elif edge_rule == "cost_coupled":
        adj = [nb.cost_upstream | nb.cost_downstream for nb in cost_coupling_sets(g)]
    else:
        raise ValueError(f"unknown edge rule {edge_rule!r}")
    return {(min(i, j), max(i, j)) for i, s in enumerate(adj) for j in s}


def greedy_color(g: InfluenceGraph, edge_rule: str = "direct") -> Coloring:
    """First-fit colouring in agent-id order.

    The colour count bounds the chromatic number from above and is a
    recommendation for the number of hierarchy levels.
    """
    adj = [set() for _ in range(g.n_agents)]
    for i, j in coloring_edges(g, edge_rule):
        adj[i].add(j)
        adj[j].add(i)
    level = [0] * g.n_agents
    for i in range(g.n_agents):
        taken = {level[j] for j in adj[i] if level[j]}
        c = 1
        while c in taken:
            c += 1
        level[i] = c
    return Coloring(tuple(level), max(level, default=0))

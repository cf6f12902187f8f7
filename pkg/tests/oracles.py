"""Reference computations written independently of the package.

Used both to freeze the constants in the tests and to re-derive them.
"""

from __future__ import annotations

import math


def expm_series(M, tol=1e-12):
    """Matrix exponential by scaling and squaring of a truncated Taylor series (pure Python)."""
    n = len(M)
    norm = max(sum(abs(v) for v in row) for row in M)
    s = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0 else 0
    A = [[v / 2 ** s for v in row] for row in M]
    E = [[float(i == j) for j in range(n)] for i in range(n)]
    term = [row[:] for row in E]
    for k in range(1, 60):
        term = [[sum(term[i][p] * A[p][j] for p in range(n)) / k for j in range(n)] for i in range(n)]
        E = [[E[i][j] + term[i][j] for j in range(n)] for i in range(n)]
        if max(abs(v) for row in term for v in row) < tol * 1e-4:
            break
    for _ in range(s):
        E = [[sum(E[i][p] * E[p][j] for p in range(n)) for j in range(n)] for i in range(n)]
    return E


def plate_zoh(m=1.0, k=1.0, c=1.0, dt=1.0):
    """ZOH of ``m x'' = -k x - c x' + u`` via the augmented-matrix exponential."""
    M = [[0.0, dt, 0.0], [-k / m * dt, -c / m * dt, dt / m], [0.0, 0.0, 0.0]]
    E = expm_series(M)
    A = [[E[0][0], E[0][1]], [E[1][0], E[1][1]]]
    B = [E[0][2], E[1][2]]
    return A, B


def overlap(d, L=0.25):
    d = abs(d)
    return 0.0 if d >= L else L * (L - d)


def local_cost(x, u, nbrs, L=0.25):
    base = u * u
    if not nbrs:
        return base
    return base + sum(overlap(x - y, L) for y in nbrs) / len(nbrs)


def chain_neighbours(n):
    return [[j for j in (i - 1, i + 1) if 0 <= j < n] for i in range(n)]


def two_hop_closure(n, i):
    """Agents whose state enters ``l_i`` or the ``l_j`` of any neighbour ``j``, by brute force."""
    nb = chain_neighbours(n)
    out = set(nb[i])
    for j in nb[i]:
        out |= set(nb[j])
    out.discard(i)
    return out


def greedy_by_hand(n, adjacency):
    colours = []
    for i in range(n):
        taken = {colours[j] for j in adjacency(i) if j < i}
        c = 1
        while c in taken:
            c += 1
        colours.append(c)
    return colours


def stationary_grid_2chain(L=0.25, u_bound=0.25, k=1.0, step=1e-4, nbr=0.0):
    """Best ``l_1`` over stationary pairs ``x = u/k`` with the neighbour fixed at ``nbr``."""
    best = (math.inf, None)
    n = int(round(2 * u_bound / step))
    for a in range(n + 1):
        u = -u_bound + a * step
        v = local_cost(u / k, u, [nbr], L)
        if v < best[0]:
            best = (v, u)
    return best


def count_chain_messages(n):
    return sum(len(s) for s in chain_neighbours(n))

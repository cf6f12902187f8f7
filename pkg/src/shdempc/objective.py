"""Stage costs for the plate-overlap benchmark and their cooperative sums.

Costs are evaluated on stacked stages: own states have shape ``(K, n)`` and
inputs ``(K, m)``, so a horizon sum and a single stationary evaluation share
one code path (``K = H`` and ``K = 1`` respectively).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.special import expit

from .model import StationaryPoint, Trajectory


class IncompleteAssumptionError(KeyError):
    """Assumed data for a cost-coupled neighbour is missing."""

    def __init__(self, agent):
        super().__init__(f"no assumed data for agent {agent}")
        self.agent = agent


class HorizonMismatchError(ValueError):
    pass


def conflict_tolerance(naive: float) -> float:
    return 1e-9 * max(1.0, abs(naive))


# -- overlap area -----------------------------------------------------------

def overlap_area(xi, xj, L: float):
    """Overlap of two square plates of side ``L`` offset vertically."""
    d = np.abs(np.asarray(xi, dtype=float) - np.asarray(xj, dtype=float))
    out = np.where(d >= L, 0.0, L * (L - d))
    return float(out) if out.ndim == 0 else out


def _smooth_abs(d, mu):
    # stays above |d| by at most mu/2, keeping the total error under mu*L*log(2)
    return np.sqrt(d * d + 0.25 * mu * mu)


def smoothed_overlap_area(xi, xj, L: float, mu: float):
    """Everywhere-differentiable surrogate of :func:`overlap_area`.

    ``L * mu * softplus((L - s) / mu)`` with ``s`` a smooth upper bound of the
    offset magnitude.  The pointwise error is at most ``mu * L * log 2``.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    d = np.asarray(xi, dtype=float) - np.asarray(xj, dtype=float)
    s = _smooth_abs(d, mu)
    out = L * mu * np.logaddexp(0.0, (L - s) / mu)
    return float(out) if out.ndim == 0 else out


def smoothed_overlap_slope(xi, xj, L: float, mu: float):
    """Derivative of :func:`smoothed_overlap_area` with respect to ``xi``."""
    d = np.asarray(xi, dtype=float) - np.asarray(xj, dtype=float)
    s = _smooth_abs(d, mu)
    return -L * expit((L - s) / mu) * d / s


# -- local stage cost -------------------------------------------------------

@dataclass(frozen=True)
class PlateCost:
    """Mean overlap with physically adjacent plates plus ``u'u``.

    ``smooth`` selects the differentiable surrogate used by the solver;
    reported metrics always use the exact area.
    """

    L: float = 0.25
    mu: float = 1e-3

    def _area(self, a, b, smooth):
        if smooth:
            return smoothed_overlap_area(a, b, self.L, self.mu)
        return overlap_area(a, b, self.L)

    def local(self, x, u, nbr_states: Mapping[int, np.ndarray], smooth: bool = False):
        x = np.atleast_2d(x)
        u = np.atleast_2d(u)
        val = np.sum(u * u, axis=1)
        if nbr_states:
            w = 1.0 / len(nbr_states)
            for xj in nbr_states.values():
                val = val + w * self._area(x[:, 0], np.atleast_2d(xj)[:, 0], smooth)
        return val

    def local_grad(self, x, u, nbr_states: Mapping[int, np.ndarray]):
        """Smoothed value and gradients with respect to own and neighbour states."""
        x = np.atleast_2d(x)
        u = np.atleast_2d(u)
        val = np.sum(u * u, axis=1)
        gx = np.zeros_like(x)
        gu = 2.0 * u
        g_nbr = {}
        if nbr_states:
            w = 1.0 / len(nbr_states)
            for j, xj in nbr_states.items():
                pj = np.atleast_2d(xj)[:, 0]
                val = val + w * smoothed_overlap_area(x[:, 0], pj, self.L, self.mu)
                slope = w * smoothed_overlap_slope(x[:, 0], pj, self.L, self.mu)
                gx[:, 0] += slope
                gj = np.zeros((x.shape[0], x.shape[1]))
                gj[:, 0] = -slope
                g_nbr[j] = gj
        return val, gx, gu, g_nbr


    def compile(self, nbhd: "CostNeighborhood", data: Mapping[int, tuple]) -> "CompiledPlateCost":
        """Freeze neighbour data into a vectorised own-variable cost for the solver."""
        i = nbhd.self_id
        weights, others = [], []
        K = None
        const = {False: 0.0, True: 0.0}
        for j in sorted(nbhd.upstream):
            xj = np.atleast_2d(_lookup(data, j)[0])
            weights.append(1.0 / len(nbhd.upstream))
            others.append(xj[:, 0])
        for j in sorted(nbhd.downstream):
            xj, uj = (np.atleast_2d(a) for a in _lookup(data, j))
            ups = nbhd.upstream_of[j]
            w = 1.0 / len(ups)
            weights.append(w)
            others.append(xj[:, 0])
            for smooth in (False, True):
                extra = np.sum(uj * uj, axis=1)
                for k in ups:
                    if k != i:
                        extra = extra + w * self._area(xj[:, 0], np.atleast_2d(_lookup(data, k)[0])[:, 0], smooth)
                const[smooth] = const[smooth] + extra
        if others:
            K = max(len(o) for o in others)
            others = np.array([np.broadcast_to(o, (K,)) for o in others])
        else:
            others = np.zeros((0, 1))
        return CompiledPlateCost(self, np.asarray(weights, dtype=float), others, const)


@dataclass
class CompiledPlateCost:
    """Cooperative cost as ``sum_p w_p * area(own, other_p) + u'u + const``."""

    cost: PlateCost
    weights: np.ndarray
    others: np.ndarray
    const: dict

    def value(self, own_x, own_u, smooth: bool = False):
        own_x = np.atleast_2d(own_x)
        own_u = np.atleast_2d(own_u)
        val = np.sum(own_u * own_u, axis=1) + self.const[smooth]
        if self.weights.size:
            area = self.cost._area(own_x[None, :, 0], self.others, smooth)
            val = val + self.weights @ area
        return val

    def value_grad(self, own_x, own_u):
        own_x = np.atleast_2d(own_x)
        own_u = np.atleast_2d(own_u)
        val = np.sum(own_u * own_u, axis=1) + self.const[True]
        gx = np.zeros_like(own_x)
        if self.weights.size:
            L, mu = self.cost.L, self.cost.mu
            d = own_x[None, :, 0] - self.others
            s = _smooth_abs(d, mu)
            t = (L - s) / mu
            val = val + self.weights @ (L * mu * np.logaddexp(0.0, t))
            gx[:, 0] = self.weights @ (-L * expit(t) * d / s)
        return val, gx, 2.0 * own_u


def local_stage_cost(x_i, u_i, neighbor_positions: Mapping[int, float],
                     L: float = 0.25, mu: float = 1e-3, smooth: bool = False) -> float:
    """Scalar convenience form of :meth:`PlateCost.local` for one stage."""
    u = np.atleast_1d(np.asarray(u_i, dtype=float))
    x = np.atleast_1d(np.asarray(x_i, dtype=float))
    nbrs = {j: np.array([[p]]) for j, p in neighbor_positions.items()}
    return float(PlateCost(L, mu).local(x[None, :], u[None, :], nbrs, smooth)[0])


# -- neighbourhoods and assumptions ----------------------------------------

@dataclass(frozen=True)
class CostNeighborhood:
    """Neighbour sets of one agent.

    ``upstream_of`` maps each downstream neighbour ``j`` to its own upstream
    set, which is what the cooperative cost needs to evaluate ``l_j``.
    """

    self_id: int
    upstream: frozenset
    downstream: frozenset
    cost_upstream: frozenset
    cost_downstream: frozenset
    upstream_of: Mapping[int, frozenset]

    def __post_init__(self):
        sets = (self.upstream, self.downstream, self.cost_upstream, self.cost_downstream)
        if any(self.self_id in s for s in sets):
            raise ValueError(f"agent {self.self_id} listed as its own neighbour")


@dataclass
class NeighborPlan:
    """What one agent assumes about a neighbour: trajectory plus stationary pair."""

    states: np.ndarray
    inputs: np.ndarray
    x_s: np.ndarray
    u_s: np.ndarray

    @classmethod
    def from_solution(cls, traj: Trajectory, stat: StationaryPoint) -> "NeighborPlan":
        return cls(traj.states.copy(), traj.inputs.copy(), stat.x_s.copy(), stat.u_s.copy())

    def copy(self) -> "NeighborPlan":
        return NeighborPlan(self.states.copy(), self.inputs.copy(), self.x_s.copy(), self.u_s.copy())


AssumedNeighborData = dict  # agent id -> NeighborPlan


def horizon_data(assumed: Mapping[int, NeighborPlan], H: int):
    out = {}
    for j, plan in assumed.items():
        if plan.inputs.shape[0] != H:
            raise HorizonMismatchError(f"agent {j}: horizon {plan.inputs.shape[0]} != {H}")
        out[j] = (plan.states[:H], plan.inputs)
    return out


def stationary_data(assumed: Mapping[int, NeighborPlan]):
    return {j: (plan.x_s[None, :], plan.u_s[None, :]) for j, plan in assumed.items()}


# -- cooperative cost ------------------------------------------------------

def _lookup(data, j):
    try:
        return data[j]
    except KeyError:
        raise IncompleteAssumptionError(j) from None


def cooperative_stage_cost(nbhd: CostNeighborhood, cost: PlateCost, own_x, own_u,
                           data: Mapping[int, tuple], smooth: bool = False):
    """Own local cost plus the local costs of every downstream neighbour.

    ``data`` maps agent ids to ``(states, inputs)`` stacks; the agent's own
    entries are taken from ``own_x`` / ``own_u``.
    """
    own_x = np.atleast_2d(own_x)
    own_u = np.atleast_2d(own_u)
    i = nbhd.self_id

    def states_of(j):
        return own_x if j == i else _lookup(data, j)[0]

    val = cost.local(own_x, own_u, {j: states_of(j) for j in nbhd.upstream}, smooth)
    for j in sorted(nbhd.downstream):
        xj, uj = _lookup(data, j)
        val = val + cost.local(xj, uj, {k: states_of(k) for k in nbhd.upstream_of[j]}, smooth)
    return val


def cooperative_stage_cost_grad(nbhd: CostNeighborhood, cost: PlateCost, own_x, own_u,
                                data: Mapping[int, tuple]):
    """Smoothed cooperative cost and its gradient with respect to own states and inputs."""
    own_x = np.atleast_2d(own_x)
    own_u = np.atleast_2d(own_u)
    i = nbhd.self_id
    val, gx, gu, _ = cost.local_grad(
        own_x, own_u, {j: own_x if j == i else _lookup(data, j)[0] for j in nbhd.upstream})
    gx = gx.copy()
    for j in sorted(nbhd.downstream):
        xj, uj = _lookup(data, j)
        nbrs = {k: own_x if k == i else _lookup(data, k)[0] for k in nbhd.upstream_of[j]}
        vj, _, _, g_nbr = cost.local_grad(xj, uj, nbrs)
        val = val + vj
        gx += g_nbr[i]
    return val, gx, gu


def stationary_cost(nbhd, cost, stat: StationaryPoint, assumed, smooth=False) -> float:
    return float(cooperative_stage_cost(nbhd, cost, stat.x_s[None, :], stat.u_s[None, :],
                                        stationary_data(assumed), smooth)[0])


def horizon_cost(nbhd, cost, traj: Trajectory, assumed, smooth=False) -> float:
    H = traj.horizon
    vals = cooperative_stage_cost(nbhd, cost, traj.states[:H], traj.inputs,
                                  horizon_data(assumed, H), smooth)
    return float(np.sum(vals))


@dataclass(frozen=True)
class CostReport:
    naive_stage: float
    informed_stage: float
    naive_horizon: float
    informed_horizon: float

    def __post_init__(self):
        vals = (self.naive_stage, self.informed_stage, self.naive_horizon, self.informed_horizon)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"non-finite cost report {vals}")


def evaluate_cost_report(nbhd, cost, traj: Trajectory, stat: StationaryPoint,
                         assumed_before, assumed_after) -> CostReport:
    """Naive (pre-exchange) and informed (post-exchange) values of an agent's optimum."""
    return CostReport(
        naive_stage=stationary_cost(nbhd, cost, stat, assumed_before),
        informed_stage=stationary_cost(nbhd, cost, stat, assumed_after),
        naive_horizon=horizon_cost(nbhd, cost, traj, assumed_before),
        informed_horizon=horizon_cost(nbhd, cost, traj, assumed_after),
    )


def global_cost(informed_horizons) -> float:
    return float(sum(informed_horizons))

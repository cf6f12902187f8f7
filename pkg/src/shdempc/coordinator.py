"""Hierarchy-based coordination of the agents' stationary and trajectory negotiations.

Each time step runs the stationary negotiation and then the trajectory
negotiation, ``N_p`` iterations each.  Inside an iteration the hierarchy
levels act in order; agents at the same level solve in parallel against
the data they hold, publish their optima, and once all levels are done
every agent compares its naive and informed costs.  A conflicted agent
discards its optimum and redraws its level; the others accept.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .audit import audit_candidate
from .config import ExperimentSpec
from .hierarchy import STATIONARY, TRAJECTORY, HierarchyState, agent_rng, detect_conflict
from .model import AgentModel, StationaryPoint, Trajectory, discretize_plate, rollout, step
from .netsim import MessageBus
from .objective import (
    CostNeighborhood,
    NeighborPlan,
    PlateCost,
    evaluate_cost_report,
    horizon_cost,
)
from .solver import LocalSolver, SolverInfeasible
from .topology import chain, cost_coupling_sets, greedy_color

log = logging.getLogger(__name__)

CANDIDATE = "candidate"


class InitializationError(RuntimeError):
    pass


@dataclass
class CandidateSolution:
    trajectory: Trajectory
    stationary: StationaryPoint

    def copy(self) -> "CandidateSolution":
        return CandidateSolution(self.trajectory.copy(), self.stationary.copy())

    def plan(self) -> NeighborPlan:
        return NeighborPlan.from_solution(self.trajectory, self.stationary)


@dataclass
class AgentRuntime:
    id: int
    model: AgentModel
    nbhd: CostNeighborhood
    hierarchy: HierarchyState
    candidate: CandidateSolution
    measured_state: np.ndarray
    solver: LocalSolver
    assumed: dict = field(default_factory=dict)


@dataclass(frozen=True)
class _Publish:
    """Bus payload; ``kind`` says which parts a receiver should adopt."""

    kind: str
    states: np.ndarray
    inputs: np.ndarray
    x_s: np.ndarray
    u_s: np.ndarray


@dataclass(frozen=True)
class TraceRecord:
    time_step: int
    phase: str
    iteration: int
    agent: int
    level_before: int
    level_after: int
    conflict: bool
    V_hat: float
    V_breve: float
    retained: bool = False


@dataclass(frozen=True)
class Sample:
    time_step: int
    phase: str
    iteration: int
    level: int  # 0 for initialisation and per-iteration samples
    V: float
    cumulative_mutations: int
    mean_target: float


@dataclass
class RunMetrics:
    seed: int
    spec: ExperimentSpec
    trace: list = field(default_factory=list)
    level_samples: list = field(default_factory=list)
    iteration_samples: list = field(default_factory=list)
    targets: list = field(default_factory=list)  # stationary positions at the end of each step
    measured: list = field(default_factory=list)  # measured states after each step
    audit_failures: list = field(default_factory=list)
    final_positions: list = field(default_factory=list)
    final_levels: list = field(default_factory=list)
    final_plans: list = field(default_factory=list)  # (measured state, inputs, x_s) per agent
    messages_sent: int = 0
    bytes_estimate: int = 0

    def samples(self, mode: str | None = None) -> list:
        mode = mode or self.spec.sampling_mode
        return self.level_samples if mode == "per_level" else self.iteration_samples

    def V(self, mode: str | None = None) -> np.ndarray:
        return np.array([s.V for s in self.samples(mode)])

    @property
    def total_mutations(self) -> int:
        return self.level_samples[-1].cumulative_mutations if self.level_samples else 0

    def settle_index(self, mode: str | None = None, tol: float | None = None) -> int:
        """First sample index after which consecutive changes of V stay below ``tol``."""
        tol = self.spec.settle_tol if tol is None else tol
        return iterations_to_settle(self.V(mode), tol)

    def last_mutation_step(self) -> int:
        """Time step of the most recent hierarchy change (0 if none happened)."""
        steps = [r.time_step for r in self.trace if r.conflict]
        return max(steps, default=0)


def iterations_to_settle(V, tol: float) -> int:
    V = np.asarray(V, dtype=float)
    if V.size < 2:
        return 0
    big = np.nonzero(np.abs(np.diff(V)) >= tol)[0]
    return int(big[-1] + 1) if big.size else 0


def plate_model(spec: ExperimentSpec) -> AgentModel:
    model = discretize_plate(spec.m_mass, spec.k_spring, spec.c_damp, spec.dt)
    return model.with_input_bounds([-spec.u_bound], [spec.u_bound])


def initial_levels(spec: ExperimentSpec, graph) -> list[int]:
    init = spec.hierarchy_init
    if init == "all_one":
        return [1] * spec.n_agents
    if init == "universal":
        coloring = greedy_color(graph, "direct")
        if coloring.num_colors > spec.N_q:
            raise InitializationError(
                f"universal hierarchy needs {coloring.num_colors} levels, N_q={spec.N_q}")
        return list(coloring.level_of)
    return list(init)


class DempcSystem:
    """All agents of one run plus the bus that connects them."""

    def __init__(self, spec: ExperimentSpec, seed: int):
        self.spec = spec
        self.seed = seed
        self.graph = chain(spec.n_agents)
        self.cost = PlateCost(spec.L, spec.solver.mu_smooth)
        self.model = plate_model(spec)
        self.bus = MessageBus(range(spec.n_agents))
        self.metrics = RunMetrics(seed, spec)
        self.time_step = 0
        self._published: dict[int, NeighborPlan] = {}
        self._pool = ThreadPoolExecutor(spec.workers) if spec.workers > 1 else None
        levels = initial_levels(spec, self.graph)
        self.agents: list[AgentRuntime] = []
        for nbhd in cost_coupling_sets(self.graph, spec.coupling):
            i = nbhd.self_id
            x0 = np.zeros(self.model.n)
            cand = CandidateSolution(
                rollout(self.model, x0, np.zeros((spec.H, self.model.m))),
                StationaryPoint(np.zeros(self.model.n), np.zeros(self.model.m)),
            )
            problems = self._audit(cand, x0)
            if problems:
                raise InitializationError(f"agent {i}: infeasible initial candidate ({problems[0]})")
            self.agents.append(AgentRuntime(
                id=i,
                model=self.model,
                nbhd=nbhd,
                hierarchy=HierarchyState(levels[i], spec.N_q, agent_rng(seed, i)),
                candidate=cand,
                measured_state=x0,
                solver=LocalSolver(self.model, nbhd, self.cost, spec.solver),
            ))

    # -- communication ------------------------------------------------------

    def _send(self, agent: AgentRuntime, kind: str, traj: Trajectory, stat: StationaryPoint):
        payload = _Publish(kind, traj.states.copy(), traj.inputs.copy(),
                           stat.x_s.copy(), stat.u_s.copy())
        self.bus.broadcast(agent.id, payload, agent.nbhd.cost_downstream)
        plan = self._published.get(agent.id)
        if plan is None or kind == CANDIDATE:
            self._published[agent.id] = NeighborPlan(payload.states, payload.inputs,
                                                     payload.x_s, payload.u_s)
        elif kind == STATIONARY:
            self._published[agent.id] = NeighborPlan(plan.states, plan.inputs,
                                                     payload.x_s, payload.u_s)
        else:
            self._published[agent.id] = NeighborPlan(payload.states, payload.inputs,
                                                     plan.x_s, plan.u_s)

    def _deliver(self):
        self.bus.barrier()
        for agent in self.agents:
            for msg in self.bus.receive(agent.id):
                p = msg.payload
                old = agent.assumed.get(msg.sender)
                if p.kind == CANDIDATE or old is None:
                    agent.assumed[msg.sender] = NeighborPlan(p.states, p.inputs, p.x_s, p.u_s)
                elif p.kind == STATIONARY:
                    agent.assumed[msg.sender] = NeighborPlan(old.states, old.inputs, p.x_s, p.u_s)
                else:
                    agent.assumed[msg.sender] = NeighborPlan(p.states, p.inputs, old.x_s, old.u_s)

    def communicate(self):
        """Everyone sends its candidate downstream and adopts what it receives."""
        for agent in self.agents:
            self._send(agent, CANDIDATE, agent.candidate.trajectory, agent.candidate.stationary)
        self._deliver()

    # -- metrics ------------------------------------------------------------

    def global_cost(self) -> float:
        """Exact global cost of the trajectories currently in circulation."""
        total = 0.0
        for agent in self.agents:
            own = self._published[agent.id]
            traj = Trajectory(own.states, own.inputs)
            data = {j: self._published[j] for j in agent.nbhd.cost_upstream}
            total += horizon_cost(agent.nbhd, self.cost, traj, data)
        return total

    def mean_target(self) -> float:
        return float(np.mean([self._published[a.id].x_s[0] for a in self.agents]))

    def mutations(self) -> int:
        return sum(a.hierarchy.mutations for a in self.agents)

    def _sample(self, phase, iteration, level, per_level=True):
        s = Sample(self.time_step, phase, iteration, level, self.global_cost(),
                   self.mutations(), self.mean_target())
        (self.metrics.level_samples if per_level else self.metrics.iteration_samples).append(s)

    def _audit(self, cand: CandidateSolution, x0) -> list[str]:
        t, s = cand.trajectory, cand.stationary
        return audit_candidate(self.model, x0, t.states, t.inputs, s.x_s, s.u_s)

    def audit_all(self, where: str):
        for agent in self.agents:
            problems = self._audit(agent.candidate, agent.measured_state)
            if problems:
                self.metrics.audit_failures.append((where, agent.id, problems))

    # -- negotiation --------------------------------------------------------

    def _solve(self, agent: AgentRuntime, phase: str):
        cand = agent.candidate
        assumed = {j: p.copy() for j, p in agent.assumed.items()}
        try:
            if phase == STATIONARY:
                res = agent.solver.stationary(
                    agent.measured_state, assumed,
                    (cand.trajectory.inputs, cand.stationary.x_s, cand.stationary.u_s))
                opt = CandidateSolution(res.trajectory, res.stationary)
            else:
                res = agent.solver.trajectory(agent.measured_state, cand.stationary, assumed,
                                              cand.trajectory.inputs)
                opt = CandidateSolution(res.trajectory, cand.stationary.copy())
            return opt, assumed, False
        except SolverInfeasible as exc:
            log.warning("agent %d: %s solve infeasible (residual %.2e); keeping candidate",
                        agent.id, phase, exc.best.eq_residual)
            return cand.copy(), assumed, True

    def negotiate(self, phase: str, n_iter: int | None = None) -> list[TraceRecord]:
        n_iter = self.spec.N_p if n_iter is None else n_iter
        records = []
        for p in range(1, n_iter + 1):
            optima, before, retained = {}, {}, {}
            for q in range(1, self.spec.N_q + 1):
                group = [a for a in self.agents if a.hierarchy.level == q]
                if self._pool is not None and len(group) > 1:
                    results = list(self._pool.map(lambda a: self._solve(a, phase), group))
                else:
                    results = [self._solve(a, phase) for a in group]
                for agent, (opt, assumed, kept) in zip(group, results):
                    optima[agent.id], before[agent.id], retained[agent.id] = opt, assumed, kept
                    self._send(agent, phase, opt.trajectory, opt.stationary)
                self._deliver()
                self._sample(phase, p, q)

            for agent in self.agents:
                opt = optima[agent.id]
                report = evaluate_cost_report(agent.nbhd, self.cost, opt.trajectory,
                                              opt.stationary, before[agent.id], agent.assumed)
                conflict = (not retained[agent.id]) and detect_conflict(report, phase)
                level_before = agent.hierarchy.level
                if conflict:
                    agent.hierarchy.mutate()
                elif phase == STATIONARY:
                    agent.candidate = opt.copy()
                else:
                    agent.candidate.trajectory = opt.trajectory.copy()
                hat, breve = ((report.naive_stage, report.informed_stage) if phase == STATIONARY
                              else (report.naive_horizon, report.informed_horizon))
                records.append(TraceRecord(self.time_step, phase, p, agent.id, level_before,
                                           agent.hierarchy.level, conflict, hat, breve,
                                           retained[agent.id]))
            self.communicate()
            self.audit_all(f"t={self.time_step} {phase} p={p}")
            self._sample(phase, p, 0, per_level=False)
        self.metrics.trace.extend(records)
        return records

    def negotiate_stationary(self, n_iter: int | None = None):
        return self.negotiate(STATIONARY, n_iter)

    def negotiate_trajectory(self, n_iter: int | None = None):
        return self.negotiate(TRAJECTORY, n_iter)

    # -- time stepping ------------------------------------------------------

    def start(self):
        self.communicate()
        self._sample("init", 0, 0)
        self._sample("init", 0, 0, per_level=False)

    def time_step_once(self):
        self.time_step += 1
        for agent in self.agents:
            agent.candidate.trajectory = rollout(agent.model, agent.measured_state,
                                                 agent.candidate.trajectory.inputs)
        self.communicate()
        self.negotiate_stationary()
        self.negotiate_trajectory()
        for agent in self.agents:
            apply_and_shift(agent)
        self.audit_all(f"t={self.time_step} shift")
        self.metrics.targets.append(np.array([a.candidate.stationary.x_s[0] for a in self.agents]))
        self.metrics.measured.append(np.array([a.measured_state.copy() for a in self.agents]))

    def finish(self) -> RunMetrics:
        m = self.metrics
        m.final_positions = [float(a.measured_state[0]) for a in self.agents]
        m.final_levels = [a.hierarchy.level for a in self.agents]
        m.final_plans = [(a.measured_state.copy(), a.candidate.trajectory.inputs.copy(),
                          a.candidate.stationary.x_s.copy()) for a in self.agents]
        m.messages_sent = self.bus.stats.messages_sent
        m.bytes_estimate = self.bus.stats.bytes_estimate
        if self._pool is not None:
            self._pool.shutdown()
        return m


def apply_and_shift(agent: AgentRuntime) -> np.ndarray:
    """Apply the first candidate input, then shift the plan and append the stationary input."""
    traj = agent.candidate.trajectory
    u0 = traj.inputs[0].copy()
    agent.measured_state = step(agent.model, agent.measured_state, u0)
    inputs = np.vstack([traj.inputs[1:], agent.candidate.stationary.u_s[None, :]])
    agent.candidate.trajectory = rollout(agent.model, agent.measured_state, inputs)
    return u0


def initialize(spec: ExperimentSpec, seed: int) -> DempcSystem:
    system = DempcSystem(spec, seed)
    system.start()
    return system


def run(spec: ExperimentSpec, seed: int | None = None) -> RunMetrics:
    seed = spec.seeds[0] if seed is None else seed
    system = initialize(spec, seed)
    for _ in range(spec.T):
        system.time_step_once()
    return system.finish()

"""Local solvers for an agent's trajectory and stationary-point problems.

Both problems are single-shooting: the input sequence is the trajectory
decision variable and states come from rolling the model forward, so the
initial condition and the dynamics hold by construction.  The remaining
equalities (terminal state, stationarity) go through an augmented
Lagrangian whose inner problem is box-constrained; finite state bounds are
handled as penalised inequalities and audited afterwards.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize

from .model import AgentModel, StationaryPoint, Trajectory, rollout
from .objective import (
    CostNeighborhood,
    PlateCost,
    horizon_data,
    stationary_data,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    max_outer: int = 8
    max_inner: int = 200
    step_init: float = 1.0
    step_shrink: float = 0.5
    armijo: float = 1e-4
    tol_grad: float = 1e-8
    tol_eq: float = 1e-8
    penalty_init: float = 1.0
    penalty_growth: float = 10.0
    mu_smooth: float = 1e-3
    inner: str = "lbfgsb"  # or "projected_gradient"
    min_improvement: float = 1e-12
    witness: str = "horizon"  # "hold" or "least_change"

    def __post_init__(self):
        for name in ("max_outer", "max_inner", "step_init", "tol_grad", "tol_eq",
                     "penalty_init", "mu_smooth", "armijo"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.step_shrink < 1:
            raise ValueError("step_shrink must lie in (0, 1)")
        if self.penalty_growth <= 1:
            raise ValueError("penalty_growth must exceed 1")
        if self.inner not in ("lbfgsb", "projected_gradient"):
            raise ValueError(f"unknown inner method {self.inner!r}")
        if self.witness not in ("hold", "least_change", "horizon"):
            raise ValueError(f"unknown witness rule {self.witness!r}")


@dataclass
class SolveResult:
    trajectory: Trajectory
    stationary: StationaryPoint | None
    objective: float
    objective_exact: float
    eq_residual: float
    converged: bool
    inner_iterations: int
    moved: bool = True


class SolverInfeasible(RuntimeError):
    """The equality residual could not be driven below tolerance."""

    def __init__(self, best: SolveResult):
        super().__init__(f"equality residual {best.eq_residual:.3e} above tolerance")
        self.best = best


class _ShootingProblem:
    """Shared plumbing: decision vector starts with the flattened input sequence."""

    def __init__(self, model: AgentModel, x0, H: int):
        self.model = model
        self.x0 = np.asarray(x0, dtype=float)
        self.H = H
        self.nu = H * model.m
        n, m = model.n, model.m
        # state sensitivities dx^t/dU, exact and point-independent for linear dynamics
        S = np.zeros((H + 1, n, self.nu))
        for t in range(H):
            S[t + 1] = model.A @ S[t]
            S[t + 1][:, t * m:(t + 1) * m] += model.B
        self.S = S
        self._S2 = S.reshape((H + 1) * n, self.nu)
        free = [self.x0]
        for _ in range(H):
            free.append(model.A @ free[-1])
        self._free = np.concatenate(free)
        lo = np.concatenate([model.x_lo] * H)
        hi = np.concatenate([model.x_hi] * H)
        self._xmask = np.isfinite(lo) | np.isfinite(hi)
        self._xlo, self._xhi = lo, hi

    def tie_sign(self) -> float:
        """Escape direction at an exact tie: away from the neighbours' mean id.

        Zero when the neighbours are balanced around the agent, in which case
        the saddle is left alone and the agent waits for a neighbour to move.
        """
        ids = self.nbhd.upstream if hasattr(self, "nbhd") else ()
        if not ids:
            return 1.0
        return float(np.sign(self.nbhd.self_id - sum(ids) / len(ids)))

    def inputs(self, z):
        return z[:self.nu].reshape(self.H, self.model.m)

    def states(self, z):
        return (self._free + self._S2 @ z[:self.nu]).reshape(self.H + 1, self.model.n)

    def ineq(self, z):
        """State-box violations ``g(z) <= 0`` stacked over steps 1..H."""
        if not self._xmask.any():
            return np.zeros(0), np.zeros((0, z.size))
        X = self.states(z)[1:].reshape(-1)
        SJ = self.S[1:].reshape(-1, self.nu)
        g = np.concatenate([(X - self._xhi)[self._xmask], (self._xlo - X)[self._xmask]])
        Jg = np.zeros((g.size, z.size))
        k = int(self._xmask.sum())
        Jg[:k, :self.nu] = SJ[self._xmask]
        Jg[k:, :self.nu] = -SJ[self._xmask]
        g[~np.isfinite(g)] = -np.inf
        return g, Jg


class TrajectoryProblem(_ShootingProblem):
    """Minimise the cooperative horizon cost and land on a fixed target state."""

    def __init__(self, model, nbhd, cost, x0, target: StationaryPoint, assumed, H):
        super().__init__(model, x0, H)
        self.nbhd, self.cost, self.target = nbhd, cost, target
        self.data = horizon_data(assumed, H)
        self.compiled = cost.compile(nbhd, self.data)
        self.lo = np.tile(model.u_lo, H)
        self.hi = np.tile(model.u_hi, H)

    def f(self, z):
        U = self.inputs(z)
        X = self.states(z)
        val, gx, gu = self.compiled.value_grad(X[:self.H], U)
        grad = gu.reshape(-1) + np.einsum("tn,tnj->j", gx, self.S[:self.H])
        return float(np.sum(val)), grad

    def f_exact(self, z):
        X = self.states(z)
        return float(np.sum(self.compiled.value(X[:self.H], self.inputs(z), smooth=False)))

    def c(self, z):
        return self.states(z)[self.H] - self.target.x_s

    def c_jac(self, z):
        return self.S[self.H].copy()

    def result(self, z, **kw):
        traj = rollout(self.model, self.x0, self.inputs(z))
        return SolveResult(traj, self.target.copy(), **kw)


class StationaryProblem(_ShootingProblem):
    """Choose a reachable stationary pair minimising the cooperative stage cost."""

    def __init__(self, model, nbhd, cost, x0, assumed, H):
        super().__init__(model, x0, H)
        self.nbhd, self.cost = nbhd, cost
        self.data = stationary_data(assumed)
        self.compiled = cost.compile(nbhd, self.data)
        n, m = model.n, model.m
        self.lo = np.concatenate([np.tile(model.u_lo, H), model.x_lo, model.u_lo])
        self.hi = np.concatenate([np.tile(model.u_hi, H), model.x_hi, model.u_hi])
        J = np.zeros((2 * n, self.nu + n + m))
        J[:n, self.nu:self.nu + n] = np.eye(n) - model.A
        J[:n, self.nu + n:] = -model.B
        J[n:, :self.nu] = self.S[H]
        J[n:, self.nu:self.nu + n] = -np.eye(n)
        self._J = J

    def split(self, z):
        n = self.model.n
        return z[self.nu:self.nu + n], z[self.nu + n:]

    def pack(self, U, x_s, u_s):
        return np.concatenate([np.asarray(U, float).reshape(-1), x_s, u_s])

    def f(self, z):
        x_s, u_s = self.split(z)
        val, gx, gu = self.compiled.value_grad(x_s[None, :], u_s[None, :])
        grad = np.zeros_like(z)
        grad[self.nu:self.nu + self.model.n] = gx[0]
        grad[self.nu + self.model.n:] = gu[0]
        return float(val[0]), grad

    def f_exact(self, z):
        x_s, u_s = self.split(z)
        return float(self.compiled.value(x_s[None, :], u_s[None, :], smooth=False)[0])

    def c(self, z):
        x_s, u_s = self.split(z)
        stat = x_s - (self.model.A @ x_s + self.model.B @ u_s)
        return np.concatenate([stat, self.states(z)[self.H] - x_s])

    def c_jac(self, z):
        return self._J.copy()

    def result(self, z, **kw):
        x_s, u_s = self.split(z)
        traj = rollout(self.model, self.x0, self.inputs(z))
        return SolveResult(traj, StationaryPoint(x_s.copy(), u_s.copy()), **kw)


# -- augmented Lagrangian machinery ----------------------------------------

def _merit(problem, z, lam, nu, rho):
    f, g = problem.f(z)
    c = problem.c(z)
    J = problem.c_jac(z)
    val = f + lam @ c + 0.5 * rho * (c @ c)
    grad = g + J.T @ (lam + rho * c)
    gi, Jg = problem.ineq(z)
    if gi.size:
        shifted = np.maximum(0.0, nu + rho * gi)
        val += (shifted @ shifted - nu @ nu) / (2 * rho)
        grad = grad + Jg.T @ shifted
    return val, grad


def _projected_gradient(fun, z, lo, hi, cfg):
    """Armijo backtracking along the projection arc onto the box."""
    val, grad = fun(z)
    it = 0
    for it in range(1, cfg.max_inner + 1):
        pg = np.clip(z - grad, lo, hi) - z
        if np.linalg.norm(pg, np.inf) <= cfg.tol_grad:
            break
        t = cfg.step_init
        while True:
            trial = np.clip(z - t * grad, lo, hi)
            tval, tgrad = fun(trial)
            if tval <= val + cfg.armijo * grad @ (trial - z):
                break
            t *= cfg.step_shrink
            if t < 1e-16:
                return z, it
        z, val, grad = trial, tval, tgrad
    return z, it


def _inner(fun, z, lo, hi, cfg):
    if cfg.inner == "projected_gradient":
        return _projected_gradient(fun, z, lo, hi, cfg)
    bounds = [(None if not np.isfinite(a) else a, None if not np.isfinite(b) else b)
              for a, b in zip(lo, hi)]
    res = minimize(fun, z, jac=True, method="L-BFGS-B", bounds=bounds,
                   options={"maxiter": cfg.max_inner, "gtol": cfg.tol_grad, "ftol": 1e-15})
    start = fun(z)[0]
    # L-BFGS-B may return a worse point when it stops on a failed line search
    if res.fun > start:
        return z, int(res.nit)
    return np.clip(res.x, lo, hi), int(res.nit)


def _restore(problem, z, lo, hi, sweeps=6):
    """Least-norm Gauss-Newton correction of the equalities over free variables."""
    for _ in range(sweeps):
        r = problem.c(z)
        if np.max(np.abs(r), initial=0.0) <= 1e-14:
            break
        free = (z > lo + 1e-12) & (z < hi - 1e-12)
        if not free.any():
            break
        J = problem.c_jac(z)[:, free]
        dz, *_ = np.linalg.lstsq(J, -r, rcond=None)
        z = z.copy()
        z[free] += dz
        z = np.clip(z, lo, hi)
    return z


def _active_null_space(problem, z, lo, hi):
    J = problem.c_jac(z)
    active = (z <= lo + 1e-12) | (z >= hi - 1e-12)
    rows = [J] + [np.eye(z.size)[active]]
    return null_space(np.vstack(rows))


def _escape_saddle(problem, z, lo, hi, tol=1e-7):
    """Step off a feasible stationary point that has negative reduced curvature.

    Symmetric configurations (a plate level with identical neighbours) have
    zero gradient but are not minima; descent alone cannot leave them.  The
    direction is the most negative curvature eigenvector with a fixed sign
    convention so the outcome is deterministic (see ``tie_sign``).
    """
    sign = problem.tie_sign()
    if sign == 0:
        return z
    N = _active_null_space(problem, z, lo, hi)
    if N.shape[1] == 0:
        return z
    f0, g0 = problem.f(z)
    if np.linalg.norm(N.T @ g0) > tol:
        return z
    h = 1e-6
    k = N.shape[1]
    Hr = np.zeros((k, k))
    for a in range(k):
        gp = problem.f(z + h * N[:, a])[1]
        gm = problem.f(z - h * N[:, a])[1]
        Hr[:, a] = N.T @ (gp - gm) / (2 * h)
    Hr = 0.5 * (Hr + Hr.T)
    w, V = np.linalg.eigh(Hr)
    if w[0] >= -1e-8:
        return z
    d = N @ V[:, 0]
    dx = (problem._S2 @ d[:problem.nu])[::problem.model.n]
    ref = dx if np.max(np.abs(dx)) > 1e-12 else d
    if ref[np.argmax(np.abs(ref))] * sign < 0:
        d = -d
    for direction in (d, -d):
        t = 0.05 / np.max(np.abs(direction))
        while t > 1e-10:
            trial = _restore(problem, np.clip(z + t * direction, lo, hi), lo, hi)
            if problem.f(trial)[0] < f0 - 1e-12:
                return trial
            t *= 0.5
    return z


def _residual(problem, z):
    r = np.max(np.abs(problem.c(z)), initial=0.0)
    gi, _ = problem.ineq(z)
    if gi.size:
        r = max(r, float(np.max(gi, initial=0.0)))
    return float(r)


def _augmented_lagrangian(problem, z, lo, hi, cfg):
    lam = np.zeros(problem.c(z).size)
    nu = np.zeros(problem.ineq(z)[0].size)
    rho = cfg.penalty_init
    iters = 0
    for _ in range(cfg.max_outer):
        fun = lambda v: _merit(problem, v, lam, nu, rho)  # noqa: E731
        z, it = _inner(fun, z, lo, hi, cfg)
        iters += it
        # multiplier update uses the unrestored point, where the penalty is informative
        c_raw = problem.c(z)
        gi, _ = problem.ineq(z)
        z = _restore(problem, z, lo, hi)
        if _residual(problem, z) <= cfg.tol_eq and _kkt_small(problem, z, lo, hi, cfg):
            break
        lam = lam + rho * c_raw
        if gi.size:
            nu = np.maximum(0.0, nu + rho * gi)
        rho *= cfg.penalty_growth
    return z, iters


def _solve(problem, z0, cfg: SolverConfig) -> SolveResult:
    """Saddle escape, augmented Lagrangian, then an acceptance test.

    The result is the warm start itself (``moved=False``) unless the smoothed
    objective drops and the exact objective does not rise.
    """
    lo, hi = problem.lo, problem.hi
    z0 = np.clip(np.asarray(z0, dtype=float), lo, hi)
    res0 = _residual(problem, z0)
    warm_feasible = res0 <= cfg.tol_eq
    f0s = problem.f(z0)[0]
    f0e = problem.f_exact(z0)

    def unmoved(iters):
        return problem.result(z0, objective=f0s, objective_exact=f0e, eq_residual=res0,
                              converged=True, inner_iterations=iters, moved=False)

    z = _escape_saddle(problem, z0, lo, hi) if warm_feasible else z0
    if warm_feasible and z is z0 and _kkt_small(problem, z0, lo, hi, cfg):
        return unmoved(0)
    z, iters = _augmented_lagrangian(problem, z, lo, hi, cfg)

    res = _residual(problem, z)
    fs, fe = problem.f(z)[0], problem.f_exact(z)
    improved = (fs < f0s - cfg.min_improvement * max(1.0, abs(f0s))) and fe <= f0e
    if warm_feasible and (res > cfg.tol_eq or not improved):
        return unmoved(iters)
    out = problem.result(z, objective=fs, objective_exact=fe, eq_residual=res,
                         converged=res <= cfg.tol_eq, inner_iterations=iters)
    if not out.converged:
        raise SolverInfeasible(out)
    return out


def _kkt_small(problem, z, lo, hi, cfg):
    """Projected Lagrangian gradient with least-squares multipliers on free variables."""
    _, g = problem.f(z)
    J = problem.c_jac(z)
    gi, Jg = problem.ineq(z)
    if gi.size:
        act = gi > -1e-10
        J = np.vstack([J, Jg[act]])
    free = (z > lo + 1e-12) & (z < hi - 1e-12)
    if J.shape[0] and free.any():
        lam, *_ = np.linalg.lstsq(J[:, free].T, -g[free], rcond=None)
        g = g + J.T @ lam
    pg = np.clip(z - g, lo, hi) - z
    return np.linalg.norm(pg, np.inf) <= max(1e-6, cfg.tol_grad)


# -- public entry points ---------------------------------------------------

def solve_trajectory(model: AgentModel, nbhd: CostNeighborhood, cost: PlateCost, x0,
                     target: StationaryPoint, assumed, warm_start, cfg: SolverConfig = SolverConfig()
                     ) -> SolveResult:
    """Best input sequence from ``x0`` that ends on ``target.x_s`` (neighbours held fixed)."""
    warm = np.asarray(warm_start, dtype=float).reshape(-1, model.m)
    cost = replace(cost, mu=cfg.mu_smooth)
    prob = TrajectoryProblem(model, nbhd, cost, x0, target, assumed, warm.shape[0])
    return _solve(prob, warm.reshape(-1), cfg)


def solve_stationary(model: AgentModel, nbhd: CostNeighborhood, cost: PlateCost, x0,
                     assumed, warm_start, cfg: SolverConfig = SolverConfig()) -> SolveResult:
    """Best stationary pair reachable from ``x0`` within the horizon.

    ``warm_start`` is ``(inputs, x_s, u_s)``.  The returned trajectory is the
    reachability witness.  Any input sequence reaching the pair is optimal
    for the stationary objective, so ``cfg.witness`` picks one: ``horizon``
    (cheapest path under the current assumptions), ``hold`` (closest to the
    constant holding input) or ``least_change`` (closest to the warm start).
    """
    U, x_s, u_s = warm_start
    U = np.asarray(U, dtype=float).reshape(-1, model.m)
    cost = replace(cost, mu=cfg.mu_smooth)
    prob = StationaryProblem(model, nbhd, cost, x0, assumed, U.shape[0])
    z0 = prob.pack(U, np.asarray(x_s, float).reshape(-1), np.asarray(u_s, float).reshape(-1))
    res = _solve(prob, z0, cfg)
    if res.moved and cfg.witness in ("hold", "horizon"):
        res = _hold_witness(prob, res, cfg)
    if res.moved and cfg.witness == "horizon":
        try:
            best = solve_trajectory(model, nbhd, cost, x0, res.stationary, assumed,
                                    res.trajectory.inputs, cfg)
        except SolverInfeasible:
            return res
        res = replace(res, trajectory=best.trajectory)
    return res


def _hold_witness(prob: StationaryProblem, res: SolveResult, cfg: SolverConfig) -> SolveResult:
    """Swap the reachability witness for the one closest to holding ``u_s``.

    The stationary objective ignores the inputs, so the witness is free.  A
    minimum-change correction of the old plan tends to wind up against the
    target first; starting from the holding input pushes toward it at once.
    Falls back to the solver's witness if the projection cannot land.
    """
    st = res.stationary
    z = prob.pack(np.tile(st.u_s, prob.H), st.x_s, st.u_s)
    lo, hi = prob.lo.copy(), prob.hi.copy()
    lo[prob.nu:] = hi[prob.nu:] = z[prob.nu:]  # the pair itself stays put
    z = _restore(prob, z, lo, hi, sweeps=20)
    residual = _residual(prob, z)
    if residual > cfg.tol_eq:
        return res
    return prob.result(z, objective=res.objective, objective_exact=res.objective_exact,
                       eq_residual=residual, converged=True,
                       inner_iterations=res.inner_iterations)


class LocalSolver:
    """Per-agent solver handle; one instance per agent, not shared between threads."""

    def __init__(self, model, nbhd, cost, cfg: SolverConfig = SolverConfig()):
        self.model, self.nbhd, self.cost, self.cfg = model, nbhd, cost, cfg
        self.calls = 0

    def trajectory(self, x0, target, assumed, warm_start) -> SolveResult:
        self.calls += 1
        return solve_trajectory(self.model, self.nbhd, self.cost, x0, target, assumed,
                                warm_start, self.cfg)

    def stationary(self, x0, assumed, warm_start) -> SolveResult:
        self.calls += 1
        return solve_stationary(self.model, self.nbhd, self.cost, x0, assumed, warm_start,
                                self.cfg)


def check_gradient(fun, z, h: float = 1e-6) -> float:
    """Largest relative mismatch between ``fun``'s gradient and central differences.

    ``fun`` returns ``(value, gradient)``.  Errors are relative to
    ``max(1, |gradient|_inf)`` so near-zero components do not blow up.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    z = np.asarray(z, dtype=float)
    _, g = fun(z)
    fd = np.empty_like(z)
    for a in range(z.size):
        e = np.zeros_like(z)
        e[a] = h
        fd[a] = (fun(z + e)[0] - fun(z - e)[0]) / (2 * h)
    scale = max(1.0, float(np.max(np.abs(fd))))
    return float(np.max(np.abs(fd - g)) / scale)

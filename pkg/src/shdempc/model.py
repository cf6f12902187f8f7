"""Discrete-time agent dynamics and the spring-mass-damper plate model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

TOL_DYN = 1e-8


class DimensionError(ValueError):
    """A vector or matrix does not match the model dimensions."""


class SingularDiscretizationError(ValueError):
    """The continuous system matrix is singular, so the ZOH formula is unusable."""


def _vec(v, size: int, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape[0] != size:
        raise DimensionError(f"{name} has length {arr.shape[0]}, expected {size}")
    return arr


@dataclass(frozen=True)
class AgentModel:
    """Linear discrete-time dynamics ``x+ = A x + B u`` with box bounds.

    Bounds default to an unbounded state box and an unbounded input box.
    """

    A: np.ndarray
    B: np.ndarray
    x_lo: np.ndarray = field(default=None)
    x_hi: np.ndarray = field(default=None)
    u_lo: np.ndarray = field(default=None)
    u_hi: np.ndarray = field(default=None)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        n = A.shape[0]
        if A.shape != (n, n) or B.shape[0] != n:
            raise DimensionError(f"incompatible shapes A{A.shape}, B{B.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ValueError("A and B must be finite")
        m = B.shape[1]
        bounds = {}
        for name, size, default in (
            ("x_lo", n, -np.inf),
            ("x_hi", n, np.inf),
            ("u_lo", m, -np.inf),
            ("u_hi", m, np.inf),
        ):
            value = getattr(self, name)
            if value is None:
                bounds[name] = np.full(size, default)
            else:
                bounds[name] = _vec(value, size, name)
        if np.any(bounds["x_lo"] > bounds["x_hi"]) or np.any(bounds["u_lo"] > bounds["u_hi"]):
            raise ValueError("lower bounds must not exceed upper bounds")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        for name, value in bounds.items():
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        A.setflags(write=False)
        B.setflags(write=False)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def step(self, x, u) -> np.ndarray:
        return step(self, x, u)

    def jacobians(self, x, u) -> tuple[np.ndarray, np.ndarray]:
        """Partial derivatives of the transition map; constant for the linear model."""
        return self.A, self.B

    def with_input_bounds(self, u_lo, u_hi) -> "AgentModel":
        return AgentModel(self.A, self.B, self.x_lo, self.x_hi, u_lo, u_hi)


@dataclass
class Trajectory:
    """State sequence ``x^0..x^H`` and input sequence ``u^0..u^{H-1}``."""

    states: np.ndarray
    inputs: np.ndarray
    consistent: bool = False

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        if self.states.shape[0] != self.inputs.shape[0] + 1:
            raise DimensionError(
                f"{self.states.shape[0]} states for {self.inputs.shape[0]} inputs"
            )

    @property
    def horizon(self) -> int:
        return self.inputs.shape[0]

    def copy(self) -> "Trajectory":
        return Trajectory(self.states.copy(), self.inputs.copy(), self.consistent)


@dataclass
class StationaryPoint:
    x_s: np.ndarray
    u_s: np.ndarray

    def __post_init__(self):
        self.x_s = np.asarray(self.x_s, dtype=float).reshape(-1)
        self.u_s = np.asarray(self.u_s, dtype=float).reshape(-1)

    def copy(self) -> "StationaryPoint":
        return StationaryPoint(self.x_s.copy(), self.u_s.copy())


def step(model: AgentModel, x, u) -> np.ndarray:
    """One transition ``A x + B u``; bounds are not applied here."""
    x = _vec(x, model.n, "x")
    u = _vec(u, model.m, "u")
    return model.A @ x + model.B @ u


def rollout(model: AgentModel, x0, inputs) -> Trajectory:
    x0 = _vec(x0, model.n, "x0")
    inputs = np.asarray(inputs, dtype=float).reshape(-1, model.m)
    if inputs.shape[0] < 1:
        raise DimensionError("rollout needs at least one input")
    states = np.empty((inputs.shape[0] + 1, model.n))
    states[0] = x0
    for k, u in enumerate(inputs):
        states[k + 1] = model.A @ states[k] + model.B @ u
    return Trajectory(states, inputs.copy(), consistent=True)


def discretize_plate(m_mass: float, k_spring: float, c_damp: float, dt: float) -> AgentModel:
    """Exact zero-order-hold discretization of a sprung, damped plate.

    The continuous model has state (position, velocity) and a single force
    input.  Input bounds are left open for the caller to fill.
    """
    if m_mass <= 0 or dt <= 0:
        raise ValueError("mass and sampling period must be positive")
    if k_spring <= 0:
        raise SingularDiscretizationError("spring stiffness must be positive")
    Ac = np.array([[0.0, 1.0], [-k_spring / m_mass, -c_damp / m_mass]])
    Bc = np.array([[0.0], [1.0 / m_mass]])
    A = expm(Ac * dt)
    B = np.linalg.solve(Ac, (A - np.eye(2)) @ Bc)
    return AgentModel(A, B)


def is_stationary(model: AgentModel, p: StationaryPoint, tol: float = TOL_DYN) -> bool:
    if tol <= 0:
        raise ValueError("tol must be positive")
    residual = p.x_s - step(model, p.x_s, p.u_s)
    return bool(np.max(np.abs(residual)) <= tol)


def plate_equilibrium(u_s: float, k_spring: float = 1.0) -> StationaryPoint:
    """Rest position held by a constant force ``u_s``."""
    return StationaryPoint(np.array([u_s / k_spring, 0.0]), np.array([u_s]))

"""Constraint auditor that re-checks candidate solutions from raw arrays.

Deliberately does not reuse the solver or rollout code paths.
"""

from __future__ import annotations

import numpy as np

EQ_TOL = 1e-8


def _box(values, lo, hi, label, out):
    values = np.atleast_1d(values)
    if np.any(values < lo) or np.any(values > hi):
        out.append(f"{label} outside bounds")


def audit_candidate(model, x0, states, inputs, x_s, u_s, tol: float = EQ_TOL) -> list[str]:
    """Violations of the trajectory and stationary constraint sets (empty list = feasible).

    Boxes are checked exactly; equalities to ``tol`` in the max-norm.
    """
    A = np.asarray(model.A)
    B = np.asarray(model.B)
    states = np.asarray(states, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    x_s = np.asarray(x_s, dtype=float)
    u_s = np.asarray(u_s, dtype=float)
    problems = []
    H = inputs.shape[0]
    if states.shape[0] != H + 1:
        return [f"{states.shape[0]} states for horizon {H}"]
    if np.max(np.abs(states[0] - np.asarray(x0, dtype=float))) > tol:
        problems.append("initial state differs from measurement")
    for k in range(H):
        nxt = [sum(A[r, c] * states[k][c] for c in range(A.shape[1]))
               + sum(B[r, c] * inputs[k][c] for c in range(B.shape[1]))
               for r in range(A.shape[0])]
        if np.max(np.abs(states[k + 1] - np.array(nxt))) > tol:
            problems.append(f"dynamics violated at step {k}")
        _box(inputs[k], model.u_lo, model.u_hi, f"input {k}", problems)
    for k in range(H + 1):
        _box(states[k], model.x_lo, model.x_hi, f"state {k}", problems)
    _box(x_s, model.x_lo, model.x_hi, "stationary state", problems)
    _box(u_s, model.u_lo, model.u_hi, "stationary input", problems)
    fixed = A @ x_s + B @ u_s
    if np.max(np.abs(x_s - fixed)) > tol:
        problems.append("stationary pair is not a fixed point")
    if np.max(np.abs(states[H] - x_s)) > tol:
        problems.append("terminal state misses stationary target")
    return problems


def rollout_audit(model, x0, inputs, x_s, tol: float = EQ_TOL) -> float:
    """Distance from ``x_s`` after driving ``x0`` with ``inputs`` held fixed.

    Integrates the raw matrices from the measurement alone, so a stored state
    sequence cannot mask a plan that misses its target.
    """
    A = np.asarray(model.A)
    B = np.asarray(model.B)
    x = np.asarray(x0, dtype=float)
    for u in np.asarray(inputs, dtype=float):
        x = np.array([sum(A[r, c] * x[c] for c in range(A.shape[1]))
                      + sum(B[r, c] * u[c] for c in range(B.shape[1]))
                      for r in range(A.shape[0])])
    return float(np.max(np.abs(x - np.asarray(x_s, dtype=float))))

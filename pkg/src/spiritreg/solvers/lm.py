from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LMSettings:
    initial_damping: float = 1e-3
    damping_up: float = 10.0
    damping_down: float = 10.0
    max_iters: int = 100
    rel_cost_tol: float = 1e-8
    grad_tol: float = 1e-14
    max_damping: float = 1e16
    abs_cost_tol: float = 0.0


@dataclass
class LMResult:
    theta: np.ndarray
    cost: float
    converged: bool
    iterations: int
    accepted_steps: int


def levenberg_marquardt(residual_fn, jacobian_fn, theta0, settings=None) -> LMResult:
    """Locally minimize ``0.5 * ||r(theta)||^2`` for real residuals.

    Each trial solves ``(J^T J + mu I) delta = -J^T r``.  A step that lowers
    the cost is accepted and ``mu`` divided by ``damping_down``; otherwise
    ``mu`` is multiplied by ``damping_up`` and the step retried.  Stops on
    a relative cost change below ``rel_cost_tol`` for an accepted step, the
    cost reaching ``abs_cost_tol``, a vanishing gradient, or damping growing
    past ``max_damping`` (no further descent possible).  Running out of
    iterations returns the best point with ``converged=False``.
    """
    s = settings or LMSettings()
    theta = np.array(theta0, dtype=float)
    r = np.asarray(residual_fn(theta), dtype=float)
    cost = 0.5 * float(r @ r)
    mu = s.initial_damping
    accepted = 0
    for it in range(1, s.max_iters + 1):
        J = np.asarray(jacobian_fn(theta), dtype=float)
        g = J.T @ r
        if np.max(np.abs(g)) <= s.grad_tol * max(1.0, cost):
            return LMResult(theta, cost, True, it - 1, accepted)
        JtJ = J.T @ J
        while True:
            try:
                delta = np.linalg.solve(JtJ + mu * np.eye(len(theta)), -g)
            except np.linalg.LinAlgError:
                delta = None
            if delta is not None:
                trial = theta + delta
                r_trial = np.asarray(residual_fn(trial), dtype=float)
                cost_trial = 0.5 * float(r_trial @ r_trial)
                if np.isfinite(cost_trial) and cost_trial < cost:
                    break
            mu *= s.damping_up
            if mu > s.max_damping:
                return LMResult(theta, cost, True, it, accepted)
        rel_change = (cost - cost_trial) / max(cost, np.finfo(float).tiny)
        theta, r, cost = trial, r_trial, cost_trial
        mu /= s.damping_down
        accepted += 1
        if rel_change < s.rel_cost_tol or cost <= s.abs_cost_tol:
            return LMResult(theta, cost, True, it, accepted)
    return LMResult(theta, cost, False, s.max_iters, accepted)

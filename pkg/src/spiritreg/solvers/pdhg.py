"""Primal-dual hybrid gradient with the Malitsky-Pock line search."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .trace import SolverError, SolverTrace


@dataclass
class PDHGLineSearch:
    """``beta`` is the fixed dual/primal step ratio sigma/tau.

    ``mu`` shrinks tau on a failed trial and ``delta`` < 1 is the
    acceptance constant.  ``tau0=None`` uses ``1 / (sqrt(beta) ||A||)``
    from a short power iteration.
    """

    beta: float = 1.0
    mu: float = 0.7
    delta: float = 0.99
    tau0: Optional[float] = None
    max_backtracks: int = 60


def _norm(a) -> float:
    return float(np.sqrt(np.vdot(a, a).real))


def operator_norm(A_forward, A_adjoint, shape, iters=200, rtol=1e-4, seed=0, dtype=complex):
    """Largest singular value of ``A`` by power iteration on ``A^H A``.

    Power iteration stops once successive eigenvalue estimates agree to
    ``rtol`` (relative) or after ``iters`` steps.  The start vector is
    drawn from a fixed seed.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape)
    if np.issubdtype(np.dtype(dtype), np.complexfloating):
        x = x + 1j * rng.standard_normal(shape)
    x /= _norm(x)
    lam = 0.0
    for _ in range(iters):
        z = A_adjoint(A_forward(x))
        lam_new = _norm(z)
        if lam_new == 0:
            return 0.0
        x = z / lam_new
        if abs(lam_new - lam) <= rtol * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return float(np.sqrt(lam))


def pdhg_ls(prox_V, prox_W, A_forward, A_adjoint, x0, max_iters=1000, ls=None, *,
            y0=None, objective=None):
    """Minimize ``V(x) + W(A x)``.

    Parameters
    ----------
    prox_V : callable
        ``(z, t) -> prox_{tV}(z)``.
    prox_W : callable
        ``(z, s) -> prox_{sW}(z)``; the dual step uses the Moreau identity
        ``prox_{sigma W*}(z) = z - sigma * prox_W(z / sigma, 1 / sigma)``.
    A_forward, A_adjoint : callable
    x0 : ndarray
        Primal start; the dual starts at ``y0`` or zero.
    objective : callable, optional
        ``(x, Ax) -> float`` recorded in the trace each iteration.

    Returns
    -------
    x : ndarray
        Last primal iterate.
    trace : SolverTrace
        ``step`` holds tau, ``residual`` the primal change ``||x_k - x_{k-1}||``;
        ``trace.dual`` is the last dual iterate.
    """
    ls = ls or PDHGLineSearch()
    beta = ls.beta
    x_prev = np.array(x0, copy=True)
    Ax_prev = A_forward(x_prev)
    y = np.zeros_like(Ax_prev) if y0 is None else np.array(y0, copy=True)
    ATy = A_adjoint(y)
    tau = ls.tau0
    if tau is None:
        tau = 1.0 / (np.sqrt(beta) * operator_norm(A_forward, A_adjoint, x_prev.shape,
                                                   iters=30, rtol=1e-2))
    theta = 1.0
    trace = SolverTrace()

    def prox_dual(z, sigma):
        return z - sigma * prox_W(z / sigma, 1.0 / sigma)

    for it in range(max_iters):
        x = prox_V(x_prev - tau * ATy, tau)
        Ax = A_forward(x)
        tau_new = tau * np.sqrt(1.0 + theta)
        for _ in range(ls.max_backtracks):
            theta_new = tau_new / tau
            sigma = beta * tau_new
            y_new = prox_dual(y + sigma * (Ax + theta_new * (Ax - Ax_prev)), sigma)
            ATy_new = A_adjoint(y_new)
            lhs = np.sqrt(beta) * tau_new * _norm(ATy_new - ATy)
            if lhs <= ls.delta * _norm(y_new - y):
                break
            tau_new *= ls.mu
            trace.backtracks += 1
        else:
            raise SolverError(f"line search failed at iteration {it + 1}", trace)

        F = objective(x, Ax) if objective is not None else np.nan
        trace.record(F, tau_new, _norm(x - x_prev))
        if not np.all(np.isfinite(x)) or (objective is not None and not np.isfinite(F)):
            raise SolverError(f"non-finite iterate at iteration {it + 1}", trace)
        x_prev, Ax_prev = x, Ax
        y, ATy = y_new, ATy_new
        tau, theta = tau_new, theta_new
    trace.dual = y
    return x_prev, trace

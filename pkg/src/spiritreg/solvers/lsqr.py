"""Matrix-free LSQR (Paige & Saunders, 1982) for complex operators."""
from __future__ import annotations

import numpy as np


def _norm(x):
    return float(np.sqrt(np.vdot(x, x).real))


def lsqr(A_forward, A_adjoint, b, max_iters=1000, atol=1e-10, damp=0.0, x0_shape=None,
         return_info=False):
    """Minimize ``||A x - b||^2 + damp^2 ||x||^2`` starting from ``x = 0``.

    Started from zero, LSQR converges to the minimum-norm least-squares
    solution.  Iteration stops once the estimated relative residual
    ``||r|| / ||b||`` or the normal-equation residual
    ``||A^H r|| / (||A|| ||r||)`` drops below ``atol``.

    Parameters
    ----------
    A_forward, A_adjoint : callable
        ``x -> A x`` and ``y -> A^H y``.
    b : ndarray
        Right-hand side, any shape accepted by ``A_adjoint``.
    x0_shape : tuple, optional
        Shape of the unknown; inferred from ``A_adjoint(b)`` by default.

    Returns
    -------
    x : ndarray
        Solution.  With ``return_info=True``, also a dict holding the
        residual-norm history ``"residuals"``, ``"iterations"`` and ``"stop"``.
    """
    b = np.asarray(b, dtype=np.complex128)
    u = b.copy()
    beta = _norm(u)
    info = {"residuals": [beta], "iterations": 0, "stop": "zero rhs"}
    if beta == 0:
        shape = x0_shape if x0_shape is not None else np.shape(A_adjoint(b))
        x = np.zeros(shape, dtype=np.complex128)
        return (x, info) if return_info else x
    u /= beta
    v = np.asarray(A_adjoint(u), dtype=np.complex128)
    alpha = _norm(v)
    x = np.zeros_like(v)
    if alpha == 0:
        info["stop"] = "b orthogonal to range"
        return (x, info) if return_info else x
    v /= alpha
    w = v.copy()
    phibar, rhobar = beta, alpha
    bnorm = beta
    anorm_sq = alpha**2 + damp**2
    info["stop"] = "max_iters"

    for it in range(1, max_iters + 1):
        u = np.asarray(A_forward(v), dtype=np.complex128) - alpha * u
        beta = _norm(u)
        if beta > 0:
            u /= beta
            v = np.asarray(A_adjoint(u), dtype=np.complex128) - beta * v
            alpha = _norm(v)
            if alpha > 0:
                v /= alpha
        anorm_sq += beta**2 + alpha**2 + damp**2

        # eliminate the damping term, then apply the plane rotation
        rhobar1 = np.hypot(rhobar, damp)
        c1 = rhobar / rhobar1
        phibar = c1 * phibar
        rho = np.hypot(rhobar1, beta)
        c, s = rhobar1 / rho, beta / rho
        theta = s * alpha
        rhobar = -c * alpha
        phi = c * phibar
        phibar = s * phibar

        x = x + (phi / rho) * w
        w = v - (theta / rho) * w

        info["residuals"].append(abs(phibar))
        info["iterations"] = it
        normal_res = abs(phibar * alpha * c)
        if abs(phibar) <= atol * bnorm:
            info["stop"] = "residual"
            break
        if normal_res <= atol * np.sqrt(anorm_sq) * abs(phibar):
            info["stop"] = "normal equations"
            break
        if alpha == 0 or beta == 0:
            info["stop"] = "exact"
            break
    return (x, info) if return_info else x

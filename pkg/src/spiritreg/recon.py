"""The four reconstructions: fully sampled reference, PICS, PICS+SR, PICS+SR+support.

All solvers start from the zero-filled adjoint image ``E^H b``, scaled by
the scalar that best fits the data (any real multiple of ``E^H b`` is an
equally uninformed start; the scaled one is simply closer).
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .calibration import (
    SpiritKernelSet,
    estimate_kappa,
    estimate_kernels,
    extract_acr,
    fit_power_law,
    gamma_weights,
)
from .core import SamplingMask
from .fourier import FrequencyGrid
from .operators import EncodingOperator, SmoothTerm, SpiritOperator, weighted_norm_sq
from .solvers import LineSearch, PDHGLineSearch, fista_ls, lsqr, operator_norm, pdhg_ls
from .wavelet import DEFAULT_LEVELS, dwt2, idwt2, l1_norm, soft_threshold

logger = logging.getLogger(__name__)


def _re_dot(a, b) -> float:
    return float(np.vdot(a, b).real)


def initial_image(encoding: EncodingOperator, b) -> np.ndarray:
    x = encoding.encode_adjoint(b)
    Ax = encoding.encode(x)
    denom = _re_dot(Ax, Ax)
    if denom == 0:
        return x
    return x * (_re_dot(Ax, b) / denom)


def wavelet_l1(nu, levels=DEFAULT_LEVELS):
    """``(value, prox)`` of ``nu ||Psi m||_1``.

    The prox remembers the l1 norm of the coefficients it produced, so
    ``value`` of the image it just returned costs no extra transform.
    """
    last = {"image": None, "value": None}

    def value(m):
        if m is last["image"]:
            return last["value"]
        return nu * l1_norm(dwt2(m, levels))

    def prox(z, t):
        coeffs = soft_threshold(dwt2(z, levels), t * nu)
        image = idwt2(coeffs, levels)
        last["image"], last["value"] = image, nu * l1_norm(coeffs)
        return image

    return value, prox


def recon_reference(kspace_full, maps, max_iters: int = 500, atol: float = 1e-10) -> np.ndarray:
    """Least-squares ``argmin 1/2 ||F S m - b||^2`` from fully sampled data (LSQR)."""
    encoding = EncodingOperator(maps)
    b = np.asarray(kspace_full, dtype=np.complex128)
    if b.ndim == 2:
        b = b[None]
    return lsqr(encoding.encode, encoding.encode_adjoint, b, max_iters=max_iters, atol=atol)


def pics_objective(m, data, maps, mask, nu, levels=DEFAULT_LEVELS) -> float:
    smooth = SmoothTerm(EncodingOperator(maps, mask), data)
    return smooth.value(m) + nu * l1_norm(dwt2(m, levels))


def pics_sr_objective(m, data, maps, mask, kernels, nu, lambda_s, gamma, kappa,
                      levels=DEFAULT_LEVELS) -> float:
    encoding = EncodingOperator(maps, mask)
    spirit = SpiritOperator(maps, kernels, gamma) if kernels is not None else None
    smooth = SmoothTerm(encoding, data, spirit, lambda_s, kappa)
    return smooth.value(m) + nu * l1_norm(dwt2(m, levels))


def _run_fista(smooth: SmoothTerm, nu, max_iters, levels, ls, rel_tol):
    eval_H, prox_H = wavelet_l1(nu, levels)
    x0 = initial_image(smooth.encoding, smooth.b)
    x, trace = fista_ls(smooth.gradient, smooth.value, prox_H, eval_H, x0, max_iters, ls,
                        affine_grad=True, rel_tol=rel_tol)
    trace.final_objective = smooth.value(x) + eval_H(x)
    return x, trace


def recon_pics(data, maps, mask, nu, max_iters: int = 1000, levels: int = DEFAULT_LEVELS,
               ls: LineSearch | None = None, rel_tol=None):
    """FISTA on ``1/2 ||M F S m - b||^2 + nu ||Psi m||_1``.

    Returns ``(image, trace)``; ``trace.final_objective`` is the objective
    recomputed at the returned image.
    """
    smooth = SmoothTerm(EncodingOperator(maps, mask), data)
    return _run_fista(smooth, nu, max_iters, levels, ls, rel_tol)


def recon_pics_sr(data, maps, mask, kernels: SpiritKernelSet, nu, lambda_s, gamma, kappa,
                  max_iters: int = 1000, levels: int = DEFAULT_LEVELS,
                  ls: LineSearch | None = None, rel_tol=None):
    """FISTA on the PICS objective plus ``lambda_s/(2 kappa) sum_c ||R_c m||^2_gamma``.

    With ``lambda_s == 0`` this follows exactly the same arithmetic as
    :func:`recon_pics`.
    """
    encoding = EncodingOperator(maps, mask)
    spirit = SpiritOperator(maps, kernels, gamma) if lambda_s > 0 else None
    smooth = SmoothTerm(encoding, data, spirit, lambda_s, kappa)
    return _run_fista(smooth, nu, max_iters, levels, ls, rel_tol)


def project_outside_support(m, outside, radius):
    """Scale the entries of ``m`` on ``outside`` into the ball of ``radius``."""
    m = np.array(m, copy=True)
    vals = m[outside]
    norm = float(np.linalg.norm(vals))
    if norm > radius:
        m[outside] = vals * (radius / norm) if norm > 0 else 0
    return m


def support_energy(m, support) -> float:
    """Average energy ``||T m||^2 / |outside|`` over pixels outside ``support``."""
    outside = ~np.asarray(support, dtype=bool)
    n = int(outside.sum())
    if n == 0:
        return 0.0
    return float(np.sum(np.abs(m[outside]) ** 2) / n)


def recon_pics_sr_support(data, maps, mask, kernels, nu, lambda_s, gamma, kappa, support,
                          sigma_sq, max_iters: int = 1000, levels: int = DEFAULT_LEVELS,
                          ls: PDHGLineSearch | None = None, identity_scale=None):
    """PDHG on PICS+SR with ``||T m||^2 / |outside| <= sigma_sq`` outside ``support``.

    The problem is split as ``V(m) + W(A m)`` with ``V = nu ||Psi m||_1`` and
    ``A m = (M F S m, R_1 m, ..., R_C m, alpha m)``.  ``W`` is the data
    fidelity on the first block, the weighted SPIRiT penalty on the middle
    blocks and the indicator of ``||outside part|| <= alpha sigma sqrt(n_out)``
    on the last.  ``alpha`` (``identity_scale``, default ``||M F S||``) only
    balances the block norms; it does not change the minimizer.

    The returned image is the final primal iterate projected onto the
    constraint set, so it is always feasible.  ``trace.final_objective`` is
    the objective at that image.
    """
    encoding = EncodingOperator(maps, mask)
    b = encoding.sampling * np.asarray(data, dtype=np.complex128)
    C = encoding.n_coils
    dims = encoding.dims
    support = np.asarray(support, dtype=bool)
    if support.shape != dims:
        raise ValueError(f"support {support.shape} does not match image {dims}")
    if sigma_sq is None or sigma_sq < 0:
        raise ValueError("sigma_sq must be a nonnegative number")
    outside = ~support
    n_out = int(outside.sum())
    use_support = n_out > 0
    if not use_support:
        warnings.warn("support covers every pixel; dropping the constraint", stacklevel=2)
    use_spirit = lambda_s > 0
    spirit = SpiritOperator(maps, kernels, gamma) if use_spirit else None
    srs_weight = lambda_s / kappa
    radius = float(np.sqrt(sigma_sq * n_out))

    if identity_scale is None:
        identity_scale = operator_norm(encoding.encode, encoding.encode_adjoint, dims,
                                       iters=50, rtol=1e-3)
    alpha = float(identity_scale)

    n_blocks = C + (C if use_spirit else 0) + (1 if use_support else 0)
    sl_data = slice(0, C)
    sl_spirit = slice(C, 2 * C) if use_spirit else slice(C, C)
    idx_id = n_blocks - 1

    def A_forward(m):
        out = np.empty((n_blocks,) + dims, dtype=np.complex128)
        out[sl_data] = encoding.encode(m)
        if use_spirit:
            out[sl_spirit] = spirit.residuals(m)
        if use_support:
            out[idx_id] = alpha * m
        return out

    def A_adjoint(y):
        x = encoding.encode_adjoint(y[sl_data])
        if use_spirit:
            x = x + spirit.residuals_adjoint(y[sl_spirit])
        if use_support:
            x = x + alpha * y[idx_id]
        return x

    def prox_W(z, s):
        out = np.empty_like(z)
        out[sl_data] = (z[sl_data] + s * b) / (1.0 + s)
        if use_spirit:
            out[sl_spirit] = z[sl_spirit] / (1.0 + s * srs_weight * spirit.gamma)
        if use_support:
            out[idx_id] = project_outside_support(z[idx_id], outside, alpha * radius)
        return out

    eval_V, prox_V = wavelet_l1(nu, levels)

    def smooth_value(Ax):
        r = Ax[sl_data] - b
        val = 0.5 * _re_dot(r, r)
        if use_spirit:
            val += 0.5 * srs_weight * weighted_norm_sq(Ax[sl_spirit], spirit.gamma)
        return val

    def objective(x, Ax):
        return eval_V(x) + smooth_value(Ax)

    x0 = initial_image(encoding, b)
    x, trace = pdhg_ls(prox_V, prox_W, A_forward, A_adjoint, x0, max_iters, ls,
                       objective=objective)
    if use_support:
        x = project_outside_support(x, outside, radius)
    trace.final_objective = objective(x, A_forward(x))
    return x, trace


def estimate_sigma_sq(reference, region) -> float:
    """Sample variance of ``reference`` over ``region`` (a slice tuple or boolean mask)."""
    vals = np.asarray(reference)[region]
    if vals.size < 2:
        raise ValueError("need at least two pixels to estimate a variance")
    return float(np.var(vals, ddof=1))


@dataclass
class Calibration:
    """Everything derived from the undersampled data before reconstruction."""

    kernels: SpiritKernelSet
    power_law: object
    gamma: np.ndarray
    kappa: float


def calibrate(data, maps, mask: SamplingMask, kernel_radius: int = 2, damping: float = 0.0,
              kappa_iters: int = 200) -> Calibration:
    """Kernels from the ACR, power-law fit, gamma weights and kappa."""
    acr = extract_acr(data, mask)
    kernels = estimate_kernels(acr, kernel_radius, damping=damping)
    fit = fit_power_law(data, mask)
    gamma = gamma_weights(fit, FrequencyGrid(mask.shape))
    encoding = EncodingOperator(maps, mask)
    spirit = SpiritOperator(maps, kernels, gamma)
    kappa = estimate_kappa(spirit.blocks(), (encoding.encode, encoding.encode_adjoint),
                           encoding.dims, iters=kappa_iters)
    return Calibration(kernels, fit, gamma, kappa)

"""SPIRiT kernel calibration, power-law spectrum fit, gamma weights and kappa.

Kernel convention: ``kernels[l, c, i, j]`` is the tap applied to coil ``c``
at offset ``d = (i - R, j - R)`` when predicting coil ``l``::

    (W k)_l[p] = sum_c sum_d kernels[l, c, d] * k_c[p + d]

Inside the ACR this is evaluated without wrap-around at points where the
whole kernel fits; on the full grid the indices wrap (circular convolution).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import SamplingMask
from .fourier import FrequencyGrid, fftshift2
from .solvers import LMSettings, levenberg_marquardt, lsqr, operator_norm

logger = logging.getLogger(__name__)

DEFAULT_KERNEL_RADIUS = 2
DC_FIT_RADIUS = 4.0


class CalibrationError(ValueError):
    pass


class PowerLawFitError(RuntimeError):
    def __init__(self, message, best):
        self.best = best
        super().__init__(message)


@dataclass
class SpiritKernelSet:
    kernels: np.ndarray  # (C, C, 2R+1, 2R+1)

    def __post_init__(self):
        k = np.asarray(self.kernels, dtype=np.complex128)
        if k.ndim != 4 or k.shape[0] != k.shape[1] or k.shape[2] != k.shape[3] or k.shape[2] % 2 == 0:
            raise ValueError(f"kernel array must be (C, C, 2R+1, 2R+1), got {k.shape}")
        if not np.all(np.isfinite(k)):
            raise ValueError("kernel taps must be finite")
        R = k.shape[2] // 2
        if np.any(k[np.arange(k.shape[0]), np.arange(k.shape[0]), R, R] != 0):
            raise ValueError("target-coil center taps must be zero")
        self.kernels = k

    @property
    def radius(self) -> int:
        return self.kernels.shape[2] // 2

    @property
    def n_coils(self) -> int:
        return self.kernels.shape[0]

    def offsets(self):
        R = self.radius
        for i in range(2 * R + 1):
            for j in range(2 * R + 1):
                yield i, j, i - R, j - R


def extract_acr(kspace: np.ndarray, mask: SamplingMask) -> np.ndarray:
    """Cut the centered ACR block out of each coil's (unshifted) spectrum."""
    if not mask.has_acr:
        raise CalibrationError("mask carries no ACR metadata")
    kspace = np.asarray(kspace)
    if kspace.shape[-2:] != mask.shape:
        raise ValueError(f"k-space {kspace.shape} does not match mask {mask.shape}")
    s0, s1 = mask.acr_slices()
    return np.ascontiguousarray(fftshift2(kspace)[..., s0, s1])


class _InteriorSystem:
    """Taps ``w[c, i, j]`` to predictions at ACR interior points.

    The system is never handed to a dense solver; ``forward``/``adjoint``
    apply it through the gathered ACR patches (one row per interior point,
    one column per free tap), which is what LSQR iterates on.
    """

    def __init__(self, acr, radius, target):
        self.acr = acr
        self.R = radius
        self.K = 2 * radius + 1
        self.n0 = acr.shape[1] - 2 * radius
        self.n1 = acr.shape[2] - 2 * radius
        patches = np.lib.stride_tricks.sliding_window_view(
            acr, (self.n0, self.n1), axis=(1, 2))
        self.free = np.ones((acr.shape[0], self.K, self.K), dtype=bool)
        self.free[target, radius, radius] = False
        cols = patches[self.free]
        self._cols = np.ascontiguousarray(cols.reshape(cols.shape[0], -1).T)
        self._cols_h = np.ascontiguousarray(self._cols.conj().T)

    def forward(self, w):
        return (self._cols @ w[self.free]).reshape(self.n0, self.n1)

    def adjoint(self, y):
        w = np.zeros(self.free.shape, dtype=np.complex128)
        w[self.free] = self._cols_h @ y.ravel()
        return w

    def target_values(self, target):
        R = self.R
        return self.acr[target, R : R + self.n0, R : R + self.n1]


def estimate_kernels(acr: np.ndarray, kernel_radius: int = DEFAULT_KERNEL_RADIUS,
                     damping: float = 0.0, max_iters: int = 5000,
                     atol: float = 1e-12) -> SpiritKernelSet:
    """Least-squares SPIRiT kernels from a fully sampled ACR block.

    For each target coil the taps minimize the prediction error over ACR
    points where the whole kernel window lies inside the ACR, with the
    target coil's center tap held at zero.  Each system is solved by LSQR
    on its forward/adjoint action.  ``damping > 0`` adds Tikhonov
    regularization ``damping^2 ||w||^2``.

    Raises
    ------
    CalibrationError
        If the ACR is not larger than the kernel, or if a system has fewer
        equations than unknowns and ``damping`` is zero.
    """
    acr = np.asarray(acr, dtype=np.complex128)
    if acr.ndim != 3 or acr.shape[0] < 1:
        raise CalibrationError("ACR must be a (C, a0, a1) array with at least one coil")
    C, a0, a1 = acr.shape
    K = 2 * kernel_radius + 1
    if a0 <= K - 1 or a1 <= K - 1 or kernel_radius < 0:
        raise CalibrationError(f"ACR {a0}x{a1} is not larger than the {K}x{K} kernel")
    n_eq = (a0 - 2 * kernel_radius) * (a1 - 2 * kernel_radius)
    n_unknown = C * K * K - 1
    if n_eq < n_unknown and damping == 0:
        raise CalibrationError(
            f"underdetermined calibration: {n_eq} interior equations for "
            f"{n_unknown} unknowns per target coil (enlarge the ACR, shrink the "
            f"kernel, or set damping)"
        )
    kernels = np.zeros((C, C, K, K), dtype=np.complex128)
    for target in range(C):
        system = _InteriorSystem(acr, kernel_radius, target)
        rhs = system.target_values(target)
        w = lsqr(system.forward, system.adjoint, rhs, max_iters=max_iters, atol=atol,
                 damp=damping)
        w[~system.free] = 0
        kernels[target] = w
    return SpiritKernelSet(kernels)


def calibration_residual(kernels: SpiritKernelSet, acr: np.ndarray) -> np.ndarray:
    """Per-target prediction error over the ACR interior, shape (C, n0, n1)."""
    acr = np.asarray(acr, dtype=np.complex128)
    out = []
    for target in range(kernels.n_coils):
        system = _InteriorSystem(acr, kernels.radius, target)
        out.append(system.forward(kernels.kernels[target]) - system.target_values(target))
    return np.stack(out)


def apply_kernels(kernels: SpiritKernelSet, kspace: np.ndarray) -> np.ndarray:
    """Circular k-space convolution ``(W k)_l = sum_c kernels[l, c] (*) k_c``."""
    kspace = np.asarray(kspace, dtype=np.complex128)
    if kspace.ndim != 3 or kspace.shape[0] != kernels.n_coils:
        raise ValueError(f"k-space {kspace.shape} does not match {kernels.n_coils} coils")
    out = np.zeros_like(kspace)
    for i, j, di, dj in kernels.offsets():
        taps = kernels.kernels[:, :, i, j]
        if not np.any(taps):
            continue
        shifted = np.roll(kspace, (-di, -dj), axis=(-2, -1))
        out += np.einsum("lc,cuv->luv", taps, shifted)
    return out


def image_domain_kernels(kernels: SpiritKernelSet, dims) -> np.ndarray:
    """Image-space multipliers equivalent to :func:`apply_kernels`.

    Returns ``G`` of shape (C, C, U, V) with
    ``apply_kernels(kernels, dft2(y))[l] == dft2(sum_c G[l, c] * y[c])``,
    i.e. ``G[l, c](u, v) = sum_d w[l, c, d] exp(-i 2 pi (d0 u / U + d1 v / V))``.
    """
    U, V = dims
    u = np.arange(U)
    v = np.arange(V)
    G = np.zeros((kernels.n_coils, kernels.n_coils, U, V), dtype=np.complex128)
    for i, j, di, dj in kernels.offsets():
        taps = kernels.kernels[:, :, i, j]
        if not np.any(taps):
            continue
        phase = np.outer(np.exp(-2j * np.pi * di * u / U), np.exp(-2j * np.pi * dj * v / V))
        G += taps[:, :, None, None] * phase
    return G


@dataclass
class PowerLawFit:
    """``P(k) = max(m_L |k|^-p_L, m_H |k|^-p_H)`` for ``|k| > 0``, ``P(0) = p0``."""

    m_L: float
    p_L: float
    m_H: float
    p_H: float
    p0: float

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        with np.errstate(divide="ignore"):
            val = np.maximum(self.m_L * k**-self.p_L, self.m_H * k**-self.p_H)
        return np.where(k > 0, val, self.p0)

    def to_dict(self):
        return {"m_L": self.m_L, "p_L": self.p_L, "m_H": self.m_H, "p_H": self.p_H, "p0": self.p0}


def collected_magnitudes(kspace: np.ndarray, mask: SamplingMask):
    """``(|k|, |b(k)|)`` over collected frequencies; ``|b|`` is the coil root-sum-square."""
    kspace = np.asarray(kspace)
    if kspace.ndim == 2:
        kspace = kspace[None]
    rss = np.sqrt(np.sum(np.abs(fftshift2(kspace)) ** 2, axis=0))
    radius = FrequencyGrid(mask.shape).radius
    sel = mask.indicator
    return radius[sel], rss[sel]


def _loglog_line(k, y):
    good = y > 0
    if np.count_nonzero(good) < 2 or np.ptp(k[good]) == 0:
        return None
    slope, intercept = np.polyfit(np.log(k[good]), np.log(y[good]), 1)
    return float(np.exp(intercept)), float(max(-slope, 1e-3))


def _power_law_model(theta, k):
    m_L, p_L, m_H, p_H = np.exp(theta)
    low = m_L * k**-p_L
    high = m_H * k**-p_H
    return low, high


def fit_power_law(kspace: np.ndarray, mask: SamplingMask, dc_radius: float = DC_FIT_RADIUS,
                  settings: LMSettings | None = None, n_starts: int = 3) -> PowerLawFit:
    """Fit the two-branch power law to the collected k-space magnitudes.

    The four parameters are optimized in log space (keeping them positive)
    by Levenberg-Marquardt, from the best few of a set of log-log line fits
    split at different radii.  ``p0`` is the intercept of a straight-line
    fit of ``|b|`` against ``|k|`` over ``0 < |k| <= dc_radius``.
    """
    radius, mag = collected_magnitudes(kspace, mask)
    pos = radius > 0
    k, y = radius[pos], mag[pos]
    if np.unique(k).size < 8:
        raise ValueError("power-law fit needs at least 8 distinct collected |k| values")
    log_k = np.log(k)

    def residual(theta):
        low, high = _power_law_model(theta, k)
        return np.maximum(low, high) - y

    def jacobian(theta):
        _, p_L, _, p_H = np.exp(theta)
        low, high = _power_law_model(theta, k)
        use_low = low >= high
        J = np.zeros((k.size, 4))
        J[use_low, 0] = low[use_low]
        J[use_low, 1] = -low[use_low] * log_k[use_low] * p_L
        J[~use_low, 2] = high[~use_low]
        J[~use_low, 3] = -high[~use_low] * log_k[~use_low] * p_H
        return J

    starts = []
    uk = np.unique(k)
    splits = np.geomspace(uk[1], uk[-2], 16)
    for s in splits:
        lo_fit = _loglog_line(k[k <= s], y[k <= s])
        hi_fit = _loglog_line(k[k > s], y[k > s])
        if lo_fit is None or hi_fit is None:
            continue
        theta = np.log([lo_fit[0], lo_fit[1], hi_fit[0], hi_fit[1]])
        r = residual(theta)
        starts.append((0.5 * float(r @ r), theta))
    if not starts:
        raise ValueError("could not initialize the power-law fit")
    starts.sort(key=lambda s: s[0])

    if settings is None:
        settings = LMSettings(abs_cost_tol=1e-24 * 0.5 * float(y @ y))
    best = None
    for _, theta0 in starts[:n_starts]:
        result = levenberg_marquardt(residual, jacobian, theta0, settings)
        if best is None or result.cost < best.cost:
            best = result
    m_L, p_L, m_H, p_H = (float(v) for v in np.exp(best.theta))

    near = (radius > 0) & (radius <= dc_radius)
    p0 = None
    if np.unique(radius[near]).size >= 2:
        slope, intercept = np.polyfit(radius[near], mag[near], 1)
        p0 = float(intercept)
    if p0 is None or not p0 > 0:
        fallback = mag[near].max() if np.any(near) else float(np.max(mag))
        logger.warning("DC line fit gave %s; using %g instead", p0, fallback)
        p0 = float(fallback)
    fit = PowerLawFit(m_L, p_L, m_H, p_H, p0)
    if not best.converged:
        raise PowerLawFitError(
            f"Levenberg-Marquardt did not converge in {best.iterations} iterations", fit
        )
    return fit


def gamma_weights(fit: PowerLawFit, grid: FrequencyGrid) -> np.ndarray:
    """Inverse fitted spectrum as per-frequency weights (centered layout)."""
    k = grid.radius
    with np.errstate(divide="ignore"):
        g = np.minimum(k**fit.p_L / fit.m_L, k**fit.p_H / fit.m_H)
    g = np.where(k > 0, g, 1.0 / fit.p0)
    return g


def estimate_kappa(numerator_ops, denominator_op, shape, iters=200, rtol=1e-4, seed=0) -> float:
    """``sqrt(||diag(R_1, ..., R_C)|| / ||E||)`` with 2-norms from power iteration.

    ``numerator_ops`` is a sequence of ``(forward, adjoint)`` pairs forming
    the block-diagonal operator, whose norm is the largest block norm;
    ``denominator_op`` is one ``(forward, adjoint)`` pair.  All blocks act
    on arrays of ``shape``.
    """
    num = max(operator_norm(f, a, shape, iters=iters, rtol=rtol, seed=seed)
              for f, a in numerator_ops)
    den = operator_norm(*denominator_op, shape, iters=iters, rtol=rtol, seed=seed)
    if den == 0:
        raise ZeroDivisionError("encoding operator has zero norm")
    return float(np.sqrt(num / den))

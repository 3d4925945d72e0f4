"""Encoding and SPIRiT-residual operators and the smooth part of the objective.

Shapes: images are ``(U, V)``, coil stacks and k-space ``(C, U, V)``.
k-space produced here is in unshifted DFT layout; masks and ``gamma`` are
accepted in centered layout and shifted once at construction.
"""
from __future__ import annotations

import numpy as np

from .calibration import SpiritKernelSet, apply_kernels, image_domain_kernels
from .core import SamplingMask
from .fourier import dft2, dft2_adjoint, ifftshift2


def _re_dot(a, b) -> float:
    return float(np.vdot(a, b).real)


def weighted_norm_sq(x, gamma) -> float:
    """``sum_i gamma_i |x_i|^2``."""
    x = np.asarray(x)
    gamma = np.asarray(gamma)
    if x.shape[-gamma.ndim:] != gamma.shape and x.shape != gamma.shape:
        raise ValueError(f"shape mismatch: x {x.shape}, gamma {gamma.shape}")
    return float(np.sum(gamma * (x.real**2 + x.imag**2)))


def _mask_indicator(mask, dims):
    if isinstance(mask, SamplingMask):
        ind = mask.indicator
    else:
        ind = np.asarray(mask, dtype=bool)
    if ind.shape != tuple(dims):
        raise ValueError(f"mask {ind.shape} does not match image {tuple(dims)}")
    return ifftshift2(ind)


class EncodingOperator:
    """``E = M F S``: coil weighting, unnormalized DFT, then sampling."""

    def __init__(self, maps, mask=None):
        self.maps = np.asarray(maps, dtype=np.complex128)
        if self.maps.ndim == 2:
            self.maps = self.maps[None]
        if self.maps.ndim != 3 or not np.all(np.isfinite(self.maps)):
            raise ValueError("maps must be a finite (C, U, V) stack")
        self.dims = self.maps.shape[1:]
        if mask is None:
            self.sampling = np.ones(self.dims, dtype=bool)
        else:
            self.sampling = _mask_indicator(mask, self.dims)

    @property
    def n_coils(self) -> int:
        return self.maps.shape[0]

    def _check_image(self, m):
        if np.shape(m) != self.dims:
            raise ValueError(f"image shape {np.shape(m)} does not match maps {self.dims}")

    def encode(self, m):
        self._check_image(m)
        return self.sampling * dft2(self.maps * m)

    def encode_adjoint(self, y):
        y = np.asarray(y)
        if y.shape != self.maps.shape:
            raise ValueError(f"data shape {y.shape} does not match {self.maps.shape}")
        return np.sum(np.conj(self.maps) * dft2_adjoint(self.sampling * y), axis=0)

    def normal(self, m):
        return self.encode_adjoint(self.encode(m))

    __call__ = encode


class SpiritOperator:
    """Per-coil SPIRiT residuals ``R_c m = (W^(c) - I) F S^(c) m``.

    ``W^(c)`` predicts coil ``c`` from all coils' k-space.  Because circular
    k-space convolution is image-space multiplication, each residual is
    evaluated as ``F (E_c m)`` with the effective map
    ``E_c = sum_l G[c, l] S_l - S_c`` (see ``image_domain_kernels``).
    """

    def __init__(self, maps, kernels: SpiritKernelSet, gamma=None):
        self.maps = np.asarray(maps, dtype=np.complex128)
        if self.maps.ndim == 2:
            self.maps = self.maps[None]
        if kernels is None:
            raise ValueError("SPIRiT residuals need calibrated kernels")
        if kernels.n_coils != self.maps.shape[0]:
            raise ValueError(f"{kernels.n_coils}-coil kernels for {self.maps.shape[0]} maps")
        self.kernels = kernels
        self.dims = self.maps.shape[1:]
        G = image_domain_kernels(kernels, self.dims)
        self.effective_maps = np.einsum("lcuv,cuv->luv", G, self.maps) - self.maps
        if gamma is None:
            self.gamma = np.ones(self.dims)
        else:
            gamma = np.asarray(gamma, dtype=float)
            if gamma.shape != self.dims:
                raise ValueError(f"gamma {gamma.shape} does not match image {self.dims}")
            if not np.all(gamma > 0):
                raise ValueError("gamma must be strictly positive")
            self.gamma = ifftshift2(gamma)

    @property
    def n_coils(self) -> int:
        return self.maps.shape[0]

    def spirit_residual(self, c, m):
        return dft2(self.effective_maps[c] * m)

    def spirit_residual_adjoint(self, c, y):
        return np.conj(self.effective_maps[c]) * dft2_adjoint(y)

    def residuals(self, m):
        """All ``C`` residuals stacked, shape (C, U, V)."""
        return dft2(self.effective_maps * m)

    def residuals_adjoint(self, y):
        return np.sum(np.conj(self.effective_maps) * dft2_adjoint(y), axis=0)

    def literal_residuals(self, m):
        """Same as :meth:`residuals` but through explicit k-space convolution."""
        k = dft2(self.maps * m)
        return apply_kernels(self.kernels, k) - k

    def weighted_energy(self, m) -> float:
        """``sum_c ||R_c m||^2_gamma``."""
        return weighted_norm_sq(self.residuals(m), self.gamma)

    def blocks(self):
        """``(forward, adjoint)`` pairs for each coil's residual operator."""
        return [
            (lambda m, c=c: self.spirit_residual(c, m),
             lambda y, c=c: self.spirit_residual_adjoint(c, y))
            for c in range(self.n_coils)
        ]


class SmoothTerm:
    """``G(m) = 1/2 ||E m - b||^2 + lambda_s/(2 kappa) sum_c ||R_c m||^2_gamma``.

    The gradient is evaluated in one batched FFT pass over the stacked
    coil maps and effective maps; with ``lambda_s == 0`` (or no SPIRiT
    operator) the SPIRiT part is skipped entirely.
    """

    def __init__(self, encoding: EncodingOperator, b, spirit: SpiritOperator | None = None,
                 lambda_s: float = 0.0, kappa: float = 1.0):
        self.encoding = encoding
        self.b = encoding.sampling * np.asarray(b, dtype=np.complex128)
        self.spirit = spirit
        self.lambda_s = float(lambda_s)
        self.kappa = float(kappa)
        if self.lambda_s < 0 or not self.kappa > 0:
            raise ValueError("need lambda_s >= 0 and kappa > 0")
        self.use_spirit = spirit is not None and self.lambda_s > 0
        self.adjoint_b = encoding.encode_adjoint(self.b)
        if self.use_spirit:
            C = encoding.n_coils
            self._stack = np.concatenate([encoding.maps, spirit.effective_maps])
            self._weights = np.concatenate([
                np.broadcast_to(encoding.sampling, (C,) + encoding.dims),
                np.broadcast_to((self.lambda_s / self.kappa) * spirit.gamma,
                                (spirit.n_coils,) + encoding.dims),
            ])
        else:
            self._stack = encoding.maps
            self._weights = encoding.sampling
        self._stack_conj = np.conj(self._stack)

    @property
    def srs_weight(self) -> float:
        return self.lambda_s / self.kappa

    def normal(self, m):
        """``E^H E m + (lambda_s/kappa) sum_c R_c^H Gamma R_c m``."""
        k = dft2(self._stack * m)
        k *= self._weights
        z = dft2_adjoint(k)
        z *= self._stack_conj
        return z.sum(axis=0)

    def gradient(self, m):
        return self.normal(m) - self.adjoint_b

    def data_value(self, m) -> float:
        r = self.encoding.encode(m) - self.b
        return 0.5 * _re_dot(r, r)

    def spirit_value(self, m) -> float:
        if not self.use_spirit:
            return 0.0
        return 0.5 * self.srs_weight * self.spirit.weighted_energy(m)

    def value(self, m) -> float:
        return self.data_value(m) + self.spirit_value(m)

    __call__ = value


def smooth_gradient(m, b, encoding: EncodingOperator, spirit: SpiritOperator | None = None,
                    lambda_s: float = 0.0, kappa: float = 1.0):
    """Gradient of the smooth objective term at ``m`` (see :class:`SmoothTerm`)."""
    return SmoothTerm(encoding, b, spirit, lambda_s, kappa).gradient(m)

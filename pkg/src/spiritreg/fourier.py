"""Two-dimensional DFT with the unnormalized forward convention.

``dft2`` computes

    y[ku, kv] = sum_u sum_v x[u, v] exp(-i 2 pi (ku u / U + kv v / V))

with output indexed ``(ku, kv)`` in ``[0, U) x [0, V)`` (DC at index 0), and
``idft2`` carries the ``1/(UV)`` factor.  The adjoint of ``dft2`` is
therefore ``U*V*idft2``.  Both act on the last two axes, so coil stacks of
shape ``(C, U, V)`` transform in one call.

Masks, ACR blocks, gamma weights and ``|k|`` live in *centered* layout
(DC at ``(U//2, V//2)``); convert with :func:`ifftshift2` before
multiplying against ``dft2`` output.

FFTs run through pyFFTW (``FFTW_ESTIMATE`` plans, one thread, which are
bitwise repeatable) when it is installed, and through ``scipy.fft``
otherwise.  Set ``SPIRITREG_FFT=scipy`` to force the scipy backend.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.fft

AXES = (-2, -1)


def _select_backend():
    if os.environ.get("SPIRITREG_FFT", "").lower() == "scipy":
        return "scipy", scipy.fft, {}
    try:
        import pyfftw
        import pyfftw.interfaces.scipy_fft as fftw_fft
    except ImportError:
        return "scipy", scipy.fft, {}
    pyfftw.interfaces.cache.enable()
    pyfftw.interfaces.cache.set_keepalive_time(60.0)
    return "pyfftw", fftw_fft, {"planner_effort": "FFTW_ESTIMATE", "workers": 1}


BACKEND, _fft, _FFT_KW = _select_backend()


def dft2(x: np.ndarray) -> np.ndarray:
    return _fft.fft2(np.asarray(x, dtype=np.complex128), axes=AXES, **_FFT_KW)


def idft2(y: np.ndarray) -> np.ndarray:
    return _fft.ifft2(np.asarray(y, dtype=np.complex128), axes=AXES, **_FFT_KW)


def dft2_adjoint(y: np.ndarray) -> np.ndarray:
    """``F^H y``, i.e. ``U*V*idft2(y)`` (unnormalized inverse)."""
    return _fft.ifft2(np.asarray(y, dtype=np.complex128), axes=AXES, norm="forward",
                      **_FFT_KW)


def fftshift2(a: np.ndarray) -> np.ndarray:
    return np.fft.fftshift(a, axes=AXES)


def ifftshift2(a: np.ndarray) -> np.ndarray:
    return np.fft.ifftshift(a, axes=AXES)


def dft2_naive(x: np.ndarray) -> np.ndarray:
    """Direct double sum of the forward DFT; O(N^2), for testing only."""
    x = np.asarray(x, dtype=np.complex128)
    U, V = x.shape
    u = np.arange(U)
    v = np.arange(V)
    out = np.zeros((U, V), dtype=np.complex128)
    for ku in range(U):
        for kv in range(V):
            phase = np.exp(-2j * np.pi * (ku * u[:, None] / U + kv * v[None, :] / V))
            out[ku, kv] = np.sum(x * phase)
    return out


@dataclass(frozen=True)
class FrequencyGrid:
    """Centered integer frequency coordinates of a ``U x V`` grid."""

    dims: tuple[int, int]

    @property
    def ku(self) -> np.ndarray:
        U, V = self.dims
        return np.broadcast_to((np.arange(U) - U // 2)[:, None], (U, V))

    @property
    def kv(self) -> np.ndarray:
        U, V = self.dims
        return np.broadcast_to((np.arange(V) - V // 2)[None, :], (U, V))

    @property
    def radius(self) -> np.ndarray:
        """``|k|`` per grid point, centered layout."""
        return np.hypot(self.ku, self.kv)

    @property
    def dc_index(self) -> tuple[int, int]:
        return self.dims[0] // 2, self.dims[1] // 2

    @property
    def max_radius(self) -> float:
        return float(self.radius.max())

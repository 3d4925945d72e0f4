"""Orthogonal Daubechies-4 wavelet transform with periodic boundaries.

The four-tap D4 filter pair is applied separably along both image axes.
Coefficients are kept in the usual nested layout: after each level the
approximation occupies the top-left quarter of the current block and the
detail bands fill the remaining three quarters.  Real and imaginary parts
are transformed independently (the filters are real).
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import sparse

_S3 = np.sqrt(3.0)
DEC_LO = np.array([1 + _S3, 3 + _S3, 3 - _S3, 1 - _S3]) / (4 * np.sqrt(2.0))
DEC_HI = np.array([(-1) ** k * DEC_LO[3 - k] for k in range(4)])

DEFAULT_LEVELS = 4


def check_levels(dims, levels: int) -> None:
    if levels < 0:
        raise ValueError("levels must be nonnegative")
    step = 2**levels
    for d in dims:
        if d % step:
            raise ValueError(f"dims {tuple(dims)} not divisible by 2**{levels}={step}")


@lru_cache(maxsize=None)
def analysis_matrix(n: int) -> sparse.csr_matrix:
    """One level of the periodic D4 analysis on length ``n``: ``[lo; hi] = A x``.

    Row ``r < n/2`` holds ``h[k]`` at column ``(2r + k) mod n``; row
    ``n/2 + r`` the same with ``g``.  ``A`` is orthogonal.
    """
    if n % 2:
        raise ValueError("length must be even")
    half = n // 2
    r = np.repeat(np.arange(half), 4)
    k = np.tile(np.arange(4), half)
    cols = (2 * r + k) % n
    rows = np.concatenate([r, r + half])
    vals = np.concatenate([DEC_LO[k], DEC_HI[k]])
    return sparse.csr_matrix((vals, (rows, np.concatenate([cols, cols]))), shape=(n, n))


@lru_cache(maxsize=None)
def _synthesis_matrix(n: int) -> sparse.csr_matrix:
    return analysis_matrix(n).T.tocsr()


def _apply_levels(x, levels, forward):
    out = np.array(x, dtype=np.result_type(x.dtype, np.float64), copy=True)
    if out.ndim > 2:
        for idx in np.ndindex(out.shape[:-2]):
            out[idx] = _apply_levels(out[idx], levels, forward)
        return out
    U, V = out.shape
    order = range(levels) if forward else reversed(range(levels))
    for lev in order:
        u, v = U >> lev, V >> lev
        if forward:
            Au, Av = analysis_matrix(u), analysis_matrix(v)
        else:
            Au, Av = _synthesis_matrix(u), _synthesis_matrix(v)
        block = Au @ out[:u, :v]
        out[:u, :v] = (Av @ block.T).T
    return out


def dwt2(x: np.ndarray, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """Multilevel 2D D4 transform of the last two axes of ``x``."""
    x = np.asarray(x)
    check_levels(x.shape[-2:], levels)
    return _apply_levels(x, levels, True)


def idwt2(w: np.ndarray, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """Inverse (and adjoint) of :func:`dwt2`."""
    w = np.asarray(w)
    check_levels(w.shape[-2:], levels)
    return _apply_levels(w, levels, False)


def soft_threshold(w: np.ndarray, t: float) -> np.ndarray:
    """Complex soft-thresholding, the prox of ``t * ||.||_1``.

    Each entry ``z`` maps to ``z * max(|z| - t, 0) / |z|`` (and 0 to 0).
    """
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    mag = np.abs(w)
    scale = np.maximum(mag - t, 0.0)
    np.divide(scale, mag, out=scale, where=mag > 0)
    return w * scale


def l1_norm(w: np.ndarray) -> float:
    return float(np.sum(np.abs(w)))


def coarsest_shape(dims, levels: int = DEFAULT_LEVELS) -> tuple[int, int]:
    check_levels(dims, levels)
    return dims[0] >> levels, dims[1] >> levels

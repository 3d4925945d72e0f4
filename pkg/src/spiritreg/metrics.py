"""Image quality metrics: SSIM on magnitudes, PSNR on complex images."""
from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate1d

WINDOW = 11
SIGMA = 1.5
K1 = 0.01
K2 = 0.03


def gaussian_window(size: int = WINDOW, sigma: float = SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2
    w = np.exp(-(r**2) / (2 * sigma**2))
    return w / w.sum()


def _local_mean(a, w):
    pad = (len(w) - 1) // 2
    out = correlate1d(correlate1d(a, w, axis=0, mode="reflect"), w, axis=1, mode="reflect")
    return out[pad:-pad, pad:-pad]


def ssim_map(x, ref, data_range=None) -> np.ndarray:
    """Local SSIM over every full 11x11 Gaussian window (valid region only)."""
    x = np.asarray(x, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if x.shape != ref.shape or x.ndim != 2:
        raise ValueError(f"ssim needs two equal-shape 2D images, got {x.shape} and {ref.shape}")
    if min(x.shape) < WINDOW:
        raise ValueError(f"images must be at least {WINDOW}x{WINDOW}")
    L = float(np.max(ref)) if data_range is None else float(data_range)
    if L <= 0:
        L = 1.0
    c1, c2 = (K1 * L) ** 2, (K2 * L) ** 2
    w = gaussian_window()
    mu_x, mu_y = _local_mean(x, w), _local_mean(ref, w)
    sxx = _local_mean(x * x, w) - mu_x**2
    syy = _local_mean(ref * ref, w) - mu_y**2
    sxy = _local_mean(x * ref, w) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (sxx + syy + c2)
    return num / den


def ssim(x_mag, ref_mag, data_range=None) -> float:
    """Mean SSIM, 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03.

    ``data_range`` defaults to ``max(ref_mag)``.
    """
    x_mag = np.asarray(x_mag)
    ref_mag = np.asarray(ref_mag)
    if np.array_equal(x_mag, ref_mag):
        return 1.0
    return float(np.mean(ssim_map(x_mag, ref_mag, data_range)))


def psnr_complex(x, ref) -> float:
    """``20 log10(max|ref| / RMSE)`` over complex differences; ``inf`` if identical."""
    x = np.asarray(x, dtype=np.complex128)
    ref = np.asarray(ref, dtype=np.complex128)
    if x.shape != ref.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {ref.shape}")
    peak = float(np.max(np.abs(ref)))
    if peak == 0:
        raise ValueError("reference image is all zero")
    rmse = float(np.sqrt(np.mean(np.abs(x - ref) ** 2)))
    if rmse == 0:
        return float("inf")
    return 20.0 * np.log10(peak / rmse)


def evaluate(x, ref) -> dict:
    """Both metrics against the reference, as written by the ``eval`` command."""
    return {"ssim": ssim(np.abs(x), np.abs(ref)), "psnr_db": psnr_complex(x, ref)}

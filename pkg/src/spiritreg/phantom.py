"""Synthetic images, coil sensitivities and simulated acquisitions."""
from __future__ import annotations

import numpy as np

from .fourier import dft2

# Modified Shepp-Logan (Toft): intensity, semi-axes a, b, center x0, y0, tilt (deg)
MODIFIED_SHEPP_LOGAN = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
)


def pixel_coordinates(dims):
    """Pixel-center coordinates in [-1, 1], ``x`` along columns, ``y`` up the rows."""
    U, V = dims
    x = (np.arange(V) - (V - 1) / 2) * (2.0 / V)
    y = ((U - 1) / 2 - np.arange(U)) * (2.0 / U)
    return np.meshgrid(x, y, indexing="xy")


def ellipse_inside(x, y, a, b, x0, y0, phi_deg):
    phi = np.deg2rad(phi_deg)
    xr = (x - x0) * np.cos(phi) + (y - y0) * np.sin(phi)
    yr = -(x - x0) * np.sin(phi) + (y - y0) * np.cos(phi)
    return (xr / a) ** 2 + (yr / b) ** 2 <= 1.0


def shepp_logan(dims, ellipses=MODIFIED_SHEPP_LOGAN) -> np.ndarray:
    """Modified Shepp-Logan phantom with values in [0, 1]."""
    dims = tuple(int(d) for d in dims)
    if min(dims) < 32:
        raise ValueError("phantom needs at least 32 pixels per side")
    x, y = pixel_coordinates(dims)
    img = np.zeros(dims)
    for rho, a, b, x0, y0, phi in ellipses:
        img[ellipse_inside(x, y, a, b, x0, y0, phi)] += rho
    return np.clip(img, 0.0, 1.0)


def birdcage_maps(dims, n_coils: int, coil_radius: float = 2.0, decay: float = 1.0) -> np.ndarray:
    """Smooth complex sensitivities of ``n_coils`` loops on a circle around the FOV.

    Coil ``c`` sits at angle ``2 pi c / C`` on a circle of ``coil_radius``
    (the FOV spans [-1, 1]).  Magnitude falls off as
    ``1 / (1 + (dist / decay)^2)^(1/2)`` and the phase follows the polar
    angle seen from the coil.  The stack is scaled so the largest
    root-sum-square value is 1.
    """
    if n_coils < 1:
        raise ValueError("need at least one coil")
    x, y = pixel_coordinates(dims)
    maps = np.zeros((n_coils,) + tuple(dims), dtype=np.complex128)
    for c in range(n_coils):
        ang = 2 * np.pi * c / n_coils
        dx = x - coil_radius * np.cos(ang)
        dy = y - coil_radius * np.sin(ang)
        dist = np.hypot(dx, dy)
        mag = 1.0 / np.sqrt(1.0 + (dist / decay) ** 2)
        maps[c] = mag * np.exp(1j * (np.arctan2(dy, dx) - ang))
    rss = np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))
    return maps / rss.max()


def root_sum_square(maps) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))


def simulate_kspace(img, maps, noise_std: float = 0.0, seed: int = 0) -> np.ndarray:
    """Fully sampled coil spectra ``dft2(S_c img)`` plus complex Gaussian noise.

    ``noise_std`` is the standard deviation of the real and of the
    imaginary part separately.
    """
    img = np.asarray(img)
    maps = np.asarray(maps)
    if maps.shape[1:] != img.shape:
        raise ValueError(f"maps {maps.shape} do not match image {img.shape}")
    k = dft2(maps * img)
    if noise_std > 0:
        rng = np.random.default_rng(seed)
        k = k + noise_std * (rng.standard_normal(k.shape) + 1j * rng.standard_normal(k.shape))
    return k


def noise_std_for_snr(img, maps, snr_db: float) -> float:
    """Per-component noise std giving ``20 log10(||signal|| / ||noise||) = snr_db``."""
    signal = dft2(np.asarray(maps) * np.asarray(img))
    rms = np.sqrt(np.mean(np.abs(signal) ** 2))
    return float(rms * 10 ** (-snr_db / 20) / np.sqrt(2))


def exact_pilp_phantom(dims):
    """Two coils whose sensitivities satisfy linear predictability exactly.

    ``S1 = 1`` and ``S2(u, v) = exp(i 2 pi u / U)``, so coil 2's spectrum is
    coil 1's circularly shifted by one sample along the first axis, and
    each coil is predicted exactly by a single tap on the other.
    """
    dims = tuple(int(d) for d in dims)
    if dims[0] % 2 or dims[1] % 2:
        raise ValueError("exact PILP phantom needs even dims")
    img = shepp_logan(dims).astype(np.complex128)
    u = np.arange(dims[0])[:, None]
    maps = np.stack([
        np.ones(dims, dtype=np.complex128),
        np.broadcast_to(np.exp(2j * np.pi * u / dims[0]), dims).astype(np.complex128),
    ])
    return img, maps


def support_mask(img, threshold: float = 0.0) -> np.ndarray:
    """Pixels where ``|img| > threshold``."""
    return np.abs(img) > threshold

"""Variable-density Poisson-disc sampling masks with a fully sampled ACR.

Exterior samples are placed by dart throwing over a seeded random
permutation of the grid.  A candidate ``p`` is rejected when an already
accepted exterior sample ``q`` lies closer than ``r(|(p+q)/2|)`` where

    r(|k|) = r0 * (1 + alpha * |k| / |k|_max)

so the pattern thins out towards high frequencies.  ``r0`` is calibrated by
bisection until the achieved fraction is within ``FRACTION_TOL`` of the
request.
"""
from __future__ import annotations

import math

import numba
import numpy as np

from .core import SamplingMask
from .fourier import FrequencyGrid
from .wavelet import check_levels

DEFAULT_ALPHA = 3.0
FRACTION_TOL = 0.01
MAX_TRIALS = 20


class MaskGenerationError(ValueError):
    def __init__(self, message, achieved=None):
        self.achieved = achieved
        super().__init__(message)


def default_acr_size(dims, levels: int = 4) -> tuple[int, int]:
    """Size of the coarsest wavelet scale, used as the ACR side lengths."""
    check_levels(dims, levels)
    return dims[0] >> levels, dims[1] >> levels


def centered_acr_origin(dims, acr_size) -> tuple[int, int]:
    return dims[0] // 2 - acr_size[0] // 2, dims[1] // 2 - acr_size[1] // 2


@numba.njit(cache=True)
def _throw_darts(order, acr, r0, alpha, kmax):
    U, V = acr.shape
    c0, c1 = U // 2, V // 2
    accepted = np.zeros((U, V), dtype=np.bool_)
    rwin = int(math.ceil(r0 * (1.0 + alpha)))
    for flat in order:
        i = flat // V
        j = flat % V
        if acr[i, j]:
            continue
        ki = i - c0
        kj = j - c1
        ok = True
        for ii in range(max(0, i - rwin), min(U, i + rwin + 1)):
            di = ii - i
            for jj in range(max(0, j - rwin), min(V, j + rwin + 1)):
                if not accepted[ii, jj]:
                    continue
                dj = jj - j
                mi = ki + 0.5 * di
                mj = kj + 0.5 * dj
                r = r0 * (1.0 + alpha * math.sqrt(mi * mi + mj * mj) / kmax)
                if di * di + dj * dj < r * r:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            accepted[i, j] = True
    return accepted


def poisson_disc_exterior(dims, acr, r0, alpha, seed) -> np.ndarray:
    """Dart-throwing pass for a fixed ``r0``; returns the exterior samples only."""
    rng = np.random.Generator(np.random.Philox(seed))
    order = rng.permutation(dims[0] * dims[1]).astype(np.int64)
    kmax = FrequencyGrid(tuple(dims)).max_radius
    return _throw_darts(order, acr, float(r0), float(alpha), float(kmax))


def min_distance_radius(k_mid, r0, alpha, kmax):
    return r0 * (1.0 + alpha * np.asarray(k_mid) / kmax)


def generate_mask(
    dims,
    target_fraction: float,
    acr_size=None,
    seed: int = 0,
    alpha: float = DEFAULT_ALPHA,
    levels: int = 4,
) -> SamplingMask:
    """Variable-density Poisson-disc mask hitting ``target_fraction`` to within 0.01.

    The chosen radius scale is stored on the returned mask as ``mask.r0``.
    """
    dims = tuple(int(d) for d in dims)
    if acr_size is None:
        acr_size = default_acr_size(dims, levels)
    acr_size = tuple(int(a) for a in acr_size)
    if acr_size[0] > dims[0] or acr_size[1] > dims[1]:
        raise ValueError(f"ACR {acr_size} does not fit in {dims}")
    if not 0 < target_fraction <= 1:
        raise ValueError("target_fraction must lie in (0, 1]")
    total = dims[0] * dims[1]
    acr_fraction = acr_size[0] * acr_size[1] / total
    if target_fraction < acr_fraction:
        raise ValueError(
            f"target fraction {target_fraction} below ACR fraction {acr_fraction:.4f}"
        )
    origin = centered_acr_origin(dims, acr_size)
    if target_fraction == 1.0:
        mask = SamplingMask(np.ones(dims, dtype=bool), origin, acr_size)
        mask.r0 = 0.0
        return mask

    acr = np.zeros(dims, dtype=bool)
    acr[origin[0] : origin[0] + acr_size[0], origin[1] : origin[1] + acr_size[1]] = True
    n_acr = int(acr.sum())

    # fraction decreases with r0; bisect in log space
    lo, hi = math.log(0.05), math.log(max(dims) / 4.0)
    best = None
    for _ in range(MAX_TRIALS):
        r0 = math.exp(0.5 * (lo + hi))
        exterior = poisson_disc_exterior(dims, acr, r0, alpha, seed)
        frac = (n_acr + int(exterior.sum())) / total
        err = frac - target_fraction
        if best is None or abs(err) < abs(best[0] - target_fraction):
            best = (frac, r0, exterior)
        if abs(err) <= FRACTION_TOL / 5:
            break
        if err > 0:
            lo = math.log(r0)
        else:
            hi = math.log(r0)
    frac, r0, exterior = best
    if abs(frac - target_fraction) > FRACTION_TOL:
        raise MaskGenerationError(
            f"could not reach fraction {target_fraction}; best achieved {frac:.4f}", frac
        )
    mask = SamplingMask(exterior | acr, origin, acr_size)
    mask.r0 = r0
    mask.alpha = alpha
    return mask

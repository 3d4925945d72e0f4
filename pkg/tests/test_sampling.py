import numpy as np
import pytest

from spiritreg.fourier import FrequencyGrid
from spiritreg.sampling import (
    MaskGenerationError,
    default_acr_size,
    generate_mask,
    min_distance_radius,
)


def test_default_acr_size():
    assert default_acr_size((256, 256), 4) == (16, 16)
    assert default_acr_size((128, 128), 4) == (8, 8)
    assert default_acr_size((64, 64), 1) == (32, 32)
    with pytest.raises(ValueError):
        default_acr_size((100, 100), 4)


def test_full_fraction():
    mask = generate_mask((32, 32), 1.0, (8, 8))
    assert mask.indicator.all()


def test_256_fraction_and_determinism():
    a = generate_mask((256, 256), 0.2, (16, 16), seed=7)
    b = generate_mask((256, 256), 0.2, (16, 16), seed=7)
    assert 0.19 <= a.fraction <= 0.21
    s0, s1 = a.acr_slices()
    assert a.indicator[s0, s1].all()
    assert np.array_equal(a.indicator, b.indicator)
    c = generate_mask((256, 256), 0.2, (16, 16), seed=8)
    assert not np.array_equal(a.indicator, c.indicator)


@pytest.mark.parametrize("fraction", [0.15, 0.2, 0.25, 0.3, 0.35])
def test_fraction_tolerance(fraction):
    mask = generate_mask((128, 128), fraction, (24, 24), seed=3)
    assert abs(mask.fraction - fraction) <= 0.01
    s0, s1 = mask.acr_slices()
    assert mask.indicator[s0, s1].all()


def test_acr_is_centered():
    mask = generate_mask((64, 64), 0.3, (8, 8), seed=1)
    assert mask.acr_origin == (28, 28)
    assert mask.indicator[32, 32]


def test_min_distance_exhaustive():
    dims = (64, 64)
    mask = generate_mask(dims, 0.3, (8, 8), seed=11)
    acr = np.zeros(dims, bool)
    s0, s1 = mask.acr_slices()
    acr[s0, s1] = True
    pts = np.argwhere(mask.indicator & ~acr).astype(float)
    c = np.array([dims[0] // 2, dims[1] // 2], float)
    kmax = FrequencyGrid(dims).max_radius
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(np.sum(diff**2, axis=-1))
    mid = 0.5 * (pts[:, None, :] + pts[None, :, :]) - c
    r = min_distance_radius(np.sqrt(np.sum(mid**2, axis=-1)), mask.r0, mask.alpha, kmax)
    off_diag = ~np.eye(len(pts), dtype=bool)
    assert np.all(dist[off_diag] >= r[off_diag] - 1e-12)


def test_density_decreases_outwards():
    mask = generate_mask((128, 128), 0.25, (8, 8), seed=0)
    r = FrequencyGrid((128, 128)).radius
    inner = mask.indicator[(r > 10) & (r < 30)].mean()
    outer = mask.indicator[r > 50].mean()
    assert inner > outer


def test_errors():
    with pytest.raises(ValueError):
        generate_mask((32, 32), 0.01, (16, 16))  # below the ACR fraction
    with pytest.raises(ValueError):
        generate_mask((32, 32), 0.5, (40, 40))
    # on a 6x6 grid fractions come in steps of 1/36; aim halfway between two
    with pytest.raises(MaskGenerationError) as info:
        generate_mask((6, 6), 18.5 / 36, (2, 2), seed=0)
    assert abs(info.value.achieved - 18.5 / 36) > 0.01


def test_dense_fractions_reachable():
    mask = generate_mask((32, 32), 0.8, (4, 4), seed=0)
    assert abs(mask.fraction - 0.8) <= 0.01

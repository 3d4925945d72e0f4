import numpy as np
import pytest

from spiritreg import phantom, recon, sampling


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def rel_err(a, b):
    return float(np.linalg.norm(np.ravel(a) - np.ravel(b)) / np.linalg.norm(np.ravel(b)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240614)


@pytest.fixture(scope="session")
def small_problem():
    """32x32 Shepp-Logan, 4 coils, 40% mask with a 12x12 ACR, 3x3 kernels."""
    dims = (32, 32)
    img = phantom.shepp_logan(dims).astype(complex)
    maps = phantom.birdcage_maps(dims, 4)
    kspace = phantom.simulate_kspace(img, maps, phantom.noise_std_for_snr(img, maps, 30), seed=5)
    mask = sampling.generate_mask(dims, 0.4, (12, 12), seed=2)
    data = kspace * np.fft.ifftshift(mask.indicator)
    cal = recon.calibrate(data, maps, mask, kernel_radius=1)
    return {"dims": dims, "img": img, "maps": maps, "kspace": kspace, "mask": mask,
            "data": data, "cal": cal}


# Acceptance results, filled by tests/test_acceptance.py and echoed at the end of the run.
ACCEPTANCE: list[tuple[str, str, str]] = []


def record(criterion: str, ok: bool | None, detail: str = "") -> bool | None:
    status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
    ACCEPTANCE.append((criterion, status, detail))
    print(f"ACCEPTANCE {criterion}: {status} {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, status, detail in ACCEPTANCE:
        terminalreporter.write_line(f"criterion {criterion}: {status}  {detail}")

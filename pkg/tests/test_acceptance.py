"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Criteria 6 and 8 share one module-scoped run of the full hyperparameter grid
on the 128x128 phantom (about a quarter of an hour on one core).  Criterion 9
needs an external knee dataset and is skipped unless ``SPIRITREG_KNEE_DIR``
points at a directory holding ``kspace.mra`` (fully sampled, per coil) and
``maps.mra``.
"""
import os
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.ndimage import binary_dilation

from spiritreg import metrics, phantom, recon, sampling
from spiritreg.calibration import (
    PowerLawFit,
    SpiritKernelSet,
    apply_kernels,
    estimate_kernels,
    extract_acr,
    fit_power_law,
)
from spiritreg.core import SamplingMask, read_array
from spiritreg.fourier import FrequencyGrid, dft2, ifftshift2
from spiritreg.operators import EncodingOperator, SpiritOperator, smooth_gradient, weighted_norm_sq
from spiritreg.sampling import centered_acr_origin
from spiritreg.solvers import fista_ls, lsqr, pdhg_ls
from spiritreg.wavelet import dwt2, idwt2, soft_threshold

from conftest import crandn, record, rel_err

SWEEP_NUS = (0.01, 0.1, 1.0, 10.0)
SWEEP_LAMBDAS = (0.1, 0.5, 1.0, 2.0, 4.0, 5.0, 10.0)
FRACTIONS = (0.2, 0.25, 0.3)


def _gap(fwd, adj, x, y):
    lhs = np.vdot(y, fwd(x))
    return abs(lhs - np.vdot(adj(y), x)) / abs(lhs)


def test_criterion_1_adjoints():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    dims, C = (32, 32), 4
    maps = phantom.birdcage_maps(dims, C)
    mask = sampling.generate_mask(dims, 0.4, (12, 12), seed=1)
    E = EncodingOperator(maps, mask)
    w = 0.3 * crandn(rng, C, C, 5, 5)
    for c in range(C):
        w[c, c, 2, 2] = 0
    S = SpiritOperator(maps, SpiritKernelSet(w), rng.uniform(0.1, 3.0, dims))
    worst = {"encode": 0.0, "spirit_residual": 0.0, "dwt2": 0.0}
    for _ in range(50):
        m, y = crandn(rng, *dims), crandn(rng, C, *dims)
        worst["encode"] = max(worst["encode"], _gap(E.encode, E.encode_adjoint, m, y))
        c = int(rng.integers(C))
        worst["spirit_residual"] = max(worst["spirit_residual"], _gap(
            lambda x: S.spirit_residual(c, x), lambda z: S.spirit_residual_adjoint(c, z), m, y[c]))
        worst["dwt2"] = max(worst["dwt2"], _gap(dwt2, idwt2, m, crandn(rng, *dims)))
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-10 and elapsed < 10
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f"; {elapsed:.2f} s"
    assert record("1 operator adjoints", ok, detail)


def test_criterion_2_gradient(small_problem):
    t0 = time.perf_counter()
    p, cal = small_problem, small_problem["cal"]
    rng = np.random.default_rng(2)
    E = EncodingOperator(p["maps"], p["mask"])
    S = SpiritOperator(p["maps"], cal.kernels, cal.gamma)
    b = E.sampling * p["data"]
    lam, kappa = 2.0, cal.kappa

    def G(m):
        r = E.encode(m) - b
        return 0.5 * np.vdot(r, r).real + lam / (2 * kappa) * weighted_norm_sq(S.residuals(m),
                                                                               S.gamma)

    m = p["img"] + 0.1 * crandn(rng, *p["dims"])
    g = smooth_gradient(m, b, E, S, lam, kappa)
    h, worst = 1e-5, 0.0
    for _ in range(20):
        d = crandn(rng, *p["dims"])
        fd = (G(m + h * d) - G(m - h * d)) / (2 * h)
        directional = np.vdot(g, d).real
        worst = max(worst, abs(fd - directional) / abs(directional))
    elapsed = time.perf_counter() - t0
    assert record("2 gradient vs finite differences", worst <= 1e-6 and elapsed < 30,
                  f"worst rel {worst:.1e}; {elapsed:.2f} s")


def test_criterion_3_pilp_calibration():
    dims = (32, 32)
    img, maps = phantom.exact_pilp_phantom(dims)
    kspace = dft2(maps * img)
    mask = sampling.generate_mask(dims, 0.4, (16, 16), seed=1, levels=1)
    acr = extract_acr(kspace * np.fft.ifftshift(mask.indicator), mask)
    kernels = estimate_kernels(acr, kernel_radius=2)
    R = kernels.radius
    inner = (slice(None), slice(R, -R), slice(R, -R))
    acr_res = np.linalg.norm((apply_kernels(kernels, acr) - acr)[inner]) / np.linalg.norm(acr[inner])
    res = SpiritOperator(maps, kernels).residuals(img)
    img_res = np.linalg.norm(res) / np.linalg.norm(kspace)
    ok = kernels.kernels.shape[-1] == 5 and acr_res <= 1e-8 and img_res <= 1e-8
    assert record("3 exact-PILP calibration", ok,
                  f"ACR residual {acr_res:.1e}, residual at truth {img_res:.1e}")


def test_criterion_4_power_law():
    dims = (64, 64)
    grid = FrequencyGrid(dims)
    truth = PowerLawFit(10.0, 2.0, 1.0, 0.5, 50.0)
    mag = truth(grid.radius)
    mag[grid.dc_index] = 50.0
    ind = np.ones(dims, dtype=bool)
    mask = SamplingMask(ind, centered_acr_origin(dims, dims), dims)
    fit = fit_power_law(ifftshift2(mag.astype(complex))[None], mask)
    errs = {n: abs(getattr(fit, n) - v) / v
            for n, v in (("m_L", 10), ("p_L", 2), ("m_H", 1), ("p_H", 0.5))}
    assert record("4 power-law recovery", max(errs.values()) <= 1e-4,
                  ", ".join(f"{k} {v:.1e}" for k, v in errs.items()))


def test_criterion_5_solvers():
    rng = np.random.default_rng(5)
    # FISTA on a dense 8x8 least-squares problem
    A = crandn(rng, 8, 8) + 4 * np.eye(8)
    b = crandn(rng, 8)
    grad = lambda x: A.conj().T @ (A @ x - b)
    value = lambda x: 0.5 * np.linalg.norm(A @ x - b) ** 2
    x, _ = fista_ls(grad, value, lambda z, t: z, lambda x: 0.0, np.zeros(8, complex), 500)
    fista_err = rel_err(x, np.linalg.solve(A.conj().T @ A, A.conj().T @ b))
    # LSQR, full rank and rank deficient
    B = crandn(rng, 20, 12)
    c = crandn(rng, 20)
    lsqr_full = rel_err(lsqr(lambda x: B @ x, lambda y: B.conj().T @ y, c), np.linalg.pinv(B) @ c)
    D = crandn(rng, 20, 5) @ crandn(rng, 5, 12)
    lsqr_def = rel_err(lsqr(lambda x: D @ x, lambda y: D.conj().T @ y, c, max_iters=500),
                       np.linalg.pinv(D, rcond=1e-10) @ c)
    # PDHG vs FISTA on a shared lasso instance
    M = crandn(rng, 30, 20)
    y = crandn(rng, 30)
    nu = 1.5
    obj = lambda x: 0.5 * np.linalg.norm(M @ x - y) ** 2 + nu * np.sum(np.abs(x))
    prox_V = lambda z, t: soft_threshold(z, t * nu)
    x_pd, _ = pdhg_ls(prox_V, lambda z, s: (z + s * y) / (1 + s), lambda x: M @ x,
                      lambda r: M.conj().T @ r, np.zeros(20, complex), 3000)
    x_fi, _ = fista_ls(lambda x: M.conj().T @ (M @ x - y),
                       lambda x: 0.5 * np.linalg.norm(M @ x - y) ** 2,
                       prox_V, lambda x: nu * np.sum(np.abs(x)), np.zeros(20, complex), 3000)
    gap = abs(obj(x_pd) - obj(x_fi)) / obj(x_fi)
    ok = fista_err <= 1e-8 and lsqr_full <= 1e-6 and lsqr_def <= 1e-6 and gap <= 1e-6
    assert record("5 solver oracles", ok,
                  f"fista {fista_err:.1e}, lsqr {lsqr_full:.1e}/{lsqr_def:.1e}, "
                  f"pdhg-fista gap {gap:.1e}")


# ------------------------------------------------------------ phantom study


def _phantom_problem(N=128, C=8):
    img = phantom.shepp_logan((N, N)).astype(complex)
    maps = phantom.birdcage_maps((N, N), C)
    noise_std = phantom.noise_std_for_snr(img, maps, 30.0)
    kspace = phantom.simulate_kspace(img, maps, noise_std, seed=1)
    return img, maps, kspace, recon.recon_reference(kspace, maps)


def _run(kind, data, maps, mask, cal, nu, lam, ref, iters):
    if kind == "pics":
        x, tr = recon.recon_pics(data, maps, mask, nu, iters)
    else:
        x, tr = recon.recon_pics_sr(data, maps, mask, cal.kernels, nu, lam, cal.gamma,
                                    cal.kappa, iters)
    obj = tr.objective
    return {"nu": nu, "lambda_s": lam, **metrics.evaluate(x, ref),
            "change_500_1000": abs(obj[499] - obj[999]) / abs(obj[999])}


@pytest.fixture(scope="module")
def phantom_study():
    t0 = time.perf_counter()
    img, maps, kspace, ref = _phantom_problem()
    study = {"img": img, "maps": maps, "kspace": kspace, "reference": ref, "fractions": {}}
    for frac in FRACTIONS:
        mask = sampling.generate_mask(img.shape, frac, (24, 24), seed=3)
        data = kspace * np.fft.ifftshift(mask.indicator)
        cal = recon.calibrate(data, maps, mask)
        pics, sr = [], []
        for nu in SWEEP_NUS:
            pics.append(_run("pics", data, maps, mask, cal, nu, 0.0, ref, 1000))
            for lam in SWEEP_LAMBDAS:
                sr.append(_run("sr", data, maps, mask, cal, nu, lam, ref, 1000))
        study["fractions"][frac] = {
            "mask": mask, "data": data, "cal": cal, "pics": pics, "sr": sr,
            "best_pics": max(pics, key=lambda r: r["ssim"]),
            "best_sr": max(sr, key=lambda r: r["ssim"]),
        }
    study["seconds"] = time.perf_counter() - t0
    return study


@pytest.mark.slow
def test_criterion_6_directional(phantom_study):
    ok, parts, gains = True, [], {}
    for frac, res in phantom_study["fractions"].items():
        bp, bs = res["best_pics"], res["best_sr"]
        gains[frac] = bs["psnr_db"] - bp["psnr_db"]
        ok &= bs["psnr_db"] >= bp["psnr_db"] and bs["ssim"] >= bp["ssim"]
        parts.append(f"f={frac}: PICS {bp['psnr_db']:.2f} dB/{bp['ssim']:.4f} "
                     f"(nu={bp['nu']}) vs SR {bs['psnr_db']:.2f} dB/{bs['ssim']:.4f} "
                     f"(nu={bs['nu']}, ls={bs['lambda_s']})")
    ordered = gains[0.2] > gains[0.3]
    fast = phantom_study["seconds"] < 20 * 60
    parts.append(f"gain 0.2 {gains[0.2]:+.2f} dB vs 0.3 {gains[0.3]:+.2f} dB; "
                 f"{phantom_study['seconds'] / 60:.1f} min")
    assert record("6 SR improves PICS on the phantom", bool(ok and ordered and fast),
                  "; ".join(parts))


@pytest.mark.slow
def test_criterion_7_support(phantom_study, small_problem):
    # (a) huge sigma^2 reproduces PICS+SR, (b) sigma^2 = 0 zeroes the background,
    # (c) feasibility, on the small phantom
    p, cal = small_problem, small_problem["cal"]
    support = phantom.support_mask(p["img"])
    args = (p["data"], p["maps"], p["mask"], cal.kernels, 0.5, 1.0, cal.gamma, cal.kappa)
    sr, _ = recon.recon_pics_sr(*args, max_iters=3000)
    loose, _ = recon.recon_pics_sr_support(*args, support, 1e12, max_iters=3000)
    match = rel_err(loose, sr)
    tight, _ = recon.recon_pics_sr_support(*args, support, 0.0, max_iters=300)
    background_zero = bool(np.all(tight[~support] == 0))
    feasible = True
    for s2 in (0.0, 1e-4, 1e-2, 1.0):
        m, _ = recon.recon_pics_sr_support(*args, support, s2, max_iters=200)
        feasible &= recon.support_energy(m, support) <= s2 + 1e-8
    # (d) support changes PSNR negligibly on the 128x128 phantom at fraction 0.25
    res = phantom_study["fractions"][0.25]
    best = res["best_sr"]
    ref, img, maps = phantom_study["reference"], phantom_study["img"], phantom_study["maps"]
    omega = phantom.support_mask(img)
    sigma_sq = recon.estimate_sigma_sq(ref, ~omega)
    c = res["cal"]
    full_args = (res["data"], maps, res["mask"], c.kernels, best["nu"], best["lambda_s"],
                 c.gamma, c.kappa)
    x_sup, _ = recon.recon_pics_sr_support(*full_args, omega, sigma_sq, max_iters=1000)
    delta = metrics.psnr_complex(x_sup, ref) - best["psnr_db"]
    # diagnostic only: a conservative superset of the support (as produced by
    # automatic support detection on real data) excludes far less background
    loose_omega = binary_dilation(omega, iterations=12)
    x_loose, _ = recon.recon_pics_sr_support(*full_args, loose_omega, sigma_sq, max_iters=1000)
    delta_loose = metrics.psnr_complex(x_loose, ref) - best["psnr_db"]
    ok = match <= 1e-3 and background_zero and feasible and abs(delta) < 0.5
    assert record("7 support constraint", bool(ok),
                  f"huge-sigma rel diff {match:.1e}, background zero {background_zero}, "
                  f"feasible {feasible}, dPSNR(SR+support - SR) {delta:+.3f} dB with the exact "
                  f"support ({np.mean(~omega):.0%} of the FOV outside); diagnostic: "
                  f"{delta_loose:+.3f} dB with the support dilated by 12 px "
                  f"({np.mean(~loose_omega):.0%} outside)")


@pytest.mark.slow
def test_criterion_8_convergence_reported(phantom_study):
    """The reported (best-by-SSIM) runs barely move between 500 and 1000 iterations."""
    changes = {f"{frac}/{kind}": res[f"best_{kind}"]["change_500_1000"]
               for frac, res in phantom_study["fractions"].items() for kind in ("pics", "sr")}
    worst = max(changes.values())
    assert record("8 convergence (reported runs)", worst < 1e-3,
                  f"worst relative change {worst:.1e} ({max(changes, key=changes.get)})")


@pytest.mark.slow
def test_criterion_8_convergence_all_grid_runs(phantom_study):
    """Strict reading: every run of the grid, including the weakly regularized ones."""
    runs = [(frac, kind, r) for frac, res in phantom_study["fractions"].items()
            for kind in ("pics", "sr") for r in res[kind]]
    bad = [(f, k, r["nu"], r["lambda_s"], r["change_500_1000"]) for f, k, r in runs
           if r["change_500_1000"] >= 1e-3]
    worst = max(runs, key=lambda t: t[2]["change_500_1000"])
    detail = (f"{len(bad)}/{len(runs)} runs at or above 1e-3; worst "
              f"{worst[2]['change_500_1000']:.1e} (f={worst[0]}, {worst[1]}, "
              f"nu={worst[2]['nu']}, ls={worst[2]['lambda_s']})")
    assert record("8 convergence (all grid runs)", not bad, detail)


KNEE_PSNR = {  # fraction: (PICS, PICS+SR) in dB
    0.2: (27.89, 28.67), 0.25: (28.49, 29.30), 0.3: (29.12, 29.93), 0.35: (29.67, 30.42),
}


@pytest.mark.slow
def test_criterion_9_knee():
    root = os.environ.get("SPIRITREG_KNEE_DIR")
    if not root or not (Path(root) / "kspace.mra").exists():
        record("9 knee dataset (optional)", None, "SPIRITREG_KNEE_DIR not set")
        pytest.skip("external knee data not available")
    kspace = read_array(Path(root) / "kspace.mra")
    maps = read_array(Path(root) / "maps.mra")
    ref = recon.recon_reference(kspace, maps)
    ordered, within, parts = True, True, []
    for frac, (p_pics, p_sr) in KNEE_PSNR.items():
        mask = sampling.generate_mask(ref.shape, frac, sampling.default_acr_size(ref.shape),
                                      seed=3)
        data = kspace * np.fft.ifftshift(mask.indicator)
        cal = recon.calibrate(data, maps, mask)
        pics = max((_run("pics", data, maps, mask, cal, nu, 0.0, ref, 1000)
                    for nu in SWEEP_NUS), key=lambda r: r["ssim"])
        sr = max((_run("sr", data, maps, mask, cal, nu, lam, ref, 1000)
                  for nu in SWEEP_NUS for lam in SWEEP_LAMBDAS), key=lambda r: r["ssim"])
        ordered &= pics["psnr_db"] < sr["psnr_db"]
        within &= abs(pics["psnr_db"] - p_pics) <= 1 and abs(sr["psnr_db"] - p_sr) <= 1
        parts.append(f"f={frac}: {pics['psnr_db']:.2f} vs {sr['psnr_db']:.2f} dB")
    record("9 knee PSNR within 1 dB of published (informational)", bool(within),
           "; ".join(parts))
    assert record("9 knee ordering PICS < PICS+SR", bool(ordered), "; ".join(parts))

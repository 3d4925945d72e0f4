"""Command-line pipeline: ``spiritreg <command> [options]``.

Commands share one directory convention.  ``--out`` names the directory
that receives a command's files and ``--data`` the directory its inputs
are read from (default: the ``--out`` directory), so a whole pipeline can
run in one place::

    spiritreg phantom --size 128 --coils 8 --out run
    spiritreg mask --size 128 --fraction 0.25 --acr 24 --out run
    spiritreg calibrate --out run
    spiritreg recon --method pics-sr --nu 10 --lambda-s 5 --out run
    spiritreg eval --image run/recon.mra --out run

File names inside a directory are fixed (``kspace.mra``, ``maps.mra``,
``mask.mra``, ``reference.mra``, ``kernels.mra``, ``gamma.mra``, ...).

Exit status: 0 success, 1 usage error, 2 data error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import (
    CalibrationError,
    PowerLawFit,
    PowerLawFitError,
    SpiritKernelSet,
)
from .core import ArrayFormatError, ReconConfig, SamplingMask, ensure_dir, read_array, write_array
from .metrics import evaluate
from .phantom import (
    birdcage_maps,
    noise_std_for_snr,
    shepp_logan,
    simulate_kspace,
    support_mask,
)
from .recon import calibrate, recon_pics, recon_pics_sr, recon_pics_sr_support, recon_reference
from .sampling import MaskGenerationError, generate_mask
from .solvers import SolverError

logger = logging.getLogger("spiritreg")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3

SWEEP_NUS = (0.01, 0.1, 1.0, 10.0)
SWEEP_LAMBDAS = (0.1, 0.5, 1.0, 2.0, 4.0, 5.0, 10.0)
METHODS = ("pics", "pics-sr", "pics-sr-support")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------- files


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    if isinstance(v, (np.floating, np.integer)):
        return _json_value(v.item())
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    return v


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_json_value(obj), indent=2, sort_keys=True) + "\n")


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise ArrayFormatError(path, f"invalid JSON: {exc}") from exc


def _read_mask(directory) -> SamplingMask:
    path = Path(directory) / "mask.mra"
    return SamplingMask.load(path)


def _save_calibration(out, cal, kernel_radius, damping) -> None:
    write_array(out / "kernels.mra", cal.kernels.kernels)
    write_array(out / "gamma.mra", cal.gamma)
    write_json(out / "calibration.json", {
        "kernel_radius": kernel_radius,
        "damping": damping,
        "n_coils": cal.kernels.n_coils,
        "kappa": cal.kappa,
        "power_law": cal.power_law.to_dict(),
    })


def _load_calibration(directory):
    directory = Path(directory)
    meta = _read_json(directory / "calibration.json")
    kernels = SpiritKernelSet(read_array(directory / "kernels.mra"))
    gamma = read_array(directory / "gamma.mra").real
    return kernels, gamma, float(meta["kappa"]), PowerLawFit(**meta["power_law"])


# --------------------------------------------------------------- config


def _config_from(args) -> ReconConfig:
    """Defaults, then ``--config`` JSON, then explicit flags."""
    cfg = ReconConfig.load(args.config) if getattr(args, "config", None) else ReconConfig()
    overrides = {
        "nu": getattr(args, "nu", None),
        "lambda_s": getattr(args, "lambda_s", None),
        "max_iters": getattr(args, "iters", None),
        "sigma_sq": getattr(args, "sigma_sq", None),
        "seed": getattr(args, "seed", None),
        "acr_size": getattr(args, "acr", None),
        "kappa": getattr(args, "kappa", None),
    }
    for name, value in overrides.items():
        if value is not None:
            setattr(cfg, name, value)
    cfg.validate()
    return cfg


def _pair(text):
    parts = text.lower().replace("x", ",").split(",")
    try:
        vals = tuple(int(p) for p in parts if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or NxM, got {text!r}") from None
    if len(vals) == 1:
        vals = vals * 2
    if len(vals) != 2 or min(vals) < 1:
        raise argparse.ArgumentTypeError(f"expected N or NxM, got {text!r}")
    return vals


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# ------------------------------------------------------------- commands


def _make_phantom(size, coils, snr_db, seed):
    img = shepp_logan(size).astype(np.complex128)
    maps = birdcage_maps(size, coils)
    noise_std = noise_std_for_snr(img, maps, snr_db) if math.isfinite(snr_db) else 0.0
    kspace = simulate_kspace(img, maps, noise_std, seed)
    return img, maps, kspace, noise_std


def cmd_phantom(args) -> int:
    out = ensure_dir(args.out)
    img, maps, kspace, noise_std = _make_phantom(args.size, args.coils, args.snr, args.seed)
    reference = recon_reference(kspace, maps)
    write_array(out / "image.mra", img)
    write_array(out / "maps.mra", maps)
    write_array(out / "kspace.mra", kspace)
    write_array(out / "reference.mra", reference)
    write_array(out / "support.mra", support_mask(img).astype(np.complex128))
    write_json(out / "phantom.json", {
        "size": list(args.size), "coils": args.coils, "snr_db": args.snr,
        "noise_std": noise_std, "seed": args.seed,
    })
    logger.info("phantom %s with %d coils written to %s", args.size, args.coils, out)
    return EXIT_OK


def cmd_mask(args) -> int:
    out = ensure_dir(args.out)
    cfg = _config_from(args)
    mask = generate_mask(args.size, args.fraction, cfg.acr_size, seed=cfg.seed)
    mask.save(out / "mask.mra")
    write_json(out / "mask.json", {
        "size": list(args.size), "target_fraction": args.fraction,
        "fraction": mask.fraction, "acr_size": list(mask.acr_size),
        "acr_origin": list(mask.acr_origin), "r0": mask.r0, "seed": cfg.seed,
    })
    print(json.dumps({"fraction": mask.fraction}))
    return EXIT_OK


def _inputs(args):
    data_dir = Path(args.data or args.out)
    kspace = read_array(data_dir / "kspace.mra")
    maps = read_array(data_dir / "maps.mra")
    mask = _read_mask(data_dir)
    return data_dir, kspace, maps, mask


def cmd_calibrate(args) -> int:
    out = ensure_dir(args.out)
    _, kspace, maps, mask = _inputs(args)
    cal = calibrate(kspace, maps, mask, kernel_radius=args.kernel_radius, damping=args.damping)
    _save_calibration(out, cal, args.kernel_radius, args.damping)
    print(json.dumps(_json_value({"kappa": cal.kappa, "power_law": cal.power_law.to_dict()})))
    return EXIT_OK


def _calibration_for(args, data_dir, kspace, maps, mask):
    if (data_dir / "calibration.json").exists():
        kernels, gamma, kappa, _ = _load_calibration(data_dir)
        if kernels.n_coils != maps.shape[0]:
            raise CalibrationError("stored kernels do not match the coil count")
        return kernels, gamma, kappa
    logger.info("no calibration in %s; calibrating from the ACR", data_dir)
    cal = calibrate(kspace, maps, mask, kernel_radius=args.kernel_radius, damping=args.damping)
    return cal.kernels, cal.gamma, cal.kappa


def _run_method(method, cfg, kspace, maps, mask, calib=None, support=None):
    if method == "pics":
        return recon_pics(kspace, maps, mask, cfg.nu, cfg.max_iters)
    kernels, gamma, kappa = calib
    kappa = cfg.kappa if cfg.kappa is not None else kappa
    if method == "pics-sr":
        return recon_pics_sr(kspace, maps, mask, kernels, cfg.nu, cfg.lambda_s, gamma, kappa,
                             cfg.max_iters)
    return recon_pics_sr_support(kspace, maps, mask, kernels, cfg.nu, cfg.lambda_s, gamma,
                                 kappa, support, cfg.sigma_sq, cfg.max_iters)


def cmd_recon(args) -> int:
    cfg = _config_from(args)
    support = None
    if args.method == "pics-sr-support":
        if args.support is None or cfg.sigma_sq is None:
            raise UsageError("--method pics-sr-support needs --support and --sigma-sq")
        support = read_array(args.support).real != 0
    out = ensure_dir(args.out)
    data_dir, kspace, maps, mask = _inputs(args)
    calib = None
    if args.method != "pics":
        calib = _calibration_for(args, data_dir, kspace, maps, mask)
    image, trace = _run_method(args.method, cfg, kspace, maps, mask, calib, support)
    write_array(out / "recon.mra", image)
    trace.write_jsonl(out / "trace.jsonl", timing=False)
    summary = {
        "method": args.method,
        "config": json.loads(cfg.to_json()),
        "iterations": len(trace),
        "final_objective": trace.final_objective,
    }
    if calib is not None:
        summary["config"]["kappa"] = cfg.kappa if cfg.kappa is not None else calib[2]
    write_json(out / "recon.json", summary)
    logger.info("%s: %d iterations, objective %.6g", args.method, len(trace),
                trace.final_objective)
    return EXIT_OK


def cmd_eval(args) -> int:
    image = read_array(args.image)
    ref_path = args.reference or Path(args.data or Path(args.image).parent) / "reference.mra"
    reference = read_array(ref_path)
    result = evaluate(image, reference)
    text = json.dumps(_json_value(result), sort_keys=True)
    print(text)
    if args.out:
        write_json(ensure_dir(args.out) / "eval.json", result)
    return EXIT_OK


def _sweep_problem(args, cfg):
    if args.data:
        data_dir, kspace, maps, mask = _inputs(args)
        reference = read_array(data_dir / "reference.mra")
        return kspace, maps, mask, reference
    _, maps, kspace, _ = _make_phantom(args.size, args.coils, args.snr, cfg.seed)
    mask = generate_mask(args.size, args.fraction, cfg.acr_size, seed=cfg.seed)
    return kspace, maps, mask, recon_reference(kspace, maps)


def _best(rows):
    return max(rows, key=lambda r: r["ssim"]) if rows else None


def cmd_sweep(args) -> int:
    """Sequential grid; rows follow grid order (nu outer, lambda_s inner)."""
    cfg = _config_from(args)
    out = ensure_dir(args.out)
    kspace, maps, mask, reference = _sweep_problem(args, cfg)
    cal = calibrate(kspace, maps, mask, kernel_radius=args.kernel_radius, damping=args.damping)
    kappa = cfg.kappa if cfg.kappa is not None else cal.kappa
    pics_rows, rows = [], []
    for nu in args.nus:
        image, _ = recon_pics(kspace, maps, mask, nu, cfg.max_iters)
        pics_rows.append({"nu": nu, "lambda_s": 0.0, **evaluate(image, reference)})
        for lam in args.lambdas:
            image, _ = recon_pics_sr(kspace, maps, mask, cal.kernels, nu, lam, cal.gamma, kappa,
                                     cfg.max_iters)
            rows.append({"nu": nu, "lambda_s": lam, **evaluate(image, reference)})
            logger.info("nu=%g lambda_s=%g ssim=%.4f", nu, lam, rows[-1]["ssim"])
    table = {
        "max_iters": cfg.max_iters,
        "kappa": kappa,
        "fraction": mask.fraction,
        "rows": rows,
        "pics": pics_rows,
        "best_pics_sr": _best(rows),
        "best_pics": _best(pics_rows),
    }
    write_json(out / "sweep.json", table)
    print(json.dumps(_json_value({"best_pics": table["best_pics"],
                                  "best_pics_sr": table["best_pics_sr"]}), sort_keys=True))
    return EXIT_OK


# --------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spiritreg", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def add(name, func, help_text, out_required=True):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.set_defaults(func=func)
        p.add_argument("--out", required=out_required, help="output directory")
        return p

    def problem_flags(p):
        p.add_argument("--size", type=_pair, default=(128, 128), help="image size N or NxM")
        p.add_argument("--coils", type=int, default=8)
        p.add_argument("--snr", type=float, default=30.0, help="input SNR in dB (inf: no noise)")

    def calib_flags(p):
        p.add_argument("--kernel-radius", type=int, default=2)
        p.add_argument("--damping", type=float, default=0.0, help="Tikhonov damping")

    def solver_flags(p):
        p.add_argument("--config", help="ReconConfig JSON; flags override it")
        p.add_argument("--nu", type=float)
        p.add_argument("--lambda-s", type=float)
        p.add_argument("--kappa", type=float, help="override the calibrated kappa")
        p.add_argument("--iters", type=int)

    p = add("phantom", cmd_phantom, "simulate a Shepp-Logan acquisition")
    problem_flags(p)
    p.add_argument("--seed", type=int, default=0)

    p = add("mask", cmd_mask, "generate a variable-density Poisson-disc mask")
    p.add_argument("--size", type=_pair, default=(128, 128))
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--acr", type=_pair, help="ACR size (default: coarsest wavelet scale)")
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="ReconConfig JSON (acr_size, seed)")

    p = add("calibrate", cmd_calibrate, "kernels, power-law fit, gamma and kappa")
    p.add_argument("--data", help="input directory (default: --out)")
    calib_flags(p)

    p = add("recon", cmd_recon, "reconstruct from undersampled data")
    p.add_argument("--data", help="input directory (default: --out)")
    p.add_argument("--method", choices=METHODS, default="pics-sr")
    p.add_argument("--support", help="support mask file (pics-sr-support)")
    p.add_argument("--sigma-sq", type=float)
    solver_flags(p)
    calib_flags(p)

    p = add("eval", cmd_eval, "SSIM and complex PSNR against the reference", out_required=False)
    p.add_argument("--image", required=True)
    p.add_argument("--reference", help="default: reference.mra next to --image or in --data")
    p.add_argument("--data")

    p = add("sweep", cmd_sweep, "grid over nu and lambda_s, best by SSIM")
    p.add_argument("--data", help="directory with kspace/maps/mask/reference; "
                                  "default: simulate from --size/--coils/--fraction")
    problem_flags(p)
    p.add_argument("--fraction", type=float, default=0.25)
    p.add_argument("--acr", type=_pair)
    p.add_argument("--seed", type=int)
    p.add_argument("--nus", type=_floats, default=SWEEP_NUS)
    p.add_argument("--lambdas", type=_floats, default=SWEEP_LAMBDAS)
    solver_flags(p)
    calib_flags(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"spiritreg {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, PowerLawFitError) as exc:
        print(f"spiritreg {args.command}: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ArrayFormatError, CalibrationError, MaskGenerationError, OSError, ValueError,
            KeyError) as exc:
        print(f"spiritreg {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

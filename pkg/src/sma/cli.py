"""``sma`` command line interface.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 numerical failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import fourier, wavelet
from .diffusion import OracleDenoiser, ddim_sample, forward_sample, frame_noise, make_schedule
from .gradcheck import check_sma_grad, random_instance
from .io import (LoadError, csv_text, dumps_json, load_video, save_video, write_text)
from .objective import SmaConfig, sma_loss
from .tensor import ShapeError, motion_vectors
from .transfer import (NumericalError, SynthSpec, TransferConfig, synth_video, transfer)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _levels(text):
    if text == "auto":
        return "auto"
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--levels must be an integer or 'auto', got {text!r}")
    if n < 1:
        raise argparse.ArgumentTypeError("--levels must be >= 1")
    return n


def _velocity(text):
    try:
        dx, dy = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"--velocity expects DX,DY, got {text!r}")
    return dx, dy


def _timesteps(text):
    if text == "none":
        return None
    try:
        kind, rng = text.split(":")
        lo, hi = (int(v) for v in rng.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"--timesteps expects none or uniform:LO,HI, got {text!r}")
    if kind != "uniform":
        raise argparse.ArgumentTypeError(f"unknown timestep policy {kind!r}")
    return lo, hi


def _seed(text):
    n = int(text)
    if not 0 <= n < 2**64:
        raise argparse.ArgumentTypeError("--seed must be an unsigned 64-bit integer")
    return n


_INIT_NAMES = {"random": "random", "static": "static-first-frame", "copy": "copy-target"}


def _add_sma_flags(p):
    p.add_argument("--levels", type=_levels, default="auto")
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--lambda-g", type=float, default=0.4)
    p.add_argument("--lambda-l", type=float, default=0.2)
    p.add_argument("--align", choices=("mse", "l1", "cosine"), default="mse")


def _add_synth_flags(p):
    p.add_argument("--pattern", default="translate-square",
                   choices=("translate-square", "translate-impulse", "rotate-bar"))
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--velocity", type=_velocity, default=(2.0, 0.0))
    p.add_argument("--object-size", type=int, default=8)
    p.add_argument("--background", choices=("flat", "texture"), default="flat")
    p.add_argument("--artifact", choices=("none", "fence", "stair", "flicker"), default="none")
    p.add_argument("--artifact-strength", type=float, default=0.3)


def build_parser():
    parser = _Parser(prog="sma", description="Spectral motion alignment toolkit.")
    parser.add_argument("--config", help="JSON file whose keys override flags")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="render a synthetic motion video")
    _add_synth_flags(p)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", required=True, help="output SMAV path")
    p.add_argument("--json", help="write a JSON summary here ('-' for stdout)")

    p = sub.add_parser("analyze", help="motion vectors, spectra and wavelet coefficients")
    p.add_argument("--input", required=True)
    p.add_argument("--levels", type=_levels, default="auto")
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--json", help="also write the summary here ('-' for stdout)")

    p = sub.add_parser("loss", help="SMA loss between the motion of two videos")
    p.add_argument("--ref", required=True)
    p.add_argument("--pred", required=True)
    _add_sma_flags(p)
    p.add_argument("--json", default="-")

    p = sub.add_parser("gradcheck", help="finite-difference check of the SMA gradient")
    p.add_argument("--seed", type=_seed, default=42)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--size", type=int, default=16)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    _add_sma_flags(p)
    p.add_argument("--json", default="-")

    p = sub.add_parser("transfer", help="latent-optimization motion transfer")
    p.add_argument("--source", help="source video (default: synthesize from flags)")
    _add_synth_flags(p)
    _add_sma_flags(p)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--init", choices=tuple(_INIT_NAMES), default="static")
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--timesteps", type=_timesteps, default=None)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", help="write the optimized video (SMAV)")
    p.add_argument("--trace", help="write the loss trace CSV")
    p.add_argument("--json", default="-")

    p = sub.add_parser("ddim-demo", help="deterministic DDIM round trip with an oracle denoiser")
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--size", type=int, default=16)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--json", default="-")
    return parser


def _sma_config(args):
    return SmaConfig(lambda_g=args.lambda_g, lambda_l=args.lambda_l, delta=args.delta,
                     levels=args.levels, align_kind=args.align)


def _resolved(args):
    return {k: (list(v) if isinstance(v, tuple) else v)
            for k, v in sorted(vars(args).items()) if k != "config"}


def _synth_spec(args):
    return SynthSpec(pattern=args.pattern, frames=args.frames, size=args.size,
                     velocity=args.velocity, object_size=args.object_size,
                     background=args.background, artifact=args.artifact,
                     artifact_strength=args.artifact_strength, seed=args.seed)


def cmd_synth(args):
    video, velocity = synth_video(_synth_spec(args))
    save_video(video, args.out)
    if args.json:
        write_text(dumps_json({"config": _resolved(args), "shape": list(video.shape),
                               "velocity": list(velocity)}), args.json)


def _band_energies(mv, levels):
    coeffs = wavelet.dwt1d(mv, levels)
    return [{"level": j, "band": band, "energy": float(np.sum(arr ** 2))}
            for j, band, arr in coeffs.bands()]


def cmd_analyze(args):
    video = load_video(args.input)
    mv = motion_vectors(video)
    if mv.shape[0] < 2:
        raise ShapeError(f"--input {args.input}: analysis needs at least 3 frames")
    levels = wavelet.auto_levels(mv.shape[0]) if args.levels == "auto" else args.levels
    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as e:
        raise OSError(f"--out {args.out}: cannot create directory ({e})") from e
    save_video(mv, os.path.join(args.out, "motion_vectors.smav"))
    C = mv.shape[1]
    for c in range(C):
        name = "spectrum.csv" if C == 1 else f"spectrum_c{c}.csv"
        write_text(csv_text(("frame", "a", "b", "amplitude", "phase"),
                            fourier.spectrum_rows(mv, c)), os.path.join(args.out, name))
    write_text(csv_text(("pixel", "level", "band", "k", "value"),
                        wavelet.coefficient_rows(mv, levels)),
               os.path.join(args.out, "coefficients.csv"))
    total = float(np.sum(fourier.dft2(mv).amplitude ** 2))
    hf = fourier.hf_energy(mv)
    w = fourier.freq_weight(mv.shape[-2], mv.shape[-1], args.delta)
    summary = {
        "config": _resolved(args),
        "shape": list(video.shape),
        "levels": levels,
        "band_energies": _band_energies(mv, levels),
        "spectral_energy": total,
        "hf_energy": hf,
        "hf_energy_fraction": hf / total if total > 0 else 0.0,
        "weighted_amplitude_mean": float(np.mean(w * fourier.dft2(mv).amplitude)),
    }
    text = dumps_json(summary)
    write_text(text, os.path.join(args.out, "summary.json"))
    if args.json:
        write_text(text, args.json)


def cmd_loss(args):
    ref, pred = load_video(args.ref), load_video(args.pred)
    if ref.shape != pred.shape:
        raise ShapeError(f"--ref {args.ref} has dims {ref.shape} but --pred {args.pred} "
                         f"has dims {pred.shape}")
    cfg = _sma_config(args)
    breakdown = sma_loss(motion_vectors(ref), motion_vectors(pred), cfg)
    out = breakdown.to_dict(cfg)
    out["run"] = _resolved(args)
    write_text(dumps_json(out), args.json)


def cmd_gradcheck(args):
    cfg = _sma_config(args)
    ref, pred = random_instance(args.seed, args.frames, args.size)
    result = check_sma_grad(ref, pred, cfg, h=args.eps)
    result["passed"] = result["max_rel_error"] < args.tol and result["checked"] > 0
    result["config"] = _resolved(args)
    write_text(dumps_json(result), args.json)
    if not result["passed"]:
        raise NumericalError(f"gradient check failed: max relative error "
                             f"{result['max_rel_error']:.3g} >= {args.tol}")


def cmd_transfer(args):
    cfg = TransferConfig(steps=args.steps, step_size=args.lr, init=_INIT_NAMES[args.init],
                         sma=_sma_config(args), timestep_policy=args.timesteps,
                         optimizer=args.optimizer, seed=args.seed)
    if args.source:
        source = load_video(args.source)
        velocity = clean = None
    else:
        spec = _synth_spec(args)
        source, velocity = synth_video(spec)
        clean = motion_vectors(synth_video(
            SynthSpec(**{**spec.__dict__, "artifact": "none"}))[0])
    target, report = transfer(source, cfg, velocity=velocity, clean_motion=clean)
    out = report.to_dict()
    out["run"] = _resolved(args)
    if args.out:
        save_video(target, args.out)
    if args.trace:
        write_text(report.trace_csv(), args.trace)
    write_text(dumps_json(out), args.json)


def cmd_ddim_demo(args):
    schedule = make_schedule(1000)
    rng = np.random.default_rng(args.seed)
    v0 = rng.uniform(0.0, 1.0, size=(args.frames, 1, args.size, args.size))
    eps = frame_noise(v0.shape, args.seed, schedule.T)
    xT = forward_sample(v0, schedule.T, eps, schedule)
    x0 = ddim_sample(xT, OracleDenoiser(v0, schedule), schedule, steps=args.steps, eta=0.0)
    err = float(np.max(np.abs(x0 - v0)))
    write_text(dumps_json({"config": _resolved(args), "max_abs_error": err}), args.json)


COMMANDS = {"synth": cmd_synth, "analyze": cmd_analyze, "loss": cmd_loss,
            "gradcheck": cmd_gradcheck, "transfer": cmd_transfer, "ddim-demo": cmd_ddim_demo}


def _apply_config(parser, argv):
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                overrides = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"--config {args.config}: {e}")
        for key, value in overrides.items():
            attr = key.replace("-", "_")
            if not hasattr(args, attr):
                raise UsageError(f"--config {args.config}: unknown option {key!r}")
            setattr(args, attr, tuple(value) if isinstance(value, list) else value)
    return args


def run(argv=None):
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if not args.command:
            raise UsageError("sma: a subcommand is required")
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[args.command](args)
    except NumericalError as e:
        print(f"sma {args.command}: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (LoadError, ShapeError, ValueError, OSError) as e:
        print(f"sma {args.command}: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

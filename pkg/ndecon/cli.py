#!/usr/bin/python
"""
cli - command-line entry point for ndecon

Subcommands:

    convolve    full convolution of an image/tensor with a kernel
    deconv      projected-gradient or Richardson-Lucy deconvolution
    simulate    phantom, PSF and noisy observation for an experiment
    experiment  simulate, run both solvers and report the SNRs
    verify      randomized operator checks against the explicit matrix
    metrics     SNR of an estimate against a reference
    matrix      CSV dump of the explicit convolution matrix
    replay      re-run the command recorded in a manifest

Every command that writes experiment outputs also writes a manifest.txt of
key=value lines into the output directory. Exit codes: 0 success, 2 usage,
3 file format, 4 shape, 5 numerical (stalled solver, degenerate operator,
failed verification).
"""

# =============================================================================
# Imports
# =============================================================================
import argparse
import logging
import os
import shlex
import sys
import time
from dataclasses import dataclass, field

import numpy as np

import ndecon
from ndecon.convolution import Kernel, conv_full, set_num_threads
from ndecon.errors import ConfigError, NdeconError, ShapeError
from ndecon.imageio import read_any, write_any, write_pgm, write_tensor
from ndecon.matrix import ExplicitConvMatrix
from ndecon.oracle import run_suite
from ndecon.simulation import (
    NoiseSpec,
    PsfSpec,
    add_gaussian_noise,
    aligned_crop,
    make_psf,
    phantom_lines,
    phantom_texture,
    snr_db,
)
from ndecon.solvers import DeconvConfig, RlConfig, StopReason, deconv_pg, deconv_rl

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_SHAPE = 4
EXIT_NUMERICAL = 5

MANIFEST_NAME = "manifest.txt"

# Setups of the line-phantom and textured-image deblurring runs
PRESETS = {
    "lines": {
        "phantom": "lines",
        "size": (512, 512),
        "lines": 9,
        "psf_size": (5, 5),
        "sigma": 1.0,
        "noise_std": 5.0,
    },
    "texture-high-noise": {
        "phantom": "texture",
        "size": (225, 225),
        "psf_size": (5, 5),
        "sigma": 1.0,
        "noise_std": 20.0,
    },
    "texture-low-noise": {
        "phantom": "texture",
        "size": (225, 225),
        "psf_size": (5, 5),
        "sigma": 1.0,
        "noise_std": 5.0,
    },
}

SIMULATE_DEFAULTS = {
    "phantom": "lines",
    "size": (128, 128),
    "lines": 9,
    "intensity": 255.0,
    "psf": "gaussian",
    "psf_size": (5, 5),
    "sigma": 1.0,
    "noise_mean": 0.0,
    "noise_std": 5.0,
    "seed": 0,
}


# =============================================================================
# Run manifest
# =============================================================================
@dataclass
class RunManifest:
    """
    Plain-text record of a command: enough to reproduce its outputs
    """

    subcommand: str
    argv: list
    flags: dict = field(default_factory=dict)
    seed: object = None
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    wall_time: float = 0.0
    version: str = ndecon.__version__

    def lines(self):
        out = [
            f"subcommand={self.subcommand}",
            f"argv={shlex.join(self.argv)}",
            f"version={self.version}",
            f"seed={'none' if self.seed is None else self.seed}",
            f"wall_time={self.wall_time:.6f}",
        ]
        for prefix, entries in (
            ("flag", self.flags),
            ("input", self.inputs),
            ("output", self.outputs),
            ("result", self.results),
        ):
            for key in sorted(entries):
                out.append(f"{prefix}.{key}={_format_value(entries[key])}")
        return out

    def write(self, outdir):
        filename = os.path.join(outdir, MANIFEST_NAME)
        if os.path.exists(filename):
            try:
                previous = read_manifest(filename).get("subcommand")
            except NdeconError:
                previous = None
            if previous is not None and previous != self.subcommand:
                logger.warning(
                    f"replacing the {previous} manifest in {outdir} with a {self.subcommand} manifest"
                )
        with open(filename, "w") as fp:
            fp.write("\n".join(self.lines()) + "\n")
        return filename


def _format_value(value):
    if isinstance(value, (tuple, list)):
        return ",".join(str(v) for v in value)
    return str(value)


def read_manifest(filename):
    """Read a manifest into a dict of strings"""
    entries = {}
    with open(filename, "r") as fp:
        for line in fp:
            line = line.rstrip("\n")
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise NdeconError(f"malformed manifest line: {line!r}")
            entries[key] = value
    return entries


def _outdir_of(filename):
    outdir = os.path.dirname(os.path.abspath(filename))
    os.makedirs(outdir, exist_ok=True)
    return outdir


def _source_manifest(filename):
    """Entries of the manifest next to an input file, empty if there is none"""
    manifest = os.path.join(os.path.dirname(os.path.abspath(filename)), MANIFEST_NAME)
    if not os.path.exists(manifest):
        return {}
    return read_manifest(manifest)


def _flags(args):
    skip = ("func", "argv")
    return {k: v for k, v in vars(args).items() if k not in skip and v is not None}


# =============================================================================
# Argument helpers
# =============================================================================
def parse_shape(text):
    """Parse '512,512' or '512x512' into a tuple of positive ints"""
    try:
        shape = tuple(int(s) for s in text.replace("x", ",").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid shape {text!r}")
    if not shape or min(shape) < 1:
        raise argparse.ArgumentTypeError(f"invalid shape {text!r}")
    return shape


def _read_kernel(filename):
    return Kernel(read_any(filename))


def _infer_shape(y, h):
    shape = tuple(e - 2 * p for e, p in zip(y.shape, h.radii))
    if y.ndim != h.ndim or min(shape) < 1:
        raise ShapeError(
            f"observation {y.shape} is too small for kernel {h.shape}"
        )
    return shape


# =============================================================================
# Subcommands
# =============================================================================
def cmd_convolve(args):
    t0 = time.perf_counter()
    x = read_any(args.input)
    h = _read_kernel(args.kernel)
    y = conv_full(x, h)
    outdir = _outdir_of(args.output)
    write_any(y, args.output)

    manifest = RunManifest("convolve", args.argv, flags=_flags(args))
    manifest.inputs = {"input": args.input, "kernel": args.kernel}
    manifest.outputs = {"output": args.output}
    manifest.results = {
        "shape.input": x.shape,
        "shape.kernel": h.shape,
        "shape.output": y.shape,
    }
    manifest.wall_time = time.perf_counter() - t0
    manifest.write(outdir)
    print(f"convolved {x.shape} with {h.shape} -> {y.shape}")
    return EXIT_OK


def cmd_deconv(args):
    t0 = time.perf_counter()
    y = read_any(args.observed)
    h = _read_kernel(args.kernel)
    x_shape = args.shape if args.shape is not None else _infer_shape(y, h)

    if args.method == "pg":
        options = {}
        if args.max_iters is not None:
            options["max_iters"] = args.max_iters
        if args.tol is not None:
            options["tol_rel_objective"] = args.tol
        report = deconv_pg(y, h, x_shape, DeconvConfig.from_options(**options))
    else:
        options = {}
        if args.max_iters is not None:
            options["max_iters"] = args.max_iters
        if args.tol is not None:
            options["tol_rel_change"] = args.tol
        report = deconv_rl(y, h, x_shape, RlConfig.from_options(**options))

    outdir = _outdir_of(args.output)
    write_any(report.estimate, args.output)
    outputs = {"output": args.output}
    if args.trace_csv is not None:
        report.write_trace_csv(args.trace_csv)
        outputs["trace_csv"] = args.trace_csv
    if args.history is not None:
        report.write_history(args.history)
        outputs["history"] = args.history

    final = report.objective_trace[-1] if report.objective_trace else report.initial_objective
    manifest = RunManifest("deconv", args.argv, flags=_flags(args))
    source = _source_manifest(args.observed)
    seed = source.get("seed", "none")
    manifest.seed = None if args.seedless or seed == "none" else seed
    manifest.inputs = {"observed": args.observed, "kernel": args.kernel}
    # Keep the command that produced the observation; its manifest may be replaced below
    if "input.manifest.argv" in source:
        manifest.inputs["manifest.subcommand"] = source.get("input.manifest.subcommand", "")
        manifest.inputs["manifest.argv"] = source["input.manifest.argv"]
    elif "argv" in source:
        manifest.inputs["manifest.subcommand"] = source.get("subcommand", "")
        manifest.inputs["manifest.argv"] = source["argv"]
    manifest.outputs = outputs
    manifest.results = {
        "method": report.method,
        "stop_reason": report.stop_reason.value,
        "iterations_run": report.iterations_run,
        "initial_objective": repr(report.initial_objective),
        "final_objective": repr(final),
        "flux": repr(float(np.sum(report.estimate))),
        "clamped_pixels": report.clamped_pixels,
    }
    manifest.wall_time = time.perf_counter() - t0
    manifest.write(outdir)

    print(
        f"method={report.method} stop_reason={report.stop_reason.value} "
        f"iterations={report.iterations_run} objective={final:.10e}"
    )
    if report.stop_reason == StopReason.STALLED:
        return EXIT_NUMERICAL
    return EXIT_OK


def _simulation_params(args):
    """Merge explicit flags over the preset over the defaults"""
    params = dict(SIMULATE_DEFAULTS)
    if args.preset is not None:
        params.update(PRESETS[args.preset])
    for key in SIMULATE_DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    return params


def simulate(params, input_image=None):
    """Return truth, kernel and noisy observation for the parameters"""
    if params["phantom"] == "lines":
        truth = phantom_lines(params["size"], params["lines"], params["intensity"])
    elif params["phantom"] == "texture":
        truth = phantom_texture(params["size"], params["seed"])
    else:
        if input_image is None:
            raise ConfigError("--phantom file needs --input")
        truth = read_any(input_image)
    h = make_psf(PsfSpec(params["psf"], params["psf_size"], params["sigma"]))
    noise = NoiseSpec(params["noise_mean"], params["noise_std"], params["seed"])
    observed = add_gaussian_noise(conv_full(truth, h), noise)
    return truth, h, observed


def _write_simulation(outdir, truth, h, observed):
    os.makedirs(outdir, exist_ok=True)
    outputs = {
        "truth": os.path.join(outdir, "truth.ndt"),
        "kernel": os.path.join(outdir, "kernel.ndt"),
        "observed": os.path.join(outdir, "observed.ndt"),
    }
    write_tensor(truth, outputs["truth"])
    write_tensor(h.values, outputs["kernel"])
    write_tensor(observed, outputs["observed"])
    if truth.ndim == 2:
        outputs["truth_pgm"] = os.path.join(outdir, "truth.pgm")
        outputs["observed_pgm"] = os.path.join(outdir, "observed.pgm")
        write_pgm(truth, outputs["truth_pgm"], clamp=True)
        write_pgm(observed, outputs["observed_pgm"], clamp=True)
    return outputs


def cmd_simulate(args):
    t0 = time.perf_counter()
    params = _simulation_params(args)
    truth, h, observed = simulate(params, args.input)
    outputs = _write_simulation(args.outdir, truth, h, observed)

    manifest = RunManifest("simulate", args.argv, flags=params, seed=params["seed"])
    if args.input is not None:
        manifest.inputs = {"input": args.input}
    manifest.outputs = outputs
    manifest.results = {
        "shape.truth": truth.shape,
        "shape.kernel": h.shape,
        "shape.observed": observed.shape,
    }
    manifest.wall_time = time.perf_counter() - t0
    manifest.write(args.outdir)
    print(f"simulated {truth.shape} truth, {observed.shape} observation in {args.outdir}")
    return EXIT_OK


def cmd_experiment(args):
    t0 = time.perf_counter()
    params = _simulation_params(args)
    truth, h, observed = simulate(params, args.input)
    outputs = _write_simulation(args.outdir, truth, h, observed)

    pg = deconv_pg(
        observed, h, truth.shape, DeconvConfig(max_iters=args.iters, tol_rel_objective=0.0)
    )
    rl = deconv_rl(observed, h, truth.shape, RlConfig(max_iters=args.iters))
    snrs = {
        "observed": snr_db(truth, aligned_crop(observed, h, truth.shape)),
        "pg": snr_db(truth, pg.estimate),
        "rl": snr_db(truth, rl.estimate),
    }
    for name, report in (("pg", pg), ("rl", rl)):
        outputs[f"{name}_estimate"] = os.path.join(args.outdir, f"{name}.ndt")
        outputs[f"{name}_trace"] = os.path.join(args.outdir, f"{name}_trace.csv")
        write_tensor(report.estimate, outputs[f"{name}_estimate"])
        report.write_trace_csv(outputs[f"{name}_trace"])
        if truth.ndim == 2:
            outputs[f"{name}_pgm"] = os.path.join(args.outdir, f"{name}.pgm")
            write_pgm(report.estimate, outputs[f"{name}_pgm"], clamp=True)

    manifest = RunManifest("experiment", args.argv, flags=params, seed=params["seed"])
    manifest.flags["iters"] = args.iters
    manifest.outputs = outputs
    manifest.results = {f"snr.{k}": f"{v:.6f}" for k, v in snrs.items()}
    manifest.results["pg.stop_reason"] = pg.stop_reason.value
    manifest.results["rl.stop_reason"] = rl.stop_reason.value
    manifest.wall_time = time.perf_counter() - t0
    manifest.write(args.outdir)

    for name, value in snrs.items():
        print(f"snr_db[{name}] = {value:.3f}")
    return EXIT_OK


def cmd_verify(args):
    suite = run_suite(
        ndim=args.ndim,
        max_extent=args.max_extent,
        max_radius=args.max_radius,
        cases=args.cases,
        seed=args.seed,
    )
    for name, result in suite.results.items():
        status = "PASS" if result.passed else "FAIL"
        print(
            f"{name}: {status} ({result.cases} cases, {result.failures} failures, "
            f"max error {result.max_error:.3e})"
        )
    return EXIT_OK if suite.passed else EXIT_NUMERICAL


def cmd_metrics(args):
    reference = read_any(args.reference)
    estimate = read_any(args.estimate)
    if args.kernel is not None:
        estimate = aligned_crop(estimate, _read_kernel(args.kernel), reference.shape)
    print(f"{snr_db(reference, estimate):.3f}")
    return EXIT_OK


def cmd_matrix(args):
    h = _read_kernel(args.kernel)
    A = ExplicitConvMatrix.build(h, args.shape)
    A.write_csv(args.output)
    print(f"wrote {A.rows}x{A.cols} matrix to {args.output}")
    return EXIT_OK


def cmd_replay(args):
    entries = read_manifest(args.manifest)
    if "argv" not in entries:
        raise NdeconError(f"{args.manifest} records no command line")
    return main(shlex.split(entries["argv"]))


# =============================================================================
# Parser
# =============================================================================
def _add_simulation_args(p):
    p.add_argument("--preset", choices=sorted(PRESETS), help="experiment setup")
    p.add_argument("--phantom", choices=("lines", "texture", "file"))
    p.add_argument("--input", help="truth image for --phantom file")
    p.add_argument("--size", type=parse_shape, help="phantom rows,cols")
    p.add_argument("--lines", type=int, help="number of lines in the phantom")
    p.add_argument("--intensity", type=float, help="line intensity")
    p.add_argument("--psf", choices=("gaussian", "delta"))
    p.add_argument("--psf-size", dest="psf_size", type=parse_shape)
    p.add_argument("--sigma", type=float, help="Gaussian PSF width in pixels")
    p.add_argument("--noise-mean", dest="noise_mean", type=float)
    p.add_argument("--noise-std", dest="noise_std", type=float)
    p.add_argument("--seed", type=int, help="noise (and texture) seed")
    p.add_argument("--outdir", required=True)
    return


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ndecon",
        description="n-dimensional convolution and nonnegative deconvolution",
    )
    parser.add_argument("--threads", type=int, default=1, help="convolution threads")
    parser.add_argument(
        "--log-level",
        dest="log_level",
        default="warning",
        choices=("debug", "info", "warning", "error"),
    )
    parser.add_argument("--version", action="version", version=ndecon.__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("convolve", help="full convolution with a kernel")
    p.add_argument("--input", required=True)
    p.add_argument("--kernel", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_convolve)

    p = sub.add_parser("deconv", help="deconvolve an observation")
    p.add_argument("--observed", required=True)
    p.add_argument("--kernel", required=True)
    p.add_argument("--shape", type=parse_shape, help="estimate shape (default: inferred)")
    p.add_argument("--method", choices=("pg", "rl"), default="pg")
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--tol", type=float, help="relative stopping tolerance")
    p.add_argument("--seedless", action="store_true", help="record seed=none")
    p.add_argument("--trace-csv", dest="trace_csv")
    p.add_argument("--history", help="HDF5 file for the run history")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_deconv)

    p = sub.add_parser("simulate", help="create truth, kernel and observation")
    _add_simulation_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="simulate and compare PG with RL")
    _add_simulation_args(p)
    p.add_argument("--iters", type=int, default=200, help="iterations per solver")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("verify", help="randomized operator checks")
    p.add_argument("--ndim", type=int, default=3)
    p.add_argument("--max-extent", dest="max_extent", type=int, default=5)
    p.add_argument("--max-radius", dest="max_radius", type=int, default=2)
    p.add_argument("--cases", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("metrics", help="SNR of an estimate in dB")
    p.add_argument("--reference", required=True)
    p.add_argument("--estimate", required=True)
    p.add_argument("--kernel", help="crop an observation-sized estimate first")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("matrix", help="explicit convolution matrix as CSV")
    p.add_argument("--kernel", required=True)
    p.add_argument("--shape", type=parse_shape, required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("replay", help="re-run a manifest")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    args.argv = argv

    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        set_num_threads(args.threads)
        return args.func(args)
    except NdeconError as e:
        print(f"ndecon {args.subcommand}: {e}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        print(f"ndecon {args.subcommand}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"ndecon {args.subcommand}: {e}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())

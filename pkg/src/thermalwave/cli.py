"""Command-line entry point: ``thermalwave <command> ...``.

Exit codes: 0 success, 1 bad input, 2 numerical failure (a fit that did not
converge, or an oracle deviation above tolerance).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import calibration, files, forward, inverse, oracle, wavecore
from .errors import DivergenceError, DomainError, InputError, SingularityError
from .materials import reference_stack

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2

DEFAULT_THICKNESS_BOUNDS = (1e-6, 1e-3)


class _NumericalFailure(Exception):
    pass


def _require_grid(cfg, path):
    if cfg.grid is None:
        raise InputError("stack config has no frequencies_hz", path)
    return cfg.grid


def _write_json(path, payload):
    text = json.dumps(payload, indent=2, allow_nan=True)
    if path in (None, "-"):
        print(text)
    else:
        Path(path).write_text(text + "\n", encoding="utf-8")


def cmd_forward(args):
    cfg = files.load_stack_config(args.stack)
    grid = _require_grid(cfg, args.stack)
    spec = forward.forward_phases(cfg.stack, grid, excitation_lag=args.raw_phase)
    files.write_phase_csv(args.out, spec, with_amplitude=args.with_amplitude)
    if args.emit_plot_data:
        files.write_plot_data(args.emit_plot_data, spec.frequencies, spec.phases)
    return EXIT_OK


def cmd_synth(args):
    cfg = files.load_stack_config(args.stack)
    grid = _require_grid(cfg, args.stack)
    noise = cfg.noise or forward.NoiseModel()
    sigma_deg = math.degrees(noise.sigma) if args.noise_sigma_deg is None else args.noise_sigma_deg
    seed = noise.seed if args.seed is None else args.seed
    if sigma_deg < 0:
        raise InputError("--noise-sigma-deg must be >= 0")
    model = forward.NoiseModel.gaussian_deg(sigma_deg, seed) if sigma_deg > 0 else forward.NoiseModel()
    spec = forward.synthesize_measurement(cfg.stack, grid, model, excitation_lag=args.raw_phase)
    files.write_phase_csv(args.out, spec, with_amplitude=args.with_amplitude)
    return EXIT_OK


def _parse_bounds(text):
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise InputError(f"--bounds must be 'LOWER,UPPER' in metres, got {text!r}") from None
    if not 0 < lo < hi:
        raise InputError("--bounds must satisfy 0 < LOWER < UPPER")
    return lo, hi


def cmd_fit(args):
    cfg = files.load_stack_config(args.stack, allow_unknown=True)
    if not cfg.unknown:
        raise InputError("fit template marks no thickness as unknown ('?')", args.stack)
    data = files.read_phase_csv(args.data)
    if cfg.grid is not None:
        if len(cfg.grid) != len(data.grid):
            raise InputError(
                f"data has {len(data.grid)} frequencies but the template grid has {len(cfg.grid)}", args.data)
        if not np.allclose(cfg.grid.frequencies, data.frequencies, rtol=1e-12, atol=0):
            raise InputError("data frequencies differ from the template grid", args.data)
    lo, hi = _parse_bounds(args.bounds) if args.bounds else DEFAULT_THICKNESS_BOUNDS
    free = [f"L_{i + 1}" for i in cfg.unknown]
    problem = inverse.FitProblem(cfg.stack, data, lo, hi, free=free,
                                 start_count=args.starts, seed=args.seed)
    result = inverse.solve(problem)
    stack = problem.stacks(result.params)[0]
    report = {
        "thicknesses_m": stack.thicknesses.tolist(),
        "layers": [layer.name for layer in stack.layers],
        "fitted": free,
        **result.to_dict(),
    }
    _write_json(args.out, report)
    if args.emit_plot_data:
        model = forward.forward_phases(stack, data.grid)
        files.write_plot_data(args.emit_plot_data, model.frequencies, model.phases)
    if not result.converged:
        raise _NumericalFailure("no start converged; best-effort result written")
    return EXIT_OK


def cmd_calibrate(args):
    manifest = files.load_manifest(args.manifest)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", calibration.DegenerateDesignWarning)
        report = calibration.calibrate(manifest.batch, manifest.threshold, **manifest.options)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    _write_json(args.out, report.to_dict())
    status = "PASS" if report.passed else "FAIL"
    print(f"validation error {report.error.total:.6g} m^2 vs threshold {report.threshold:.6g}: {status}")
    if not report.converged:
        raise _NumericalFailure("calibration fits did not all converge")
    return EXIT_OK


def cmd_oracle_check(args):
    if args.stack:
        cfg = files.load_stack_config(args.stack)
        stack = cfg.stack
        grid = cfg.grid or forward.FrequencyGrid.logspace(0.5, 50.0, 10)
    else:
        stack = reference_stack(3)
        grid = forward.FrequencyGrid.logspace(0.5, 50.0, 10)
    policy = oracle.TruncationPolicy(max_order=args.orders)
    worst = 0.0
    for w in grid.omega:
        series = oracle.surface_series(stack, float(w), policy)
        closed = wavecore.surface_response(stack, float(w)).value
        worst = max(worst, abs(series - closed))
    print(f"max deviation {worst:.3e} over {len(grid)} frequencies (tol {args.tol:.1e})")
    if worst > args.tol:
        raise _NumericalFailure(f"oracle deviation {worst:.3e} exceeds tolerance {args.tol:.1e}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thermalwave", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forward", help="model phase spectrum of a stack")
    p.add_argument("--stack", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--with-amplitude", action="store_true")
    p.add_argument("--raw-phase", action="store_true", help="add the -pi/4 excitation lag")
    p.add_argument("--emit-plot-data", metavar="PATH")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("synth", help="synthetic noisy measurement")
    p.add_argument("--stack", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--noise-sigma-deg", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--with-amplitude", action="store_true")
    p.add_argument("--raw-phase", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit unknown thicknesses to a phase spectrum")
    p.add_argument("--stack", required=True, help="template with unknown thicknesses set to '?'")
    p.add_argument("--data", required=True)
    p.add_argument("--bounds", help="LOWER,UPPER thickness bounds in metres")
    p.add_argument("--starts", type=int, help="number of Latin-hypercube starts")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.add_argument("--emit-plot-data", metavar="PATH")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("calibrate", help="two-step property/thickness calibration")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("oracle-check", help="compare series summation with closed forms")
    p.add_argument("--stack")
    p.add_argument("--orders", type=int, default=oracle.DEFAULT_POLICY.max_order)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (InputError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (_NumericalFailure, DivergenceError, SingularityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

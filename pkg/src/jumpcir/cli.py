"""Command-line front end.

Subcommands: validate | simulate | convergence | mean-reversion | moments.
Every output set is written together with a manifest.json from which the
run can be reproduced bit-identically.

Exit codes: 0 success, 1 validation failure, 2 positivity violation
detected, 3 I/O or configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .model import (ConfigError, DelayCoefficient, JumpCoefficient, ModelSpec,
                    SchemeConfig, _constant_segment, load_model_file,
                    validate_assumption_b, validate_jump_step)
from .analysis import (convergence_points_to_csv, convergence_report_to_csv,
                       mean_reversion_report_to_csv, mean_reversion_study,
                       moment_study, strong_error_study)
from .noise import build_grid, derive_path_stream, sample_jump_times
from .scheme import PositivityError, simulate_path, trajectory_to_csv

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_POSITIVITY = 2
EXIT_IO = 3


def model_to_dict(model: ModelSpec, config: SchemeConfig, exponent: int) -> dict:
    seg = getattr(model.initial_segment, "constant_value", None)
    if seg is None:
        raise ValueError("only constant initial segments are serializable")
    return {
        "k1": model.k1, "k2": model.k2, "k3": model.k3, "alpha": model.alpha,
        "lambda": model.lam, "tau": model.tau, "horizon": model.horizon,
        "theta": config.theta, "m": config.m, "delta_exponent": exponent,
        "delay_coeff": {"kind": model.delay_coeff.kind,
                        "gamma": model.delay_coeff.gamma},
        "jump_coeff": {"kind": model.jump_coeff.kind,
                       "delta_scale": model.jump_coeff.scale,
                       "lipschitz_L": model.jump_coeff.lipschitz_L,
                       "positive": model.jump_coeff.positive},
        "initial_segment": {"kind": "constant", "value": seg},
    }


def model_from_dict(d: dict) -> tuple[ModelSpec, SchemeConfig, int]:
    model = ModelSpec(
        k1=d["k1"], k2=d["k2"], k3=d["k3"], alpha=d["alpha"], lam=d["lambda"],
        tau=d["tau"], horizon=d["horizon"],
        delay_coeff=DelayCoefficient(kind=d["delay_coeff"]["kind"],
                                     gamma=d["delay_coeff"]["gamma"]),
        jump_coeff=JumpCoefficient(kind=d["jump_coeff"]["kind"],
                                   scale=d["jump_coeff"]["delta_scale"],
                                   lipschitz_L=d["jump_coeff"]["lipschitz_L"],
                                   positive=d["jump_coeff"]["positive"]),
        initial_segment=_constant_segment(d["initial_segment"]["value"]),
    )
    exponent = int(d["delta_exponent"])
    config = SchemeConfig(delta=model.tau * 2.0 ** (-exponent),
                          theta=d["theta"], m=d["m"])
    return model, config, exponent


def _write_manifest(out_dir, subcommand, model, config, exponent, seed,
                    extra, duration) -> None:
    manifest = {
        "subcommand": subcommand,
        "model": model_to_dict(model, config, exponent),
        "master_seed": seed,
        "out_dir": str(out_dir),
        "tool_version": __version__,
        "duration_seconds": duration,
    }
    manifest.update(extra)
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load(args):
    model, config, exponent = load_model_file(args.config)
    if getattr(args, "theta", None) is not None:
        config = dataclasses.replace(config, theta=args.theta)
    return model, config, exponent


def cmd_validate(args) -> int:
    model, config, _ = _load(args)
    rb = validate_assumption_b(model, config)
    rj = validate_jump_step(model, config)
    c1, c2, c3 = rb.components
    print(f"step-size bound components: {c1:.4g} ^ {c2:.4g} ^ {c3:.4g}")
    print(f"Assumption B bound {rb.bound:.4g}: "
          f"{'PASS' if rb.satisfied else 'FAIL'} (delta = {config.delta:.6g})")
    print(f"jump bound {rj.bound:.4g}: {'PASS' if rj.satisfied else 'FAIL'}")
    return EXIT_OK if (rb.satisfied and rj.satisfied) else EXIT_VALIDATION


def cmd_simulate(args) -> int:
    model, config, exponent = _load(args)
    if args.paths < 1:
        print("error: --paths must be >= 1", file=sys.stderr)
        return EXIT_IO
    os.makedirs(args.out, exist_ok=True)
    t0 = time.monotonic()
    l = 2 ** exponent
    for p in range(args.paths):
        rng_p = derive_path_stream(args.seed, p, "poisson")
        jumps = sample_jump_times(model.lam, model.horizon, rng_p)
        grid = build_grid(model.tau, model.horizon, l, jumps)
        dts = np.diff(grid.positive_nodes)
        rng_w = derive_path_stream(args.seed, p, "wiener")
        dW = rng_w.standard_normal(dts.size) * np.sqrt(dts)
        traj = simulate_path(model, config, grid, dW)
        trajectory_to_csv(traj, os.path.join(args.out, f"path_{p:05d}.csv"))
    _write_manifest(args.out, "simulate", model, config, exponent, args.seed,
                    {"paths": args.paths}, time.monotonic() - t0)
    return EXIT_OK


def cmd_convergence(args) -> int:
    model, config, _ = _load(args)
    exponents = args.delta_exponents
    os.makedirs(args.out, exist_ok=True)
    t0 = time.monotonic()
    deltas = [model.tau * 2.0 ** (-e) for e in exponents]
    if len(deltas) < 2:
        print("warning: a single step size gives no rate estimate", file=sys.stderr)
    report = strong_error_study(
        model, config, deltas, M=args.batches, L=args.per_batch,
        ref_delta=model.tau * 2.0 ** (-args.ref_exponent),
        master_seed=args.seed, threads=args.threads, sup_error=args.sup_error)
    convergence_report_to_csv(report, os.path.join(args.out, "convergence.csv"),
                              tau=model.tau)
    convergence_points_to_csv(report, os.path.join(args.out, "convergence_points.csv"))
    _write_manifest(args.out, "convergence", model, config,
                    exponents[0], args.seed,
                    {"delta_exponents": list(exponents), "batches": args.batches,
                     "per_batch": args.per_batch, "ref_exponent": args.ref_exponent,
                     "threads": args.threads, "sup_error": args.sup_error},
                    time.monotonic() - t0)
    if not math.isnan(report.fitted_slope):
        print(f"fitted slope {report.fitted_slope:.4f} "
              f"(theoretical lower bound {report.theoretical_slope_lower_bound:.4f})")
    for d, e in zip(report.deltas, report.errors):
        print(f"  delta=2^{math.log2(d / model.tau):+.0f}  error={e:.6g}")
    return EXIT_OK


def cmd_mean_reversion(args) -> int:
    model, config, exponent = _load(args)
    os.makedirs(args.out, exist_ok=True)
    t0 = time.monotonic()
    T_long = model.tau * args.t_multiplier
    report = mean_reversion_study(model, config, T_long, args.paths, args.seed)
    mean_reversion_report_to_csv(report, os.path.join(args.out, "mean_reversion.csv"))
    _write_manifest(args.out, "mean-reversion", model, config, exponent,
                    args.seed, {"t_multiplier": args.t_multiplier,
                                "paths": args.paths},
                    time.monotonic() - t0)
    print(f"terminal mean {report.estimated_means[-1]:.6g} "
          f"(closed form {report.closed_form_means[-1]:.6g}, "
          f"theta bound {report.theta_bound:.6g})")
    return EXIT_OK


def cmd_moments(args) -> int:
    model, config, exponent = _load(args)
    os.makedirs(args.out, exist_ok=True)
    t0 = time.monotonic()
    results = moment_study(model, config, args.p, args.paths, args.seed)
    out_path = os.path.join(args.out, "moments.csv")
    with open(out_path, "w", newline="") as fh:
        fh.write("p,sup_moment,time_at_sup,stderr_at_sup\n")
        for p, row in results.items():
            fh.write(f"{p:.17g},{row['sup_moment']:.17g},"
                     f"{row['time_at_sup']:.17g},{row['stderr_at_sup']:.17g}\n")
    _write_manifest(args.out, "moments", model, config, exponent, args.seed,
                    {"p_list": list(args.p), "paths": args.paths},
                    time.monotonic() - t0)
    for p, row in results.items():
        print(f"sup E[y^{p:g}] ~= {row['sup_moment']:.6g} "
              f"+- {row['stderr_at_sup']:.2g} at t={row['time_at_sup']:.4g}")
    return EXIT_OK


def rerun_from_manifest(manifest_path, out_dir=None) -> int:
    """Re-execute a study from its manifest; outputs are byte-identical."""
    with open(manifest_path) as fh:
        man = json.load(fh)
    model, config, exponent = model_from_dict(man["model"])
    out = out_dir or man["out_dir"]

    import tempfile

    with tempfile.NamedTemporaryFile("w", suffix=".toml", delete=False) as fh:
        fh.write(_model_toml(man["model"]))
        cfg_path = fh.name
    try:
        sub = man["subcommand"]
        argv = ["--config", cfg_path, "--seed", str(man["master_seed"]),
                "--out", str(out)]
        if sub == "simulate":
            argv = [sub] + argv + ["--paths", str(man["paths"])]
        elif sub == "convergence":
            argv = [sub] + argv + [
                "--delta-exponents", ",".join(str(e) for e in man["delta_exponents"]),
                "--batches", str(man["batches"]),
                "--per-batch", str(man["per_batch"]),
                "--ref-exponent", str(man["ref_exponent"])]
            if man.get("sup_error"):
                argv.append("--sup-error")
            if man.get("threads"):
                argv += ["--threads", str(man["threads"])]
        elif sub == "mean-reversion":
            argv = [sub] + argv + ["--t-multiplier", str(man["t_multiplier"]),
                                   "--paths", str(man["paths"])]
        elif sub == "moments":
            argv = [sub] + argv + ["--paths", str(man["paths"]),
                                   "--p", ",".join(str(p) for p in man["p_list"])]
        else:
            raise ValueError(f"manifest subcommand {sub!r} is not reproducible")
        return main(argv)
    finally:
        os.unlink(cfg_path)


def _model_toml(d: dict) -> str:
    lines = [f"k1 = {d['k1']!r}", f"k2 = {d['k2']!r}", f"k3 = {d['k3']!r}",
             f"alpha = {d['alpha']!r}", f"lambda = {d['lambda']!r}",
             f"tau = {d['tau']!r}", f"horizon = {d['horizon']!r}",
             f"theta = {d['theta']!r}", f"m = {d['m']!r}",
             f"delta_exponent = {int(d['delta_exponent'])}",
             "", "[delay_coeff]", f"kind = \"{d['delay_coeff']['kind']}\"",
             f"gamma = {d['delay_coeff']['gamma']!r}",
             "", "[jump_coeff]", f"kind = \"{d['jump_coeff']['kind']}\"",
             f"delta_scale = {d['jump_coeff']['delta_scale']!r}",
             f"lipschitz_L = {d['jump_coeff']['lipschitz_L']!r}",
             f"positive = {'true' if d['jump_coeff']['positive'] else 'false'}",
             "", "[initial_segment]", "kind = \"constant\"",
             f"value = {d['initial_segment']['value']!r}"]
    return "\n".join(lines) + "\n"


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jumpcir",
        description="Positivity-preserving simulation of jump-delay CIR/CEV models")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, out=True):
        p.add_argument("--config", required=True, help="model TOML file")
        p.add_argument("--seed", type=int, default=0, help="master seed (64-bit)")
        p.add_argument("--theta", type=float, default=None,
                       help="override the implicitness level")
        if out:
            p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("validate", help="check the step-size conditions")
    common(p, out=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="write per-path trajectory CSVs")
    common(p)
    p.add_argument("--paths", type=int, default=2)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("convergence", help="coupled-reference strong error study")
    common(p)
    p.add_argument("--delta-exponents", type=_int_list, default=[5, 6, 7, 8, 9],
                   help="comma-separated e with delta = tau*2^-e")
    p.add_argument("--batches", type=int, default=50)
    p.add_argument("--per-batch", type=int, default=100)
    p.add_argument("--ref-exponent", type=int, default=12)
    p.add_argument("--threads", type=int, default=os.cpu_count())
    p.add_argument("--sup-error", action="store_true",
                   help="sup-over-time estimator instead of the endpoint one")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("mean-reversion", help="Monte Carlo mean vs closed form")
    common(p)
    p.add_argument("--t-multiplier", type=int, default=1,
                   help="horizon as a multiple of tau")
    p.add_argument("--paths", type=int, default=10_000)
    p.set_defaults(func=cmd_mean_reversion)

    p = sub.add_parser("moments", help="sup-over-time moment estimates")
    common(p)
    p.add_argument("--paths", type=int, default=10_000)
    p.add_argument("--p", type=_float_list, default=[1.0, 2.0],
                   help="comma-separated moment orders")
    p.set_defaults(func=cmd_moments)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PositivityError as exc:
        print(f"positivity violation: {exc}", file=sys.stderr)
        return EXIT_POSITIVITY
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Command-line driver: simulate, filter, evaluate, reproduce.

Exit codes: 0 success, 1 I/O failure, 2 config or shape problem (all
violations printed), 3 degenerate-weights abort, 4 reproduction band
failure. No command writes outside its --out directory.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .configio import DEFAULT_SEED, load_experiment
from .evaluate import DEFAULT_BURN_IN, emit_report, evaluate_run
from .filtering import DEGENERATE_POLICIES, FilterConfig, ShapeMismatchError, run_filter
from .kernels import DegenerateWeightsError
from .plots import save_indicator_figure, save_state_figure
from .reproduce import STUDY_BUILDERS, run_study
from .runio import (
    load_filter_output,
    load_ground_truth,
    load_measurements,
    save_filter_output,
    save_ground_truth,
)
from .simulate import simulate
from .types import InvalidConfigError, validate_config

__all__ = ["main"]

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3
EXIT_BAND = 4


def _fail(code: int, *messages: str) -> int:
    for msg in messages:
        print(msg, file=sys.stderr)
    return code


def _load_validated(config_path: str, seed: int | None):
    """Parsed config + schedule, or an exit code after printing violations."""
    try:
        cfg, schedule = load_experiment(config_path, seed=seed)
    except FileNotFoundError as exc:
        return _fail(EXIT_IO, f"cannot read config: {exc}")
    except (ValueError, KeyError, TypeError) as exc:
        return _fail(EXIT_CONFIG, f"config error: {exc}")
    violations = validate_config(cfg)
    if violations:
        return _fail(EXIT_CONFIG, *(f"config violation: {v}" for v in violations))
    return cfg, schedule


def cmd_simulate(args: argparse.Namespace) -> int:
    loaded = _load_validated(args.config, args.seed)
    if isinstance(loaded, int):
        return loaded
    cfg, schedule = loaded
    try:
        truth = simulate(cfg, schedule)
    except InvalidConfigError as exc:
        return _fail(EXIT_CONFIG, *(f"config violation: {v}" for v in exc.violations))
    try:
        save_ground_truth(truth, cfg, args.out)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write outputs: {exc}")
    return EXIT_OK


def cmd_filter(args: argparse.Namespace) -> int:
    loaded = _load_validated(args.config, args.seed)
    if isinstance(loaded, int):
        return loaded
    cfg, _ = loaded
    try:
        measurements = load_measurements(args.data, cfg)
    except FileNotFoundError as exc:
        return _fail(EXIT_IO, f"cannot read measurements: {exc}")
    except ValueError as exc:
        return _fail(EXIT_CONFIG, f"measurement data mismatch: {exc}")
    fcfg = FilterConfig(
        num_particles=args.particles,
        seed=cfg.seed if args.seed is None else args.seed,
        store_snapshots=args.snapshot,
        degenerate_policy=args.degenerate_policy,
    )
    try:
        output = run_filter(cfg, fcfg, measurements)
    except ShapeMismatchError as exc:
        return _fail(EXIT_CONFIG, f"shape mismatch: {exc}")
    except DegenerateWeightsError as exc:
        return _fail(EXIT_DEGENERATE, f"degenerate weights: {exc}")
    except ValueError as exc:
        return _fail(EXIT_CONFIG, f"filter configuration: {exc}")
    try:
        save_filter_output(
            output,
            cfg,
            args.out,
            extra_metadata={
                "num_particles": fcfg.num_particles,
                "filter_seed": fcfg.seed,
                "degenerate_policy": fcfg.degenerate_policy,
            },
        )
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write outputs: {exc}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    loaded = _load_validated(args.config, None)
    if isinstance(loaded, int):
        return loaded
    cfg, _ = loaded
    try:
        truth = load_ground_truth(args.truth, cfg)
        output = load_filter_output(args.est, cfg)
    except FileNotFoundError as exc:
        return _fail(EXIT_IO, f"cannot read run data: {exc}")
    except ValueError as exc:
        return _fail(EXIT_CONFIG, f"run data mismatch: {exc}")
    try:
        report = evaluate_run(truth, output, args.burn_in)
    except ValueError as exc:
        return _fail(EXIT_CONFIG, f"evaluation: {exc}")
    out = Path(args.out)
    try:
        emit_report(report, out)
        save_state_figure(truth, output, cfg.num_scales - 1, out / "states_coarse.png")
        save_indicator_figure(truth, output, out / "indicators.png")
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write report: {exc}")
    return EXIT_OK


def cmd_reproduce(args: argparse.Namespace) -> int:
    try:
        result = run_study(
            args.which,
            num_seeds=args.seeds,
            seed_base=args.seed_base,
            particles=args.particles,
            burn_in=args.burn_in,
            out_dir=args.out,
            degenerate_policy=args.degenerate_policy,
        )
    except DegenerateWeightsError as exc:
        return _fail(EXIT_DEGENERATE, f"degenerate weights: {exc}")
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write outputs: {exc}")
    except ValueError as exc:
        return _fail(EXIT_CONFIG, f"reproduce: {exc}")
    for band in result.bands:
        print(band.line())
    return EXIT_OK if result.passed else EXIT_BAND


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mspf",
        description="Multiscale switching state-space simulation and particle filtering.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate ground truth from a config")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    sim.set_defaults(func=cmd_simulate)

    flt = sub.add_parser("filter", help="run the particle filter over saved measurements")
    flt.add_argument("--config", required=True)
    flt.add_argument("--data", required=True, help="simulation run directory")
    flt.add_argument("--out", required=True)
    flt.add_argument("--particles", type=int, default=1000)
    flt.add_argument("--seed", type=int, default=None, help="override the config seed")
    flt.add_argument("--snapshot", action="store_true", help="store per-coarse-step particle clouds")
    flt.add_argument("--degenerate-policy", choices=DEGENERATE_POLICIES, default="uniform")
    flt.set_defaults(func=cmd_filter)

    ev = sub.add_parser("evaluate", help="score a filter run against its ground truth")
    ev.add_argument("--config", required=True)
    ev.add_argument("--truth", required=True, help="simulation run directory")
    ev.add_argument("--est", required=True, help="filter run directory")
    ev.add_argument("--out", required=True)
    ev.add_argument("--burn-in", type=int, default=DEFAULT_BURN_IN)
    ev.set_defaults(func=cmd_evaluate)

    rep = sub.add_parser("reproduce", help="run a full study and check its bands")
    rep.add_argument("which", choices=sorted(STUDY_BUILDERS))
    rep.add_argument("--out", required=True)
    rep.add_argument("--seeds", type=int, default=5)
    rep.add_argument("--seed-base", type=int, default=DEFAULT_SEED)
    rep.add_argument("--particles", type=int, default=1000)
    rep.add_argument("--burn-in", type=int, default=DEFAULT_BURN_IN)
    rep.add_argument("--degenerate-policy", choices=DEGENERATE_POLICIES, default="uniform")
    rep.set_defaults(func=cmd_reproduce)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

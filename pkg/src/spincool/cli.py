"""Command line interface.

Subcommands: run, resume, check, estimate-t2, dump-couplings.
Exit codes: 0 success, 2 config error, 3 numerical abort, 4 tracking lost
(only when halt_on_tracking_lost is enabled).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .errors import ConfigError, SimulationAbort, TrackingLost
from .experiment import resume as resume_run
from .experiment import run as run_experiment
from .lattice import LatticeSpec, build_couplings, dump_couplings_csv
from .observables import check_conditions, estimate_t2, infinite_temperature_sigma_my

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_TRACKING = 4


def _parse_dims(text: str) -> tuple[int, int, int]:
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise ConfigError(f"dims must look like LxLyLz, got {text!r}")
    try:
        return tuple(int(p) for p in parts)  # type: ignore[return-value]
    except ValueError as exc:
        raise ConfigError(f"dims must be integers, got {text!r}") from exc


def _cmd_run(args) -> int:
    config = load_config(args.config, seed_override=args.seed)
    result = run_experiment(config, out_dir=args.out)
    print(json.dumps(result.as_dict(), indent=2))
    if result.halted_on_tracking:
        return EXIT_TRACKING
    return EXIT_OK


def _cmd_resume(args) -> int:
    overrides = {}
    if args.override:
        try:
            overrides = json.loads(args.override)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--override is not valid JSON: {exc}") from exc
    if args.t_end is not None:
        overrides.setdefault("run", {})["t_end"] = args.t_end
    result = resume_run(args.checkpoint, overrides=overrides, out_dir=args.out)
    print(json.dumps(result.as_dict(), indent=2))
    if result.halted_on_tracking:
        return EXIT_TRACKING
    return EXIT_OK


def _cmd_check(args) -> int:
    if args.config is not None:
        config = load_config(args.config)
        n = config.lattice.n_sites
        omega = config.feedback.omega(0.0) if args.omega is None else args.omega
        g0 = config.feedback.g0(0.0) if args.g0 is None else args.g0
        if args.fdot is None:
            if config.feedback.steering.kind != "linear":
                raise ConfigError("--fdot required when the config steering is not linear")
            fdot = config.feedback.steering.fdot
        else:
            fdot = args.fdot
    else:
        if args.n_spins is None:
            raise ConfigError("either --config or --n-spins is required")
        n = args.n_spins
        omega = 7.0 if args.omega is None else args.omega
        g0 = 0.2 if args.g0 is None else args.g0
        fdot = -0.005 if args.fdot is None else args.fdot
    sigma = args.sigma_my if args.sigma_my is not None else infinite_temperature_sigma_my(n)
    report = check_conditions(
        n_spins=n, mz=args.mz, sigma_my=sigma, fdot=fdot, omega=omega, g0=g0, t2=args.t2
    )
    print(json.dumps(report.as_dict(), indent=2))
    return EXIT_OK


def _cmd_estimate_t2(args) -> int:
    data = np.genfromtxt(args.telemetry, delimiter=",", names=True)
    if data.dtype.names is None or "t" not in data.dtype.names:
        raise ConfigError(f"{args.telemetry} is not a telemetry CSV (missing header)")
    if args.column not in data.dtype.names:
        raise ConfigError(f"column {args.column!r} not found in {args.telemetry}")
    series = np.column_stack([data["t"], data[args.column]])
    try:
        t2 = estimate_t2(series, method=args.method)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(json.dumps({"t2": t2, "method": args.method, "column": args.column}))
    return EXIT_OK


def _cmd_dump_couplings(args) -> int:
    spec = LatticeSpec(
        dims=_parse_dims(args.dims),
        periodic=not args.open_boundaries,
        image_convention=args.image_convention,
    )
    table = build_couplings(spec)
    if args.out is None:
        dump_couplings_csv(table, sys.stdout)
    else:
        with open(args.out, "w") as fh:
            dump_couplings_csv(table, fh)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spincool",
        description="Feedback-control cooling simulator for classical spin lattices",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a run from a JSON config file")
    p.add_argument("--config", required=True, help="run config JSON file")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default="spincool_out", help="output directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("resume", help="continue from a checkpoint")
    p.add_argument("checkpoint", help="checkpoint file")
    p.add_argument("--t-end", type=float, default=None, help="extend/override t_end")
    p.add_argument("--override", default=None, help="partial config JSON to merge")
    p.add_argument("--out", default="spincool_out", help="output directory")
    p.set_defaults(func=_cmd_resume)

    p = sub.add_parser("check", help="evaluate feasibility conditions (i)-(iii)")
    p.add_argument("--config", default=None, help="read parameters from a run config")
    p.add_argument("--n-spins", type=int, default=None)
    p.add_argument("--mz", type=float, default=0.0, help="current polarization M_z")
    p.add_argument("--sigma-my", type=float, default=None, help="default: sqrt(N/3)")
    p.add_argument("--fdot", type=float, default=None)
    p.add_argument("--omega", type=float, default=None)
    p.add_argument("--g0", type=float, default=None)
    p.add_argument("--t2", type=float, required=True, help="transverse correlation time")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("estimate-t2", help="T2 from a telemetry CSV")
    p.add_argument("telemetry", help="telemetry CSV file")
    p.add_argument("--method", choices=("one_over_e", "integral"), default="one_over_e")
    p.add_argument("--column", default="my")
    p.set_defaults(func=_cmd_estimate_t2)

    p = sub.add_parser("dump-couplings", help="emit the coupling table as CSV")
    p.add_argument("--dims", required=True, help="lattice dims, e.g. 10x10x10")
    p.add_argument(
        "--image-convention",
        choices=("minimum_image_split", "minimum_image_drop"),
        default="minimum_image_split",
    )
    p.add_argument("--open-boundaries", action="store_true", help="disable periodic wrapping")
    p.add_argument("--out", default=None, help="output CSV path (default: stdout)")
    p.set_defaults(func=_cmd_dump_couplings)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        if exc.checkpoint_path:
            print(f"last good state: {exc.checkpoint_path}", file=sys.stderr)
        return EXIT_NUMERIC
    except TrackingLost as exc:
        print(f"tracking lost: {exc}", file=sys.stderr)
        return EXIT_TRACKING
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

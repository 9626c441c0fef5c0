"""Operator command line: run, serve, bench, replay, fit, validate.

Exit codes: 0 success, 2 configuration/validation error, 3 runtime error.
stdout carries machine-parsable key=value lines; diagnostics go to stderr.
The gateway auth token can be overridden with the MARSIM_TOKEN
environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import sys
import threading

from .errors import MarsimError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _parse_time_scale(value: str):
    if value == "max":
        return "max"
    try:
        k = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"time scale must be a number or 'max', got {value!r}")
    if k <= 0:
        raise argparse.ArgumentTypeError("time scale must be positive")
    return k


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marsim",
        description="Deterministic multi-domain maritime robotics simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario to completion")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--time-scale", type=_parse_time_scale, default=None)
    p_run.add_argument("--log", default=None, help="event log JSONL path")
    p_run.add_argument("--duration", type=float, default=None)
    p_run.add_argument("--workers", type=int, default=1)

    p_serve = sub.add_parser("serve", help="run a scenario with the C2 gateway")
    p_serve.add_argument("--scenario", required=True)
    p_serve.add_argument("--bind", default="127.0.0.1:8750", help="host:port")
    p_serve.add_argument("--token", default=None)
    p_serve.add_argument("--time-scale", type=_parse_time_scale, default=None)
    p_serve.add_argument("--log", default=None)
    p_serve.add_argument("--workers", type=int, default=1)

    p_bench = sub.add_parser("bench", help="synthetic fleet benchmark")
    p_bench.add_argument("--vehicles", type=int, default=64)
    p_bench.add_argument("--fidelity", choices=("kin", "dyn"), default="dyn")
    p_bench.add_argument("--seconds", type=float, default=10.0)
    p_bench.add_argument("--workers", type=int, default=1)
    p_bench.add_argument("--warmup", type=float, default=1.0,
                         help="sim seconds run first to absorb jit compilation")

    p_replay = sub.add_parser("replay", help="re-simulate a trajectory log")
    p_replay.add_argument("--log", required=True, help="trajectory JSONL")
    p_replay.add_argument("--vehicle-spec", required=True)
    p_replay.add_argument("--residual", default=None, help="residual model JSON")

    p_fit = sub.add_parser("fit", help="fit a residual model from a log")
    p_fit.add_argument("--log", required=True)
    p_fit.add_argument("--vehicle-spec", required=True)
    p_fit.add_argument("--ridge", type=float, default=0.0)
    p_fit.add_argument("--out", default=None, help="write the model JSON here")

    p_val = sub.add_parser("validate", help="check scenario or vehicle documents")
    p_val.add_argument("paths", nargs="+")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except MarsimError as e:
        print(f"error: {e}", file=sys.stderr)
        if type(e).__name__ in ("SchemaError", "MissingAsset", "ModelInvalid", "BindError"):
            return EXIT_CONFIG
        return EXIT_RUNTIME
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def _dispatch(args) -> int:
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "serve":
        return _cmd_serve(args)
    if args.command == "bench":
        return _cmd_bench(args)
    if args.command == "replay":
        return _cmd_replay(args)
    if args.command == "fit":
        return _cmd_fit(args)
    if args.command == "validate":
        return _cmd_validate(args)
    return EXIT_CONFIG  # pragma: no cover


def _cmd_run(args) -> int:
    from . import kernel

    config = kernel.load_scenario(args.scenario)
    if args.seed is not None:
        config.seed = args.seed
    if args.duration is not None:
        config.duration = args.duration
    pacing = args.time_scale
    _, stats = kernel.run(
        config, log_path=args.log, workers=args.workers, pacing=pacing
    )
    print(stats.to_kv())
    return EXIT_OK


def resolve_token(flag_value: str | None, config_token: str) -> str:
    """--token wins, then MARSIM_TOKEN, then the scenario's auth_token."""
    if flag_value is not None:
        return flag_value
    return os.environ.get("MARSIM_TOKEN", config_token)


def _cmd_serve(args) -> int:
    from . import kernel
    from .c2.server import serve_in_thread

    config = kernel.load_scenario(args.scenario)
    token = resolve_token(args.token, config.auth_token)
    host, _, port = args.bind.partition(":")
    handle = serve_in_thread(
        config,
        host=host or "127.0.0.1",
        port=int(port or 0),
        token=token,
        pacing=args.time_scale,
        log_path=args.log,
        workers=args.workers,
    )
    print(f"listening=ws://{handle.host}:{handle.port}/ws", flush=True)
    done = threading.Event()

    def _sig(_signum, _frame):
        done.set()

    signal.signal(signal.SIGINT, _sig)
    signal.signal(signal.SIGTERM, _sig)
    try:
        while not done.is_set() and not handle.done():
            done.wait(0.2)
    finally:
        handle.stop()
        stats = handle.gateway.live_stats()
        print(
            f"ticks={stats['ticks']} sim_time={stats['sim_time']:.3f} "
            f"rt_factor={stats['rt_factor']:.2f}"
        )
    return EXIT_OK


def _cmd_bench(args) -> int:
    from . import kernel

    if args.warmup > 0:
        warm = kernel.synthetic_fleet_config(
            args.vehicles, args.fidelity, duration=args.warmup
        )
        kernel.run(warm, workers=args.workers)
    config = kernel.synthetic_fleet_config(
        args.vehicles, args.fidelity, duration=args.seconds
    )
    _, stats = kernel.run(config, workers=args.workers)
    print(
        f"vehicles={args.vehicles} fidelity={args.fidelity} workers={args.workers} "
        + stats.to_kv()
    )
    target = 50.0
    note = "meets" if stats.achieved_rt_factor >= target else "below"
    print(f"rt_target=50 rt_status={note}", file=sys.stderr)
    return EXIT_OK


def _cmd_replay(args) -> int:
    from . import sim2real
    from .vehicles import load_vehicle_spec

    spec = load_vehicle_spec(args.vehicle_spec)
    log = sim2real.load_trajectory(args.log)
    residual = None
    if args.residual:
        with open(args.residual) as f:
            residual = sim2real.ResidualModel.from_json(json.load(f))
    report = sim2real.replay(log, spec, residual)
    print(report.summary())
    return EXIT_OK


def _cmd_fit(args) -> int:
    from . import sim2real
    from .vehicles import load_vehicle_spec

    spec = load_vehicle_spec(args.vehicle_spec)
    log = sim2real.load_trajectory(args.log)
    report, model = sim2real.fit_from_log(log, spec, ridge=args.ridge)
    doc = model.to_json()
    doc["fit"] = {
        "rms_before": [float(v) for v in report.rms_before],
        "rms_after": [float(v) for v in report.rms_after],
        "samples": report.sample_count,
        "condition_number": report.condition_number,
        "ridge": report.ridge,
        "rank_deficient": report.rank_deficient,
    }
    text = json.dumps(doc, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text + "\n")
    print(text)
    return EXIT_OK


def _cmd_validate(args) -> int:
    from . import kernel
    from .vehicles import load_vehicle_spec

    for path in args.paths:
        with open(path) as f:
            doc = json.load(f)
        if "vehicles" in doc and "origin" in doc:
            kernel.load_scenario(path)
            kind = "scenario"
        else:
            load_vehicle_spec(path)
            kind = "vehicle"
        print(f"valid={path} kind={kind}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: run, check-rigidity, solve-motion, metrics, serve, replay."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import engine, scenario
from .core import MotionCommand, solve_motion_parameters
from .errors import (
    FormationBrokenError,
    LogFormatError,
    ScenarioError,
    UnrealizableMotionError,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INVALID_SCENARIO = 2
EXIT_FORMATION_BROKEN = 3
EXIT_UNREALIZABLE = 4


def _print_metrics(summary: engine.RunMetrics, as_json: bool) -> None:
    if as_json:
        print(json.dumps(summary.to_dict(), indent=2))
        return
    d = summary.to_dict()
    print(f"duration            {d['duration_s']:.1f} s")
    if d["settling_time_s"] is None:
        print(f"settling (<{summary.settle_threshold * 1e3:g} mm)   never")
    else:
        print(f"settling (<{summary.settle_threshold * 1e3:g} mm)   {d['settling_time_s']:.1f} s")
    print(f"centroid moved      {d['centroid_displacement_m']:.4f} m "
          f"(path {d['centroid_path_length_m']:.4f} m)")
    print(f"tail drift speed    {d['mean_drift_speed_m_per_s'] * 1e3:.3f} mm/s")
    mean_tail = np.array(d["steady_error_mean_tail_m"])
    mean_head = np.array(d["steady_error_mean_head_m"])
    print("edge   mean e tail [mm]   mean e head [mm]   mu_hat [mm]")
    for k in range(len(mean_tail)):
        mu = d["mu_hat_terminal_m"].get(str(k))
        mu_text = f"{mu * 1e3:12.3f}" if mu is not None else "           -"
        print(f"{k:4d}   {mean_tail[k] * 1e3:16.3f}   {mean_head[k] * 1e3:16.3f}   {mu_text}")


def cmd_run(args) -> int:
    try:
        scn = scenario.resolve_scenario(args.scenario, seed_override=args.seed)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_INVALID_SCENARIO
    config = scn.config
    if args.duration is not None:
        config.duration = args.duration
        digest = scenario.scenario_digest({**scn.raw, "sim": {
            **scn.raw.get("sim", {}), "duration": args.duration}})
    else:
        digest = scn.digest
    try:
        records = engine.run(config, scn.schedule)
    except FormationBrokenError as exc:
        print(f"formation broken: {exc}", file=sys.stderr)
        if args.log:
            scenario.write_log(exc.records, args.log, digest=digest)
        return EXIT_FORMATION_BROKEN
    if args.log:
        scenario.write_log(records, args.log, digest=digest)
    if records:
        _print_metrics(engine.metrics(records), args.json)
    else:
        print("no ticks executed (duration 0)")
    return EXIT_OK


def cmd_check_rigidity(args) -> int:
    try:
        scn = scenario.resolve_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_INVALID_SCENARIO
    report = scn.config.shape.rigidity()
    print(f"classification: {report.classification}")
    print(f"rigidity rank:  {report.rank} (rigid requires {2 * scn.config.shape.graph.n - 3})")
    print(f"motion dof:     {report.dof}")
    return EXIT_OK if report.is_rigid else EXIT_CHECK_FAILED


def cmd_solve_motion(args) -> int:
    try:
        scn = scenario.resolve_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_INVALID_SCENARIO
    shape = scn.config.shape
    report = shape.rigidity()
    if not report.is_rigid:
        print(f"shape is {report.classification}, not infinitesimally rigid", file=sys.stderr)
        return EXIT_UNREALIZABLE
    cmd = MotionCommand(vx=args.vx, vy=args.vy, omega=args.omega, scale=args.scale)
    try:
        solution = solve_motion_parameters(shape, cmd)
    except UnrealizableMotionError as exc:
        print(f"unrealizable motion: {exc}", file=sys.stderr)
        return EXIT_UNREALIZABLE
    print("robot  edge   sigma [m/s]")
    for (robot, k), value in sorted(solution.params.sigma.items()):
        print(f"{robot:5d}  {k:4d}   {value: .9f}")
    print("robot  residual [m/s]")
    for robot, res in enumerate(solution.residuals):
        print(f"{robot:5d}  {res:.3e}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    try:
        records, _ = scenario.read_log(args.log)
    except (LogFormatError, OSError) as exc:
        print(f"log error: {exc}", file=sys.stderr)
        return EXIT_INVALID_SCENARIO
    if not records:
        print("log has no data rows")
        return EXIT_OK
    _print_metrics(engine.metrics(records), args.json)
    return EXIT_OK


def cmd_serve(args) -> int:
    from . import bridge

    try:
        scn = scenario.resolve_scenario(args.scenario, seed_override=args.seed)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_INVALID_SCENARIO
    if args.duration is not None:
        scn.config.duration = args.duration
    try:
        bridge.serve_forever(
            scn,
            host=args.host,
            port=args.port,
            stream_rate=args.stream_rate,
            speed=args.speed,
            command_log=args.command_log,
            until_duration=args.until_duration,
        )
    except OSError as exc:
        print(f"cannot serve: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_replay(args) -> int:
    from . import bridge

    try:
        records, digest = scenario.read_log(args.log)
    except (LogFormatError, OSError) as exc:
        print(f"log error: {exc}", file=sys.stderr)
        return EXIT_INVALID_SCENARIO
    try:
        bridge.replay_forever(
            records, digest, host=args.host, port=args.port, speed=args.speed
        )
    except OSError as exc:
        print(f"cannot serve: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="formsim",
        description="Distance-based formation control simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a scenario headlessly and print metrics")
    p.add_argument("--scenario", required=True, help="scenario file path or bundled name")
    p.add_argument("--log", help="write the trajectory CSV here")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--duration", type=float, help="override the run duration [s]")
    p.add_argument("--json", action="store_true", help="print metrics as JSON")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check-rigidity", help="classify the scenario's shape")
    p.add_argument("--scenario", required=True)
    p.set_defaults(func=cmd_check_rigidity)

    p = sub.add_parser("solve-motion", help="print motion parameters for a command")
    p.add_argument("--scenario", required=True)
    p.add_argument("--vx", type=float, default=0.0, help="shape-frame x velocity [m/s]")
    p.add_argument("--vy", type=float, default=0.0, help="shape-frame y velocity [m/s]")
    p.add_argument("--omega", type=float, default=0.0, help="rotation rate [rad/s]")
    p.add_argument("--scale", type=float, default=0.0, help="scaling rate [1/s]")
    p.set_defaults(func=cmd_solve_motion)

    p = sub.add_parser("metrics", help="summarize a stored trajectory log")
    p.add_argument("--log", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("serve", help="run paced in real time with live telemetry")
    p.add_argument("--scenario", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--seed", type=int)
    p.add_argument("--duration", type=float, help="override the run duration [s]")
    p.add_argument("--stream-rate", type=float, default=20.0, help="snapshots per second")
    p.add_argument("--speed", type=float, default=1.0, help="pacing factor (1 = real time)")
    p.add_argument("--command-log", help="append applied commands as JSON lines here")
    p.add_argument(
        "--until-duration",
        action="store_true",
        help="stop after the scenario duration instead of running indefinitely",
    )
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="re-emit a stored log over the telemetry protocol")
    p.add_argument("--log", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--speed", type=float, default=1.0)
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

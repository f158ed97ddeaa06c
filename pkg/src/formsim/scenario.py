"""Scenario files, trajectory logs, and their validation.

Scenarios are single JSON documents; logs are CSV with a leading comment
line carrying the schema version and a content digest of the scenario that
produced them. Units are SI throughout; no unit annotations in data rows.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .control import EstimatorAssignment
from .core import FormationGraph, MotionCommand, ShapeSpec
from .engine import SimConfig, TickRecord
from .errors import ScenarioError, LogFormatError
from .sensors import ActuatorSpec, BiasTable, LidarSpec

LOG_SCHEMA_VERSION = 1

_LIDAR_FIELDS = (
    "accuracy_fraction",
    "max_range",
    "scan_period",
    "angular_resolution",
    "spike_probability",
    "spike_offset_range",
)
_ACTUATOR_FIELDS = ("deadband_speed", "max_speed")
_SIM_FIELDS = ("dt", "duration", "gradient_gain")
_COMMAND_FIELDS = ("t", "vx", "vy", "omega", "scale")


@dataclass(frozen=True)
class Scenario:
    """A fully validated scenario: engine config plus the command schedule."""

    name: str
    config: SimConfig
    schedule: list[tuple[float, MotionCommand]]
    digest: str
    raw: dict


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise ScenarioError("missing required field", field=f"{path}.{key}")
    return obj[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"expected a number, got {value!r}", field=path)
    if not math.isfinite(value):
        raise ScenarioError(f"must be finite, got {value!r}", field=path)
    return float(value)


def _int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"expected an integer, got {value!r}", field=path)
    return value


def _points(value, path: str) -> np.ndarray:
    if not isinstance(value, list) or not all(
        isinstance(row, list) and len(row) == 2 for row in value
    ):
        raise ScenarioError("expected a list of [x, y] pairs", field=path)
    return np.array(
        [[_number(row[0], f"{path}[{i}][0]"), _number(row[1], f"{path}[{i}][1]")]
         for i, row in enumerate(value)]
    )


def _object(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ScenarioError(f"expected an object, got {type(value).__name__}", field=path)
    return value


def _list(value, path: str) -> list:
    if not isinstance(value, list):
        raise ScenarioError(f"expected a list, got {type(value).__name__}", field=path)
    return value


def _reject_unknown(obj: dict, allowed, path: str):
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ScenarioError(f"unknown fields {unknown}", field=path or "scenario")


def scenario_digest(raw: dict) -> str:
    """Content hash of the scenario, independent of file formatting."""
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def load_scenario(text: str, seed_override: int | None = None) -> Scenario:
    """Parse and validate a scenario document, filling module defaults."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a JSON object")
    _reject_unknown(
        raw,
        ("name", "seed", "shape", "robots", "biases", "estimator", "lidar",
         "actuator", "sim", "commands"),
        "",
    )
    if seed_override is not None:
        raw = dict(raw)
        raw["seed"] = seed_override

    name = raw.get("name", "unnamed")
    seed = _int(raw.get("seed", 0), "seed")

    shape_obj = _object(_require(raw, "shape", "scenario"), "shape")
    _reject_unknown(shape_obj, ("edges", "distances", "reference_positions"), "shape")
    edges_raw = _list(_require(shape_obj, "edges", "shape"), "shape.edges")
    edges = []
    for idx, pair in enumerate(edges_raw):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ScenarioError("expected [i, j]", field=f"shape.edges[{idx}]")
        edges.append((_int(pair[0], f"shape.edges[{idx}][0]"),
                      _int(pair[1], f"shape.edges[{idx}][1]")))
    reference = _points(_require(shape_obj, "reference_positions", "shape"),
                        "shape.reference_positions")
    distances_raw = _require(shape_obj, "distances", "shape")
    if not isinstance(distances_raw, list) or len(distances_raw) != len(edges):
        raise ScenarioError(
            f"expected {len(edges)} distances (one per edge)", field="shape.distances"
        )
    distances = [_number(v, f"shape.distances[{i}]") for i, v in enumerate(distances_raw)]
    try:
        graph = FormationGraph(n=len(reference), edges=tuple(edges))
        shape = ShapeSpec(
            graph=graph, desired_distances=np.array(distances), reference_positions=reference
        )
    except ValueError as exc:
        raise ScenarioError(str(exc), field="shape")

    robots_obj = _object(raw.get("robots", {}), "robots")
    _reject_unknown(robots_obj, ("count", "initial_positions", "headings"), "robots")
    count = _int(robots_obj.get("count", graph.n), "robots.count")
    if count != graph.n:
        raise ScenarioError(
            f"count={count} but shape.reference_positions has {graph.n} robots",
            field="robots.count",
        )
    init_raw = robots_obj.get("initial_positions", "reference")
    if init_raw == "reference":
        initial = reference.copy()
    else:
        initial = _points(init_raw, "robots.initial_positions")
        if initial.shape[0] != graph.n:
            raise ScenarioError(f"expected {graph.n} rows", field="robots.initial_positions")
    headings_raw = robots_obj.get("headings", "seeded")
    if headings_raw == "seeded":
        headings = None
    elif isinstance(headings_raw, list) and len(headings_raw) == graph.n:
        headings = np.array(
            [_number(v, f"robots.headings[{i}]") for i, v in enumerate(headings_raw)]
        )
    else:
        raise ScenarioError('expected "seeded" or one heading per robot', field="robots.headings")

    mu: dict[tuple[int, int], float] = {}
    for idx, entry in enumerate(_list(raw.get("biases", []), "biases")):
        path = f"biases[{idx}]"
        if not isinstance(entry, dict):
            raise ScenarioError("expected an object", field=path)
        _reject_unknown(entry, ("robot", "edge", "mu"), path)
        robot = _int(_require(entry, "robot", path), f"{path}.robot")
        edge = _int(_require(entry, "edge", path), f"{path}.edge")
        mu[(robot, edge)] = _number(_require(entry, "mu", path), f"{path}.mu")
    try:
        bias = BiasTable(mu=mu)
        bias.validate_against(graph)
    except ValueError as exc:
        raise ScenarioError(str(exc), field="biases")

    est_obj = _object(raw.get("estimator", {}), "estimator")
    _reject_unknown(est_obj, ("enabled", "gain", "assignment"), "estimator")
    est_enabled = est_obj.get("enabled", False)
    if not isinstance(est_enabled, bool):
        raise ScenarioError("expected true/false", field="estimator.enabled")
    est_gain = _number(est_obj.get("gain", 1.0), "estimator.gain")
    assign_raw = est_obj.get("assignment")
    if assign_raw is None:
        assignment = None
    elif assign_raw == "tails":
        assignment = EstimatorAssignment.tails(graph)
    elif isinstance(assign_raw, list):
        estimators = {}
        for idx, entry in enumerate(assign_raw):
            path = f"estimator.assignment[{idx}]"
            if not isinstance(entry, dict):
                raise ScenarioError("expected an object", field=path)
            _reject_unknown(entry, ("edge", "robot"), path)
            estimators[_int(_require(entry, "edge", path), f"{path}.edge")] = _int(
                _require(entry, "robot", path), f"{path}.robot"
            )
        assignment = EstimatorAssignment(estimators=estimators)
    else:
        raise ScenarioError('expected "tails", a list, or null', field="estimator.assignment")

    lidar_obj = _object(raw.get("lidar", {}), "lidar")
    _reject_unknown(lidar_obj, _LIDAR_FIELDS, "lidar")
    try:
        lidar = LidarSpec(**{
            k: _number(lidar_obj[k], f"lidar.{k}") for k in _LIDAR_FIELDS if k in lidar_obj
        })
    except ValueError as exc:
        raise ScenarioError(str(exc), field="lidar")

    act_obj = _object(raw.get("actuator", {}), "actuator")
    _reject_unknown(act_obj, _ACTUATOR_FIELDS, "actuator")
    try:
        actuator = ActuatorSpec(**{
            k: _number(act_obj[k], f"actuator.{k}") for k in _ACTUATOR_FIELDS if k in act_obj
        })
    except ValueError as exc:
        raise ScenarioError(str(exc), field="actuator")

    sim_obj = _object(raw.get("sim", {}), "sim")
    _reject_unknown(sim_obj, _SIM_FIELDS, "sim")
    sim_kwargs = {k: _number(sim_obj[k], f"sim.{k}") for k in _SIM_FIELDS if k in sim_obj}

    schedule: list[tuple[float, MotionCommand]] = []
    for idx, entry in enumerate(_list(raw.get("commands", []), "commands")):
        path = f"commands[{idx}]"
        if not isinstance(entry, dict):
            raise ScenarioError("expected an object", field=path)
        _reject_unknown(entry, _COMMAND_FIELDS, path)
        when = _number(_require(entry, "t", path), f"{path}.t")
        cmd = MotionCommand(
            vx=_number(entry.get("vx", 0.0), f"{path}.vx"),
            vy=_number(entry.get("vy", 0.0), f"{path}.vy"),
            omega=_number(entry.get("omega", 0.0), f"{path}.omega"),
            scale=_number(entry.get("scale", 0.0), f"{path}.scale"),
        )
        speed = math.hypot(cmd.vx, cmd.vy)
        if speed > actuator.max_speed:
            raise ScenarioError(
                f"commanded speed {speed:.3f} m/s exceeds max_speed {actuator.max_speed}",
                field=path,
            )
        schedule.append((when, cmd))

    try:
        config = SimConfig(
            shape=shape,
            initial_positions=initial,
            seed=seed,
            headings=headings,
            bias=bias,
            lidar=lidar,
            actuator=actuator,
            estimator_enabled=est_enabled,
            estimator_gain=est_gain,
            assignment=assignment,
            **sim_kwargs,
        )
    except ValueError as exc:
        raise ScenarioError(str(exc))

    eps = config.dt * 1e-6
    for idx, (when, _) in enumerate(schedule):
        if when < 0 or when > config.duration + eps:
            raise ScenarioError(
                f"t={when}s is outside the run duration {config.duration}s",
                field=f"commands[{idx}].t",
            )

    return Scenario(
        name=name, config=config, schedule=schedule, digest=scenario_digest(raw), raw=raw
    )


def load_scenario_file(path: str, seed_override: int | None = None) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}")
    return load_scenario(text, seed_override=seed_override)


def bundled_scenario_names() -> list[str]:
    files = resources.files("formsim").joinpath("scenarios")
    return sorted(p.name[: -len(".json")] for p in files.iterdir() if p.name.endswith(".json"))


def load_bundled_scenario(name: str, seed_override: int | None = None) -> Scenario:
    ref = resources.files("formsim").joinpath("scenarios").joinpath(f"{name}.json")
    if not ref.is_file():
        raise ScenarioError(
            f"unknown bundled scenario {name!r}; available: {bundled_scenario_names()}"
        )
    return load_scenario(ref.read_text(encoding="utf-8"), seed_override=seed_override)


def resolve_scenario(path_or_name: str, seed_override: int | None = None) -> Scenario:
    """Treat the argument as a file path first, then as a bundled scenario name."""
    import os

    if os.path.exists(path_or_name):
        return load_scenario_file(path_or_name, seed_override=seed_override)
    return load_bundled_scenario(path_or_name, seed_override=seed_override)


def _log_columns(n: int, m: int) -> list[str]:
    cols = ["t"]
    for i in range(n):
        cols += [f"x_{i}", f"y_{i}", f"u_{i}", f"u_act_{i}"]
    for k in range(m):
        cols += [f"e_tail_{k}", f"e_head_{k}", f"mu_hat_{k}"]
    cols += ["centroid_x", "centroid_y", "orient"]
    return cols


def _fmt(value: float) -> str:
    if math.isnan(value):
        return ""
    return repr(float(value))


def write_log(records: list[TickRecord], path: str, digest: str = "") -> None:
    """CSV with fixed column order; floats use shortest round-trip formatting."""
    if records:
        n = records[0].positions.shape[0]
        m = records[0].e_tail.shape[0]
    else:
        n = m = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# formsim-log v{LOG_SCHEMA_VERSION} scenario={digest}\n")
        writer = csv.writer(fh)
        writer.writerow(_log_columns(n, m))
        for r in records:
            row = [_fmt(r.t)]
            for i in range(n):
                row += [_fmt(r.positions[i, 0]), _fmt(r.positions[i, 1]),
                        _fmt(r.cmd_speed[i]), _fmt(r.act_speed[i])]
            for k in range(m):
                row += [_fmt(r.e_tail[k]), _fmt(r.e_head[k]), _fmt(r.mu_hat[k])]
            row += [_fmt(r.centroid[0]), _fmt(r.centroid[1]), _fmt(r.orient)]
            writer.writerow(row)


def read_log(path: str) -> tuple[list[TickRecord], str]:
    """Inverse of write_log. Returns (records, scenario digest)."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = fh.readline().strip()
        prefix = "# formsim-log v"
        if not header.startswith(prefix):
            raise LogFormatError(f"not a formsim log: {header[:60]!r}")
        version_part, _, digest_part = header[len(prefix):].partition(" scenario=")
        try:
            version = int(version_part)
        except ValueError:
            raise LogFormatError(f"malformed version in header: {header!r}")
        if version != LOG_SCHEMA_VERSION:
            raise LogFormatError(
                f"log schema v{version} not supported (expected v{LOG_SCHEMA_VERSION})"
            )
        reader = csv.reader(fh)
        try:
            columns = next(reader)
        except StopIteration:
            raise LogFormatError("missing column header")
        n = sum(1 for c in columns if c.startswith("x_"))
        m = sum(1 for c in columns if c.startswith("e_tail_"))
        if columns != _log_columns(n, m):
            raise LogFormatError("unexpected column layout")
        records = []
        for row in reader:
            if len(row) != len(columns):
                raise LogFormatError(f"row {len(records) + 2} has {len(row)} fields")
            vals = [math.nan if cell == "" else float(cell) for cell in row]
            pos = np.zeros((n, 2))
            cmd_speed = np.zeros(n)
            act_speed = np.zeros(n)
            for i in range(n):
                base = 1 + 4 * i
                pos[i] = (vals[base], vals[base + 1])
                cmd_speed[i] = vals[base + 2]
                act_speed[i] = vals[base + 3]
            e_tail = np.zeros(m)
            e_head = np.zeros(m)
            mu_hat = np.zeros(m)
            for k in range(m):
                base = 1 + 4 * n + 3 * k
                e_tail[k] = vals[base]
                e_head[k] = vals[base + 1]
                mu_hat[k] = vals[base + 2]
            records.append(
                TickRecord(
                    t=vals[0],
                    positions=pos,
                    cmd_speed=cmd_speed,
                    act_speed=act_speed,
                    e_tail=e_tail,
                    e_head=e_head,
                    mu_hat=mu_hat,
                    centroid=np.array(vals[-3:-1]),
                    orient=vals[-1],
                )
            )
    return records, digest_part

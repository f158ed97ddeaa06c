"""Deterministic fixed-step closed-loop world.

Each tick runs barrier-separated phases: every robot senses its incident
edges, every controller computes from this tick's measurements only, bias
observers advance, actuation limits apply, and positions integrate by
explicit Euler. No robot ever sees another robot's same-tick output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .control import (
    EstimatorAssignment,
    EstimatorState,
    estimator_step,
    motion_control,
    solve_command_components,
    validate_estimation_assignment,
    wrap_angle,
)
from .core import MotionCommand, MotionParameters, ShapeSpec, as_points
from .errors import FormationBrokenError, OutOfRangeError
from .sensors import (
    ActuatorSpec,
    BiasTable,
    LidarSpec,
    apply_actuation,
    init_rng,
    measure_edge,
    robot_rng,
)


@dataclass
class SimConfig:
    """Everything a run needs besides the command schedule."""

    shape: ShapeSpec
    initial_positions: np.ndarray
    seed: int = 0
    dt: float = 0.2
    duration: float = 60.0
    gradient_gain: float = 1.0
    headings: np.ndarray | None = None  # None: random mount angles from the seed
    bias: BiasTable = field(default_factory=BiasTable)
    lidar: LidarSpec = field(default_factory=LidarSpec)
    actuator: ActuatorSpec = field(default_factory=ActuatorSpec)
    estimator_enabled: bool = False
    estimator_gain: float = 1.0
    assignment: EstimatorAssignment | None = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.duration < 0:
            raise ValueError(f"duration must be >= 0, got {self.duration}")
        if self.gradient_gain <= 0:
            raise ValueError(f"gradient_gain must be > 0, got {self.gradient_gain}")
        self.initial_positions = as_points(
            self.initial_positions, self.shape.graph.n, "initial_positions"
        )
        if self.headings is not None:
            self.headings = np.asarray(self.headings, dtype=float)
            if self.headings.shape != (self.shape.graph.n,):
                raise ValueError(f"need {self.shape.graph.n} headings")
        self.bias.validate_against(self.shape.graph)
        if self.assignment is not None:
            validate_estimation_assignment(
                self.assignment,
                self.shape.graph,
                biased_edges=self.bias.biased_edges() if self.estimator_enabled else None,
            )
        elif self.estimator_enabled and self.bias.biased_edges():
            # Enabled estimation with biased edges needs someone assigned.
            validate_estimation_assignment(
                EstimatorAssignment(estimators={}),
                self.shape.graph,
                biased_edges=self.bias.biased_edges(),
            )

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass
class WorldState:
    """Ground truth the engine owns; controllers never read it directly."""

    t: float
    tick: int
    positions: np.ndarray
    headings: np.ndarray
    scale: float
    orient: float
    command: MotionCommand
    estimator_enabled: bool
    estimators: dict[int, EstimatorState]


@dataclass(frozen=True)
class TickRecord:
    """One control cycle: state at the tick start plus what the controllers did."""

    t: float
    positions: np.ndarray  # (n, 2)
    cmd_speed: np.ndarray  # (n,) commanded speed per robot
    act_speed: np.ndarray  # (n,) speed after deadband/clamp
    e_tail: np.ndarray  # (m,) error the tail robot's controller acted on
    e_head: np.ndarray  # (m,) same from the head side
    mu_hat: np.ndarray  # (m,) bias estimates after this tick, NaN where unassigned
    centroid: np.ndarray  # (2,)
    orient: float  # unwrapped angle of (robot 0 - centroid)


class Simulator:
    """Owns a WorldState and advances it one control cycle at a time."""

    def __init__(self, config: SimConfig):
        self.config = config
        graph = config.shape.graph
        self._rngs = [robot_rng(config.seed, i) for i in range(graph.n)]
        if config.headings is not None:
            headings = config.headings.copy()
        else:
            headings = init_rng(config.seed).uniform(-math.pi, math.pi, graph.n)
        positions = config.initial_positions.copy()
        orient0 = self._raw_orient(positions)
        estimators = {}
        if config.assignment is not None:
            estimators = {
                k: EstimatorState(mu_hat=0.0, gain_c=config.estimator_gain)
                for k in config.assignment.estimators
            }
        self.world = WorldState(
            t=0.0,
            tick=0,
            positions=positions,
            headings=headings,
            scale=1.0,
            orient=orient0,
            command=MotionCommand(),
            estimator_enabled=config.estimator_enabled,
            estimators=estimators,
        )
        self._components = None  # (translation, rotation, scaling) MotionParameters
        self.set_command(MotionCommand())

    @staticmethod
    def _raw_orient(positions: np.ndarray) -> float:
        rel = positions[0] - positions.mean(axis=0)
        return math.atan2(rel[1], rel[0])

    def set_command(self, cmd: MotionCommand) -> None:
        """Replace the active motion command; motion parameters re-solve once."""
        self.world.command = cmd
        if cmd.is_zero:
            zero = MotionParameters.zero(self.config.shape.graph)
            self._components = (zero, zero, zero)
        else:
            self._components = solve_command_components(self.config.shape, cmd)

    def set_estimator_enabled(self, enabled: bool) -> None:
        self.world.estimator_enabled = bool(enabled)

    def _effective_params(self) -> MotionParameters:
        # Edge unit vectors are scale-invariant, so translation coefficients
        # hold at any size while rotation/scaling rim speeds grow with it.
        translation, rotation, scaling = self._components
        return translation + (rotation + scaling).scaled(self.world.scale)

    def effective_shape(self) -> ShapeSpec:
        shape = self.config.shape
        return shape if self.world.scale == 1.0 else shape.scaled(self.world.scale)

    def step(self) -> TickRecord:
        """Advance one control cycle and return its record."""
        config = self.config
        world = self.world
        graph = config.shape.graph
        shape = self.effective_shape()
        assignment = config.assignment

        # Phase 1: all robots sense their incident edges (current positions).
        measurements: dict[int, dict[int, object]] = {}
        for robot in range(graph.n):
            per_edge = {}
            for k in graph.incident_edges(robot):
                i, j = graph.edges[k]
                neighbor = j if robot == i else i
                rel = world.positions[robot] - world.positions[neighbor]
                try:
                    per_edge[k] = measure_edge(
                        rel,
                        world.headings[robot],
                        config.bias.get(robot, k),
                        config.lidar,
                        self._rngs[robot],
                        edge=k,
                        neighbor=neighbor,
                    )
                except OutOfRangeError as exc:
                    raise FormationBrokenError(f"t={world.t:.3f}s: {exc}") from exc
            measurements[robot] = per_edge

        # Phase 2: controllers, from this tick's measurements only.
        params = self._effective_params()
        u_world = np.zeros((graph.n, 2))
        corrections_used: dict[int, dict[int, float]] = {}
        for robot in range(graph.n):
            corrections = {}
            if world.estimator_enabled and assignment is not None:
                corrections = {
                    k: world.estimators[k].mu_hat
                    for k in assignment.edges_estimated_by(robot)
                }
            corrections_used[robot] = corrections
            u_local = motion_control(
                list(measurements[robot].values()),
                shape,
                params,
                robot,
                gain=config.gradient_gain,
                corrections=corrections,
            )
            h = world.headings[robot]
            ch, sh = math.cos(h), math.sin(h)
            u_world[robot, 0] = ch * u_local[0] - sh * u_local[1]
            u_world[robot, 1] = sh * u_local[0] + ch * u_local[1]

        # Phase 3: bias observers advance on the same measurement sample.
        if world.estimator_enabled and assignment is not None:
            for k, robot in assignment.estimators.items():
                new_state, _ = estimator_step(
                    world.estimators[k], measurements[robot][k], shape, config.dt
                )
                world.estimators[k] = new_state

        # Phase 4: actuation limits.
        u_act = np.stack([apply_actuation(u_world[r], config.actuator) for r in range(graph.n)])

        record = self._make_record(measurements, shape, corrections_used, u_world, u_act)

        # Phase 5: integrate and advance shared references.
        world.positions = world.positions + u_act * config.dt
        world.scale *= 1.0 + world.command.scale * config.dt
        world.tick += 1
        world.t = world.tick * config.dt
        raw = self._raw_orient(world.positions)
        prev = world.orient
        world.orient = prev + wrap_angle(raw - wrap_angle(prev))
        return record

    def _make_record(self, measurements, shape, corrections, u_world, u_act) -> TickRecord:
        graph = self.config.shape.graph
        world = self.world
        m = graph.m
        e_tail = np.zeros(m)
        e_head = np.zeros(m)
        mu_hat = np.full(m, math.nan)
        for k, (i, j) in enumerate(graph.edges):
            for robot, out in ((i, e_tail), (j, e_head)):
                meas = measurements[robot][k]
                err = meas.range_m - shape.desired_distances[k]
                err -= corrections[robot].get(k, 0.0)
                out[k] = err
            if k in world.estimators:
                mu_hat[k] = world.estimators[k].mu_hat
        return TickRecord(
            t=world.t,
            positions=world.positions.copy(),
            cmd_speed=np.linalg.norm(u_world, axis=1),
            act_speed=np.linalg.norm(u_act, axis=1),
            e_tail=e_tail,
            e_head=e_head,
            mu_hat=mu_hat,
            centroid=world.positions.mean(axis=0),
            orient=world.orient,
        )


def run(
    config: SimConfig,
    command_schedule: list[tuple[float, MotionCommand]] | None = None,
) -> list[TickRecord]:
    """Execute a full run; commands take effect at the first tick with t >= their time.

    On a broken sensing link the FormationBrokenError carries the records
    produced so far in its ``records`` attribute.
    """
    schedule = sorted(command_schedule or [], key=lambda item: item[0])
    eps = config.dt * 1e-6
    for when, _ in schedule:
        if when < 0 or when > config.duration + eps:
            raise ValueError(f"scheduled command at t={when}s is outside the run duration")
    sim = Simulator(config)
    records: list[TickRecord] = []
    pending = list(schedule)
    for _ in range(config.n_ticks):
        while pending and pending[0][0] <= sim.world.t + eps:
            sim.set_command(pending.pop(0)[1])
        try:
            records.append(sim.step())
        except FormationBrokenError as exc:
            exc.records = records
            raise
    return records


@dataclass(frozen=True)
class RunMetrics:
    """Tail-window summary of a record sequence."""

    duration: float
    settling_time: float | None
    settle_threshold: float
    steady_error_mean: np.ndarray  # (2, m): row 0 tail side, row 1 head side
    steady_error_std: np.ndarray  # (2, m)
    centroid_displacement: float
    centroid_path_length: float
    mean_drift_speed: float
    mu_hat_terminal: dict[int, float]

    def to_dict(self) -> dict:
        return {
            "duration_s": self.duration,
            "settling_time_s": self.settling_time,
            "settle_threshold_m": self.settle_threshold,
            "steady_error_mean_tail_m": self.steady_error_mean[0].tolist(),
            "steady_error_mean_head_m": self.steady_error_mean[1].tolist(),
            "steady_error_std_tail_m": self.steady_error_std[0].tolist(),
            "steady_error_std_head_m": self.steady_error_std[1].tolist(),
            "centroid_displacement_m": self.centroid_displacement,
            "centroid_path_length_m": self.centroid_path_length,
            "mean_drift_speed_m_per_s": self.mean_drift_speed,
            "mu_hat_terminal_m": {str(k): v for k, v in sorted(self.mu_hat_terminal.items())},
        }


def metrics(
    records: list[TickRecord],
    tail_fraction: float = 0.2,
    settle_threshold: float = 1e-3,
) -> RunMetrics:
    """Summarize a run over its tail window (default: last 20% of ticks)."""
    if not records:
        raise ValueError("metrics needs at least one record")
    abs_err = np.array([max(np.abs(r.e_tail).max(), np.abs(r.e_head).max()) for r in records])
    settled_from = None
    for idx in range(len(records) - 1, -1, -1):
        if abs_err[idx] >= settle_threshold:
            break
        settled_from = idx
    if settled_from is not None:
        settling_time = 0.0 if settled_from == 0 else records[settled_from].t
    else:
        settling_time = None

    tail_start = min(len(records) - 1, int(math.floor(len(records) * (1.0 - tail_fraction))))
    tail = records[tail_start:]
    e_tail = np.stack([r.e_tail for r in tail])
    e_head = np.stack([r.e_head for r in tail])
    steady_mean = np.stack([e_tail.mean(axis=0), e_head.mean(axis=0)])
    steady_std = np.stack([e_tail.std(axis=0), e_head.std(axis=0)])

    centroids = np.stack([r.centroid for r in records])
    displacement = float(np.linalg.norm(centroids[-1] - centroids[0]))
    path_length = float(np.sum(np.linalg.norm(np.diff(centroids, axis=0), axis=1)))
    span = records[-1].t - records[tail_start].t
    if span > 0:
        drift = float(np.linalg.norm(centroids[-1] - centroids[tail_start]) / span)
    else:
        drift = 0.0

    mu_cols = np.stack([r.mu_hat for r in tail])
    mu_terminal = {
        k: float(mu_cols[:, k].mean())
        for k in range(mu_cols.shape[1])
        if not math.isnan(mu_cols[0, k])
    }
    return RunMetrics(
        duration=records[-1].t,
        settling_time=settling_time,
        settle_threshold=settle_threshold,
        steady_error_mean=steady_mean,
        steady_error_std=steady_std,
        centroid_displacement=displacement,
        centroid_path_length=path_length,
        mean_drift_speed=drift,
        mu_hat_terminal=mu_terminal,
    )


def drift_speed(records: list[TickRecord], window_s: float) -> float:
    """Mean centroid speed over the trailing ``window_s`` seconds."""
    if not records:
        raise ValueError("drift_speed needs at least one record")
    t_end = records[-1].t
    start = next((r for r in records if r.t >= t_end - window_s), records[0])
    span = t_end - start.t
    if span <= 0:
        return 0.0
    return float(np.linalg.norm(records[-1].centroid - start.centroid) / span)

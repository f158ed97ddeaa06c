"""Per-robot control laws, exactly as each robot's microcontroller would run them.

Every operation here consumes only one robot's own measurements and the
shared mission configuration (shape, gains, motion parameters). Nothing in
this module sees another robot's state: that structural restriction is what
makes the controller communication-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import FormationGraph, MotionCommand, MotionParameters, ShapeSpec
from .errors import (
    EstimationCycleError,
    MissingMeasurementError,
    NotAssignedError,
    UnassignedBiasError,
)


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


@dataclass(frozen=True)
class LocalMeasurement:
    """One sensed edge: range plus bearing in the measuring robot's own frame.

    The bearing is that of the edge vector pointing from the neighbor toward
    the measuring robot (the z_k convention), so the gradient law is
    u -= zhat * (range - d) with zhat the unit vector at the bearing.
    """

    edge: int
    neighbor: int
    range_m: float
    bearing: float

    def __post_init__(self):
        if not (math.isfinite(self.range_m) and self.range_m > 0):
            raise ValueError(f"range must be finite and > 0, got {self.range_m}")
        if not (-math.pi < self.bearing <= math.pi):
            raise ValueError(f"bearing must lie in (-pi, pi], got {self.bearing}")

    @property
    def direction(self) -> np.ndarray:
        return np.array([math.cos(self.bearing), math.sin(self.bearing)])


def _index_by_edge(measurements, shape: ShapeSpec, robot: int):
    incident = shape.graph.incident_edges(robot)
    by_edge = {meas.edge: meas for meas in measurements}
    missing = [k for k in incident if k not in by_edge]
    if missing:
        raise MissingMeasurementError(f"robot {robot} lacks measurements for edges {missing}")
    return [(k, by_edge[k]) for k in incident]


def gradient_control(
    measurements: list[LocalMeasurement],
    shape: ShapeSpec,
    robot: int,
    gain: float = 1.0,
    corrections: dict[int, float] | None = None,
) -> np.ndarray:
    """Distance-stabilizing control for one robot, in its local frame.

    u = -gain * sum_k zhat_k * (range_k - d_k), one term per incident edge.
    ``corrections`` optionally subtracts a per-edge range offset (the bias
    estimate of an edge this robot calibrates).
    """
    u = np.zeros(2)
    for k, meas in _index_by_edge(measurements, shape, robot):
        err = meas.range_m - shape.desired_distances[k]
        if corrections and k in corrections:
            err -= corrections[k]
        u -= gain * err * meas.direction
    return u


def motion_control(
    measurements: list[LocalMeasurement],
    shape: ShapeSpec,
    params: MotionParameters,
    robot: int,
    gain: float = 1.0,
    corrections: dict[int, float] | None = None,
) -> np.ndarray:
    """Gradient control plus the steady motion term sum_k sigma_{i,k} * zhat_k."""
    u = gradient_control(measurements, shape, robot, gain=gain, corrections=corrections)
    sigma = params.for_robot(robot)
    for k, meas in _index_by_edge(measurements, shape, robot):
        u += sigma[k] * meas.direction
    return u


@dataclass(frozen=True)
class EstimatorState:
    """Scalar bias observer for one edge: estimate mu_hat, gain c (1/s)."""

    mu_hat: float = 0.0
    gain_c: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.gain_c) and self.gain_c > 0):
            raise ValueError(f"estimator gain must be finite and > 0, got {self.gain_c}")
        if not math.isfinite(self.mu_hat):
            raise ValueError(f"mu_hat must be finite, got {self.mu_hat}")


def estimator_step(
    state: EstimatorState,
    measurement: LocalMeasurement,
    shape: ShapeSpec,
    dt: float,
    gain: float = 1.0,
) -> tuple[EstimatorState, np.ndarray]:
    """One explicit-Euler step of the bias observer for a single edge.

    Returns the updated state and this edge's control contribution
    -gain * zhat * (range - d - mu_hat). The observer integrates the same
    innovation: mu_hat += c * (range - d - mu_hat) * dt.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    innovation = measurement.range_m - shape.desired_distances[measurement.edge] - state.mu_hat
    control = -gain * innovation * measurement.direction
    new_state = EstimatorState(
        mu_hat=state.mu_hat + state.gain_c * innovation * dt, gain_c=state.gain_c
    )
    return new_state, control


@dataclass(frozen=True)
class BiasedPairReport:
    """Closed-form steady state of a single biased edge (two-robot system).

    With an additive range bias mu on one robot, the pair settles at true
    distance d - mu/2 and both robots translate together at speed |mu|/2
    along the edge. ``drift_velocity`` is the common world-frame velocity
    (z0 fixes the edge direction); ``equilibrium_error`` is the true-length
    error, and the two sides read errors +/- mu/2 apart.
    """

    drift_speed: float
    drift_velocity: np.ndarray
    equilibrium_error: float
    error_biased_side: float
    error_unbiased_side: float


def biased_pair_dynamics(mu: float, d: float, z0: np.ndarray, gain: float = 1.0) -> BiasedPairReport:
    """Analytic steady state of two robots controlling one edge with bias ``mu``.

    Setting the relative dynamics to zero: the biased robot (at the tail of
    z0) reads range D + mu, the other D; equilibrium D* = d - mu/2, where
    both controls equal -gain * zhat * mu / 2.
    """
    if d <= 0:
        raise ValueError(f"desired distance must be > 0, got {d}")
    z0 = np.asarray(z0, dtype=float)
    norm = float(np.linalg.norm(z0))
    if norm == 0.0:
        raise ValueError("z0 must be a nonzero direction")
    zhat = z0 / norm
    speed = gain * mu / 2.0
    return BiasedPairReport(
        drift_speed=abs(speed),
        drift_velocity=-speed * zhat,
        equilibrium_error=-mu / 2.0,
        error_biased_side=+mu / 2.0,
        error_unbiased_side=-mu / 2.0,
    )


@dataclass(frozen=True)
class EstimatorAssignment:
    """Which robot estimates each edge's bias. Edges may be left unassigned.

    Drawing an arrow from each estimating robot to the opposite endpoint of
    its edge must give a directed graph without cycles; otherwise the
    observers can chase each other and the biases are unidentifiable.
    """

    estimators: dict[int, int]

    def estimator_for(self, edge: int) -> int | None:
        return self.estimators.get(edge)

    def edges_estimated_by(self, robot: int) -> list[int]:
        return sorted(k for k, r in self.estimators.items() if r == robot)

    def require_assigned(self, robot: int, edge: int) -> None:
        assigned = self.estimators.get(edge)
        if assigned != robot:
            raise NotAssignedError(
                f"robot {robot} does not estimate edge {edge} (assigned: {assigned})"
            )

    @classmethod
    def tails(cls, graph: FormationGraph) -> "EstimatorAssignment":
        """Canonical assignment: each edge is estimated by its tail robot."""
        return cls(estimators={k: i for k, (i, j) in enumerate(graph.edges)})


def validate_estimation_assignment(
    assignment: EstimatorAssignment,
    graph: FormationGraph,
    biased_edges: set[int] | None = None,
) -> None:
    """Check the no-loops condition; raise EstimationCycleError with one offending cycle.

    If ``biased_edges`` is given, every one of them must have an estimator
    (UnassignedBiasError otherwise).
    """
    for k, robot in assignment.estimators.items():
        if not (0 <= k < graph.m):
            raise ValueError(f"assignment references unknown edge {k}")
        if robot not in graph.edges[k]:
            raise ValueError(f"robot {robot} is not an endpoint of edge {k}")
    if biased_edges:
        unassigned = sorted(k for k in biased_edges if k not in assignment.estimators)
        if unassigned:
            raise UnassignedBiasError(f"biased edges {unassigned} have no estimator assigned")

    # Arrow: estimator robot -> opposite endpoint. Iterative DFS, 3-coloring.
    succ: dict[int, list[int]] = {v: [] for v in range(graph.n)}
    for k, robot in assignment.estimators.items():
        i, j = graph.edges[k]
        succ[robot].append(j if robot == i else i)
    color = {v: 0 for v in range(graph.n)}  # 0 new, 1 on stack, 2 done
    parent: dict[int, int] = {}
    for start in range(graph.n):
        if color[start]:
            continue
        stack = [(start, iter(succ[start]))]
        color[start] = 1
        while stack:
            v, it = stack[-1]
            advanced = False
            for w in it:
                if color[w] == 0:
                    color[w] = 1
                    parent[w] = v
                    stack.append((w, iter(succ[w])))
                    advanced = True
                    break
                if color[w] == 1:
                    cycle = [v]
                    node = v
                    while node != w:
                        node = parent[node]
                        cycle.append(node)
                    cycle.reverse()
                    raise EstimationCycleError(
                        f"estimation assignment contains a loop through robots {cycle}",
                        cycle=cycle,
                    )
            if not advanced:
                color[v] = 2
                stack.pop()


def compose_sigma(
    t1: MotionParameters, t2: MotionParameters, r: MotionParameters
) -> MotionParameters:
    """Entrywise sum of translation and rotation parameter sets (Fig.-style split)."""
    return t1 + t2 + r


def solve_command_components(shape: ShapeSpec, cmd: MotionCommand):
    """Split a command into separately-solved translation / rotation / scaling parameters.

    The translation part is scale-invariant; rotation and scaling parts must
    be multiplied by the current shape scale factor before use.
    """
    from .core import solve_motion_parameters

    translation = solve_motion_parameters(
        shape, MotionCommand(vx=cmd.vx, vy=cmd.vy)
    ).params
    rotation = solve_motion_parameters(shape, MotionCommand(omega=cmd.omega)).params
    scaling = solve_motion_parameters(shape, MotionCommand(scale=cmd.scale)).params
    return translation, rotation, scaling

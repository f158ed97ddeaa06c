"""Range/bearing sensing imperfections and the actuation deadband.

The noise model is what makes the drift phenomena appear: a constant
per-(robot, edge) range bias, Gaussian range noise proportional to distance,
occasional spike outliers (beams hitting the neighbor's chassis instead of
its sensor), Gaussian bearing noise, and a minimum trackable speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .control import LocalMeasurement, wrap_angle
from .core import FormationGraph
from .errors import OutOfRangeError


@dataclass(frozen=True)
class LidarSpec:
    """Range sensor parameters. Defaults follow the 5 Hz / 6 m / 0.2% platform."""

    accuracy_fraction: float = 0.002
    max_range: float = 6.0
    scan_period: float = 0.2
    angular_resolution: float = math.radians(1.0)
    spike_probability: float = 0.01
    spike_offset_range: float = 0.1

    def __post_init__(self):
        if not (0 <= self.accuracy_fraction < 1):
            raise ValueError(f"accuracy_fraction must be in [0, 1), got {self.accuracy_fraction}")
        if self.max_range <= 0 or self.scan_period < 0 or self.angular_resolution < 0:
            raise ValueError("max_range must be > 0; periods/resolutions must be >= 0")
        if not (0 <= self.spike_probability < 1):
            raise ValueError(f"spike_probability must be in [0, 1), got {self.spike_probability}")
        if self.spike_offset_range < 0:
            raise ValueError("spike_offset_range must be >= 0")

    @classmethod
    def noiseless(cls) -> "LidarSpec":
        return cls(accuracy_fraction=0.0, angular_resolution=0.0, spike_probability=0.0)


@dataclass
class BiasTable:
    """Constant additive range bias per (robot, edge); unlisted pairs are unbiased.

    Only one endpoint of an edge may carry a bias: the model is a one-sided
    sensor discrepancy, the opposite side reads the true distance.
    """

    mu: dict[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        per_edge: dict[int, int] = {}
        for (robot, edge), value in self.mu.items():
            if not math.isfinite(value):
                raise ValueError(f"bias for robot {robot}, edge {edge} is not finite")
            if value != 0.0:
                per_edge[edge] = per_edge.get(edge, 0) + 1
        doubled = sorted(k for k, count in per_edge.items() if count > 1)
        if doubled:
            raise ValueError(f"edges {doubled} carry a bias on both endpoints")

    def get(self, robot: int, edge: int) -> float:
        return self.mu.get((robot, edge), 0.0)

    def biased_edges(self) -> set[int]:
        return {edge for (_, edge), value in self.mu.items() if value != 0.0}

    def validate_against(self, graph: FormationGraph) -> None:
        for robot, edge in self.mu:
            if not (0 <= edge < graph.m):
                raise ValueError(f"bias references unknown edge {edge}")
            if robot not in graph.edges[edge]:
                raise ValueError(f"robot {robot} is not an endpoint of edge {edge}")


def measure_edge(
    true_rel: np.ndarray,
    robot_heading: float,
    bias: float,
    spec: LidarSpec,
    rng: np.random.Generator,
    edge: int,
    neighbor: int,
) -> LocalMeasurement:
    """Simulate one robot sensing one edge.

    ``true_rel`` is the world-frame vector from the neighbor to the measuring
    robot (p_self - p_neighbor). Draw order per call is fixed: range noise,
    spike coin, spike offset (only when the coin hits), bearing noise.
    """
    dx, dy = float(true_rel[0]), float(true_rel[1])
    dist = math.hypot(dx, dy)
    if dist <= 0.0:
        raise OutOfRangeError(f"edge {edge}: coincident robots, nothing to measure")
    if dist > spec.max_range:
        raise OutOfRangeError(
            f"edge {edge}: true distance {dist:.3f} m exceeds max range {spec.max_range} m"
        )
    sensed = dist + bias + rng.normal(0.0, spec.accuracy_fraction * dist)
    if rng.random() < spec.spike_probability:
        sensed += rng.uniform(-spec.spike_offset_range, spec.spike_offset_range)
    bearing = math.atan2(dy, dx) - robot_heading
    bearing += rng.normal(0.0, spec.angular_resolution / 2.0)
    return LocalMeasurement(
        edge=edge,
        neighbor=neighbor,
        range_m=max(sensed, 1e-12),
        bearing=wrap_angle(bearing),
    )


@dataclass(frozen=True)
class ActuatorSpec:
    """Minimum trackable speed (floor friction) and speed ceiling."""

    deadband_speed: float = 0.015
    max_speed: float = 1.0

    def __post_init__(self):
        if not (0 <= self.deadband_speed < self.max_speed):
            raise ValueError(
                f"need 0 <= deadband_speed < max_speed, got "
                f"{self.deadband_speed} / {self.max_speed}"
            )


def apply_actuation(cmd: np.ndarray, spec: ActuatorSpec) -> np.ndarray:
    """Deadband then direction-preserving speed clamp.

    Exactly idempotent: the clamp re-shrinks until the rounded norm is
    within bounds, so a second application is the identity.
    """
    speed = math.hypot(float(cmd[0]), float(cmd[1]))
    if speed < spec.deadband_speed:
        return np.zeros(2)
    if speed <= spec.max_speed:
        return np.asarray(cmd, dtype=float)
    out = np.asarray(cmd, dtype=float) * (spec.max_speed / speed)
    speed = math.hypot(out[0], out[1])
    while speed > spec.max_speed:
        out = out * (spec.max_speed / speed)
        speed = math.hypot(out[0], out[1])
    return out


def robot_rng(seed: int, robot: int) -> np.random.Generator:
    """Per-robot measurement stream: stable under adding more robots."""
    return np.random.default_rng([seed, robot])


def init_rng(seed: int) -> np.random.Generator:
    """Stream for world initialization draws (mount headings), keyed apart
    from every per-robot stream."""
    return np.random.default_rng([seed, 0x48454144])

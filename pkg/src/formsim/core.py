"""Graph, shape, and rigidity math for distance-based formations.

Positions are numpy float arrays: a single point is shape (2,), stacked
robot positions are (n, 2), stacked per-edge quantities are (m, 2) or (m,).
All units SI (meters, seconds, radians). Robot and edge ids are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateFrameworkError,
    SupportMismatchError,
    UnrealizableMotionError,
)

INFINITESIMALLY_RIGID = "infinitesimally-rigid"
FLEXIBLE = "flexible"
DEGENERATE_COLLINEAR = "degenerate-collinear"

# Singular values below RANK_TOL * largest count as zero in rank tests.
RANK_TOL = 1e-9


def as_point(value, name="point") -> np.ndarray:
    """Coerce to a finite (2,) float array, rejecting NaN/Inf."""
    p = np.asarray(value, dtype=float)
    if p.shape != (2,):
        raise ValueError(f"{name} must have exactly 2 components, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError(f"{name} has non-finite components: {p}")
    return p


def as_points(value, n=None, name="positions") -> np.ndarray:
    """Coerce to a finite (n, 2) float array."""
    p = np.asarray(value, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2:
        raise ValueError(f"{name} must have shape (n, 2), got {p.shape}")
    if n is not None and p.shape[0] != n:
        raise ValueError(f"{name} must have {n} rows, got {p.shape[0]}")
    if not np.all(np.isfinite(p)):
        raise ValueError(f"{name} has non-finite entries")
    return p


def rot90(v: np.ndarray) -> np.ndarray:
    """Rotate a planar vector by +90 degrees."""
    return np.array([-v[1], v[0]])


@dataclass(frozen=True)
class FormationGraph:
    """Undirected neighbor graph with an ordered edge list.

    Each edge is an ordered (tail, head) pair; orientation only fixes signs
    in the incidence matrix and which side of an edge a measurement or bias
    belongs to, it carries no control-theoretic meaning.
    """

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need at least 2 robots, got {self.n}")
        object.__setattr__(self, "edges", tuple((int(i), int(j)) for i, j in self.edges))
        seen = set()
        for k, (i, j) in enumerate(self.edges):
            if i == j:
                raise ValueError(f"edge {k} is a self-edge ({i},{j})")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge {k}=({i},{j}) references a robot id >= n={self.n}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate edge {k}=({i},{j})")
            seen.add(key)

    @property
    def m(self) -> int:
        return len(self.edges)

    def incident_edges(self, robot: int) -> list[int]:
        """Edge indices touching ``robot``, in edge order."""
        return [k for k, (i, j) in enumerate(self.edges) if robot in (i, j)]

    def neighbors(self, robot: int) -> list[int]:
        out = []
        for i, j in self.edges:
            if i == robot:
                out.append(j)
            elif j == robot:
                out.append(i)
        return out

    def edge_sign(self, robot: int, k: int) -> float:
        """+1 if ``robot`` is the tail of edge k, -1 if the head."""
        i, j = self.edges[k]
        if robot == i:
            return 1.0
        if robot == j:
            return -1.0
        raise ValueError(f"robot {robot} is not an endpoint of edge {k}")


def build_incidence(graph: FormationGraph) -> np.ndarray:
    """Incidence matrix B, shape (n, m): +1 at each edge's tail, -1 at its head."""
    B = np.zeros((graph.n, graph.m))
    for k, (i, j) in enumerate(graph.edges):
        B[i, k] = 1.0
        B[j, k] = -1.0
    return B


def relative_positions(p: np.ndarray, graph: FormationGraph) -> np.ndarray:
    """Stacked relative positions z, shape (m, 2), with z_k = p_tail - p_head."""
    p = as_points(p, graph.n)
    return np.array([p[i] - p[j] for i, j in graph.edges])


def rigidity_matrix(p: np.ndarray, graph: FormationGraph) -> np.ndarray:
    """Rigidity matrix, shape (m, 2n): row k is z_k^T in the tail block, -z_k^T in the head block.

    Row k dotted with stacked velocities gives d/dt (||z_k||^2) / 2.
    """
    p = as_points(p, graph.n)
    R = np.zeros((graph.m, 2 * graph.n))
    for k, (i, j) in enumerate(graph.edges):
        z = p[i] - p[j]
        if np.hypot(z[0], z[1]) == 0.0:
            raise DegenerateFrameworkError(f"edge {k}=({i},{j}) has coincident endpoints")
        R[k, 2 * i : 2 * i + 2] = z
        R[k, 2 * j : 2 * j + 2] = -z
    return R


@dataclass(frozen=True)
class RigidityReport:
    rank: int
    dof: int
    classification: str

    @property
    def is_rigid(self) -> bool:
        return self.classification == INFINITESIMALLY_RIGID


def _collinear(p: np.ndarray) -> bool:
    centered = p - p.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    return sv[-1] < RANK_TOL


def check_infinitesimal_rigidity(p: np.ndarray, graph: FormationGraph) -> RigidityReport:
    """Classify the framework (graph, p) by the 2D rigidity-matrix rank test.

    Infinitesimally rigid iff rank = 2n - 3 and (for n >= 3) the positions
    are not all collinear. Rank uses singular values > RANK_TOL * largest.
    """
    p = as_points(p, graph.n)
    R = rigidity_matrix(p, graph)
    sv = np.linalg.svd(R, compute_uv=False)
    rank = int(np.sum(sv > RANK_TOL * sv[0])) if sv[0] > 0 else 0
    dof = 2 * graph.n - rank
    if graph.n >= 3 and _collinear(p):
        cls = DEGENERATE_COLLINEAR
    elif rank == 2 * graph.n - 3:
        cls = INFINITESIMALLY_RIGID
    else:
        cls = FLEXIBLE
    return RigidityReport(rank=rank, dof=dof, classification=cls)


@dataclass(frozen=True)
class ShapeSpec:
    """Desired shape: inter-robot distances plus a consistent reference realization."""

    graph: FormationGraph
    desired_distances: np.ndarray
    reference_positions: np.ndarray

    # Desired distances must match the reference realization to this tolerance.
    CONSISTENCY_TOL = 1e-9

    def __post_init__(self):
        d = np.asarray(self.desired_distances, dtype=float)
        if d.shape != (self.graph.m,):
            raise ValueError(f"expected {self.graph.m} distances, got shape {d.shape}")
        if not np.all(np.isfinite(d)) or np.any(d <= 0):
            raise ValueError("desired distances must be finite and > 0")
        p = as_points(self.reference_positions, self.graph.n, "reference_positions")
        for k, (i, j) in enumerate(self.graph.edges):
            actual = float(np.linalg.norm(p[i] - p[j]))
            if abs(actual - d[k]) > self.CONSISTENCY_TOL:
                raise ValueError(
                    f"reference positions realize edge {k} at {actual!r} m, "
                    f"but desired distance is {d[k]!r} m"
                )
        object.__setattr__(self, "desired_distances", d)
        object.__setattr__(self, "reference_positions", p)

    @property
    def centroid(self) -> np.ndarray:
        return self.reference_positions.mean(axis=0)

    def scaled(self, factor: float) -> "ShapeSpec":
        """Same shape with all distances and reference coordinates scaled about the centroid."""
        if not np.isfinite(factor) or factor <= 0:
            raise ValueError(f"scale factor must be finite and > 0, got {factor}")
        c = self.centroid
        return ShapeSpec(
            graph=self.graph,
            desired_distances=self.desired_distances * factor,
            reference_positions=c + (self.reference_positions - c) * factor,
        )

    def rigidity(self) -> RigidityReport:
        return check_infinitesimal_rigidity(self.reference_positions, self.graph)


def distance_errors(z: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Per-edge error e_k = ||z_k|| - d_k (non-squared form)."""
    z = np.asarray(z, dtype=float)
    d = np.asarray(d, dtype=float)
    if z.shape[0] != d.shape[0]:
        raise ValueError(f"{z.shape[0]} relative positions vs {d.shape[0]} distances")
    return np.linalg.norm(z, axis=1) - d


def potential(z: np.ndarray, d: np.ndarray) -> float:
    """Shape potential V = 1/2 * sum_k (||z_k|| - d_k)^2."""
    e = distance_errors(z, d)
    return 0.5 * float(e @ e)


@dataclass(frozen=True)
class MotionCommand:
    """Operator intent expressed in the shape-fixed frame.

    vx, vy translate the formation, omega rotates it about its centroid,
    scale grows/shrinks it at an exponential rate (1/s).
    """

    vx: float = 0.0
    vy: float = 0.0
    omega: float = 0.0
    scale: float = 0.0

    def __post_init__(self):
        for name in ("vx", "vy", "omega", "scale"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"MotionCommand.{name} must be finite, got {v}")

    @property
    def v(self) -> np.ndarray:
        return np.array([self.vx, self.vy])

    @property
    def is_zero(self) -> bool:
        return self.vx == 0.0 and self.vy == 0.0 and self.omega == 0.0 and self.scale == 0.0

    def clamped(self, max_speed=1.0, max_omega=None, max_scale=None) -> "MotionCommand":
        """Copy with magnitudes limited; translation is clamped direction-preserving."""
        vx, vy = self.vx, self.vy
        speed = float(np.hypot(vx, vy))
        if speed > max_speed > 0:
            vx *= max_speed / speed
            vy *= max_speed / speed
        omega = self.omega
        if max_omega is not None:
            omega = float(np.clip(omega, -max_omega, max_omega))
        scale = self.scale
        if max_scale is not None:
            scale = float(np.clip(scale, -max_scale, max_scale))
        return MotionCommand(vx=vx, vy=vy, omega=omega, scale=scale)


@dataclass(frozen=True)
class MotionParameters:
    """Velocity coefficients sigma, one per (robot, incident edge) pair.

    Robot i's steady motion term is sum_k sigma[(i,k)] * zhat_k^(i), where
    zhat_k^(i) is the edge unit vector as measured from robot i's side.
    """

    graph: FormationGraph
    sigma: dict[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        expected = {(r, k) for k, (i, j) in enumerate(self.graph.edges) for r in (i, j)}
        got = set(self.sigma)
        if got != expected:
            missing = expected - got
            extra = got - expected
            raise ValueError(
                f"sigma support mismatch: missing {sorted(missing)}, extra {sorted(extra)}"
            )
        for key, v in self.sigma.items():
            if not np.isfinite(v):
                raise ValueError(f"sigma[{key}] is not finite: {v}")

    @classmethod
    def zero(cls, graph: FormationGraph) -> "MotionParameters":
        sigma = {(r, k) for k, (i, j) in enumerate(graph.edges) for r in (i, j)}
        return cls(graph=graph, sigma={key: 0.0 for key in sigma})

    def for_robot(self, robot: int) -> dict[int, float]:
        """Edge index -> sigma for one robot."""
        return {k: s for (r, k), s in self.sigma.items() if r == robot}

    def scaled(self, factor: float) -> "MotionParameters":
        return MotionParameters(
            graph=self.graph, sigma={key: s * factor for key, s in self.sigma.items()}
        )

    def __add__(self, other: "MotionParameters") -> "MotionParameters":
        if not isinstance(other, MotionParameters):
            return NotImplemented
        if self.graph.edges != other.graph.edges or set(self.sigma) != set(other.sigma):
            raise SupportMismatchError("motion parameter sets cover different (robot, edge) pairs")
        return MotionParameters(
            graph=self.graph,
            sigma={key: self.sigma[key] + other.sigma[key] for key in self.sigma},
        )


@dataclass(frozen=True)
class MotionSolution:
    """Solved motion parameters plus the per-robot least-squares residuals (m/s)."""

    params: MotionParameters
    residuals: np.ndarray


# A command is realizable when every robot's residual is below this (m/s).
REALIZABLE_TOL = 1e-9


def rigid_body_field(shape: ShapeSpec, cmd: MotionCommand) -> np.ndarray:
    """Target velocity of each robot at the reference shape, (n, 2).

    u*_i = v + omega * R90 (p*_i - c*) + scale * (p*_i - c*), with c* the
    centroid of the reference positions.
    """
    rel = shape.reference_positions - shape.centroid
    spin = np.stack([rot90(r) for r in rel])
    return cmd.v + cmd.omega * spin + cmd.scale * rel


def solve_motion_parameters(shape: ShapeSpec, cmd: MotionCommand) -> MotionSolution:
    """Fit per-(robot, edge) motion parameters realizing ``cmd`` at the reference shape.

    For each robot the rigid-body target velocity is matched in least squares
    by a combination of its own edge unit vectors (minimum-norm solution when
    underdetermined). Raises UnrealizableMotionError if any residual exceeds
    REALIZABLE_TOL.
    """
    targets = rigid_body_field(shape, cmd)
    p = shape.reference_positions
    sigma: dict[tuple[int, int], float] = {}
    residuals = np.zeros(shape.graph.n)
    for robot in range(shape.graph.n):
        incident = shape.graph.incident_edges(robot)
        cols = np.zeros((2, len(incident)))
        for c, k in enumerate(incident):
            i, j = shape.graph.edges[k]
            zhat = (p[i] - p[j]) / shape.desired_distances[k]
            cols[:, c] = shape.graph.edge_sign(robot, k) * zhat
        coeffs, *_ = np.linalg.lstsq(cols, targets[robot], rcond=None)
        residuals[robot] = float(np.linalg.norm(cols @ coeffs - targets[robot]))
        for c, k in enumerate(incident):
            sigma[(robot, k)] = float(coeffs[c])
    if np.any(residuals > REALIZABLE_TOL):
        worst = int(np.argmax(residuals))
        raise UnrealizableMotionError(
            f"graph cannot express the commanded motion at robot {worst} "
            f"(residual {residuals[worst]:.3e} m/s)",
            residuals=residuals,
        )
    return MotionSolution(
        params=MotionParameters(graph=shape.graph, sigma=sigma), residuals=residuals
    )

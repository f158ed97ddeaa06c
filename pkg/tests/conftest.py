import math

import numpy as np
import pytest

from formsim.control import LocalMeasurement, wrap_angle
from formsim.core import FormationGraph, ShapeSpec

# The four-robot square-with-diagonal used throughout: edges
# (0,1),(1,2),(1,3),(0,3),(2,3) over the unit square.
SQUARE_EDGES = ((0, 1), (1, 2), (1, 3), (0, 3), (2, 3))
SQUARE_POSITIONS = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
SQUARE_DISTANCES = np.array([1.0, 1.0, math.sqrt(2.0), 1.0, 1.0])


@pytest.fixture
def square_graph():
    return FormationGraph(n=4, edges=SQUARE_EDGES)


@pytest.fixture
def square_shape(square_graph):
    return ShapeSpec(
        graph=square_graph,
        desired_distances=SQUARE_DISTANCES,
        reference_positions=SQUARE_POSITIONS,
    )


@pytest.fixture
def pair_shape():
    graph = FormationGraph(n=2, edges=((0, 1),))
    return ShapeSpec(
        graph=graph,
        desired_distances=np.array([1.0]),
        reference_positions=np.array([[0.0, 0.0], [1.0, 0.0]]),
    )


@pytest.fixture
def triangle_shape():
    graph = FormationGraph(n=3, edges=((0, 1), (1, 2), (0, 2)))
    p = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3.0) / 2.0]])
    return ShapeSpec(
        graph=graph, desired_distances=np.ones(3), reference_positions=p
    )


def exact_measurements(shape, positions, robot, heading=0.0, range_offsets=None):
    """Noise-free measurements a robot would take at these true positions.

    Built independently of the sensor module: range is the true distance
    (plus an optional per-edge offset), bearing is the angle of
    p_robot - p_neighbor in the robot's frame.
    """
    out = []
    for k in shape.graph.incident_edges(robot):
        i, j = shape.graph.edges[k]
        neighbor = j if robot == i else i
        rel = positions[robot] - positions[neighbor]
        offset = (range_offsets or {}).get(k, 0.0)
        out.append(
            LocalMeasurement(
                edge=k,
                neighbor=neighbor,
                range_m=float(np.linalg.norm(rel)) + offset,
                bearing=wrap_angle(math.atan2(rel[1], rel[0]) - heading),
            )
        )
    return out

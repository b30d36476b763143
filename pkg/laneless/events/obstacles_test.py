"""
Wiring obstacles into the influence graphs of a short chain.

"""
import pytest

from laneless.errors import CorollaryViolated
from laneless.events.obstacles import obstacle_wiring, seen_by
from laneless.formation import Axis, Car, CarRole, GeometryParams, chain_formation
from laneless.graph import InfluenceGraph, InfluenceGraphs, assign_levels, build_influence_graph

OBSTACLE = 100


def chain_with_obstacle(y, geom):
    snapshot = chain_formation(2).add(Car(OBSTACLE, CarRole.OBSTACLE, 0.0, y))
    graph_y = build_influence_graph(snapshot, Axis.Y, geom)
    levels = assign_levels(graph_y)
    graph_x = build_influence_graph(snapshot, Axis.X, geom, levels=levels)
    return snapshot, InfluenceGraphs(graph_y, graph_x, levels)


def test_seen_by():
    snapshot, _ = chain_with_obstacle(-75.0, GeometryParams())

    assert seen_by(snapshot, OBSTACLE, 120.0, True, [1, 2]) == [2]
    assert seen_by(snapshot, OBSTACLE, 120.0, True, []) == []


def test_wired_within_depth():
    geom = GeometryParams()
    snapshot, graphs = chain_with_obstacle(25.0, geom)
    wired = obstacle_wiring(snapshot, OBSTACLE, graphs, geom)

    # Both cars see it, only the first level is within reach of its pseudo-level.
    assert wired.y.in_edges(1) == pytest.approx({0: 0.5, OBSTACLE: 0.5})
    assert wired.y.in_edges(2) == graphs.y.in_edges(2)
    assert OBSTACLE in wired.y.inputs
    assert wired.levels[OBSTACLE] == 0

    # The X root never takes an edge from it.
    assert wired.x.in_edges(1) == {}
    assert wired.x.in_edges(2) == pytest.approx({1: 0.5, OBSTACLE: 0.5})
    assert wired.violations == ()


def test_unit_weighting():
    geom = GeometryParams(weighting="unit")
    snapshot, graphs = chain_with_obstacle(25.0, geom)
    wired = obstacle_wiring(snapshot, OBSTACLE, graphs, geom)

    assert wired.y.in_edges(1) == {0: 1.0, OBSTACLE: 1.0}
    assert wired.y.in_weight(1) == 2.0


def test_unseen_obstacle():
    geom = GeometryParams()
    snapshot, graphs = chain_with_obstacle(-500.0, geom)
    wired = obstacle_wiring(snapshot, OBSTACLE, graphs, geom)

    assert wired.y is graphs.y
    assert wired.x is graphs.x
    assert OBSTACLE not in wired.levels


def test_sole_influence_is_reported():
    geom = GeometryParams()
    snapshot, graphs = chain_with_obstacle(25.0, geom)
    bare_x = InfluenceGraph(Axis.X, 1, frozenset({1, 2}))
    wired = obstacle_wiring(snapshot, OBSTACLE, InfluenceGraphs(graphs.y, bare_x, graphs.levels), geom, W=2.0)

    assert len(wired.violations) == 1
    violation = wired.violations[0]
    assert isinstance(violation, CorollaryViolated)
    assert (violation.car, violation.obstacle) == (2, OBSTACLE)
    assert wired.x.in_edges(2) == pytest.approx({OBSTACLE: 2.0})

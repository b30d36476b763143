"""
Obstacles: stationary cars that influence others but are never influenced.

An obstacle is wired into a graph only while some car sees it. It then sits
one level above the shallowest car that sees it, and only the cars within
the influence depth of that pseudo-level take an edge from it.

"""
import logging
from typing import Iterable, Mapping

import numpy as np

from laneless.constants import defaults
from laneless.errors import CorollaryViolated
from laneless.events.main import EventHandler, InvalidEventError
from laneless.formation import X_ROOT_ID, Car, CarRole, FormationSnapshot, GeometryParams
from laneless.graph import InfluenceGraph, InfluenceGraphs, assign_levels, redistribute_weights, viewing_matrix


def seen_by(snapshot: FormationSnapshot, obstacle, aov, strict, candidates: Iterable[int]):
    """
    Ids among `candidates` whose viewing region holds the obstacle.

    """
    candidates = list(candidates)
    if not candidates:
        return []

    ids = candidates + [obstacle]
    x, y, _, _ = snapshot.arrays(ids)
    visible = viewing_matrix(x, y, aov, strict)
    return [car for i, car in enumerate(candidates) if visible[i, -1]]


def _wire(graph: InfluenceGraph, obstacle, seers, levels: Mapping[int, int], geom: GeometryParams, W):
    """
    Add the obstacle's edges to one graph, returning it with the violations.

    """
    if not seers:
        return graph, []

    pseudo = min(levels[car] for car in seers) - 1
    targets = [car for car in seers if levels[car] - pseudo <= geom.influence_depth]

    edges = list(graph.edges)
    violations = []
    for car in targets:
        existing = graph.in_edges(car)
        if not existing:
            violations.append(CorollaryViolated(car, obstacle))
        if geom.weighting == "unit":
            weight = 1.0
        else:
            weight = sum(existing.values()) / len(existing) if existing else W
        edges.append((obstacle, car, weight))

    wired = graph.with_edges(edges, inputs=graph.inputs | {obstacle}, nodes=graph.nodes | {obstacle})
    if geom.weighting == "uniform":
        wired = redistribute_weights(wired, W)
    return wired, violations


def obstacle_wiring(snapshot: FormationSnapshot, obstacle, graphs: InfluenceGraphs, geom: GeometryParams, W=1.0):
    """
    Wire an obstacle into both influence graphs as an input-only node.

    Cars whose motion is imposed on an axis (the roots, boundary cars and
    cars changing lane in X) take no edge from it. A car left with the
    obstacle as its only influence is reported in `violations`; the run goes
    on but its stability is no longer certified.

    """
    vehicles = [c.id for c in snapshot.vehicles]

    graph_y, violations = _wire(
        graphs.y, obstacle, seen_by(snapshot, obstacle, geom.aov_y, True, vehicles), graphs.levels, geom, W
    )

    graph_x = graphs.x
    if graph_x is not None:
        free = [car for car in vehicles if car not in graph_x.inputs and car != X_ROOT_ID]
        seers = seen_by(snapshot, obstacle, geom.aov_x, False, free)
        graph_x, lateral = _wire(graph_x, obstacle, seers, graphs.levels, geom, W)
        violations += lateral

    for violation in violations:
        logging.warning(f"{violation}, stability is no longer certified")

    levels = assign_levels(graph_y) if graph_y is not graphs.y else graphs.levels
    return InfluenceGraphs(graph_y, graph_x, levels, tuple(graphs.violations) + tuple(violations))


class ObstacleAppear(EventHandler):
    @staticmethod
    def get_kinds():
        return "obstacle-appear"

    def validate(self, event):
        for key in ("x", "y"):
            if key not in event.params or not np.isfinite(event.params[key]):
                raise InvalidEventError(f"obstacle-appear needs a finite {key} position")

    def apply(self, event, state):
        obstacle = event.params.get("id")
        if obstacle is None:
            taken = set(state.snapshot.ids)
            obstacle = defaults.OBSTACLE_BASE_ID
            while obstacle in taken:
                obstacle += 1
        elif state.snapshot.has(obstacle):
            raise InvalidEventError(f"Id {obstacle} is already in use")

        car = Car(obstacle, CarRole.OBSTACLE, event.params["x"], event.params["y"])
        state.snapshot = state.snapshot.add(car)
        state.stale = True
        logging.debug(f"Obstacle {obstacle} placed at ({car.x:g}, {car.y:g})")
        return {"id": obstacle, "x": car.x, "y": car.y}


class ObstacleRemove(EventHandler):
    @staticmethod
    def get_kinds():
        return "obstacle-remove"

    def get_priority(self):
        # Clear obstacles before new ones appear at the same step:
        return self.HIGHEST_PRIORITY

    def validate(self, event):
        if "id" not in event.params:
            raise InvalidEventError("obstacle-remove needs the obstacle id")

    def apply(self, event, state):
        obstacle = event.params["id"]
        if not state.snapshot.has(obstacle) or state.snapshot.car(obstacle).role != CarRole.OBSTACLE:
            raise InvalidEventError(f"No obstacle with id {obstacle}")

        state.snapshot = state.snapshot.remove(obstacle)
        state.stale = True
        return {"id": obstacle}

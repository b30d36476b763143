"""
Influence graphs built from the geometry of a formation.

An edge j -> i means car j lies in the viewing region of car i, so that j's
state enters i's control law. There is one graph per axis: the Y graph is
rooted at the phantom leader (id 0), the X graph at the boundary car with
id 1.

"""
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from laneless.errors import DegenerateGeometry, DimensionMismatch, IsolatedNode, MissingLeader, Unreachable
from laneless.formation import LEADER_ID, X_ROOT_ID, Axis, CarRole, FormationSnapshot, GeometryParams

# Mapping of car id to its hop count from the Y root.
LevelMap = Dict[int, int]

# Slack on the cone boundary so that cars placed exactly on it are seen.
ANGLE_EPS = 1e-9


@dataclass(frozen=True)
class InfluenceGraph:
    """
    Weighted directed influence graph for one axis.

    `edges` holds (source, target, weight) triples. `inputs` lists nodes
    whose state is imposed from outside (boundary cars, obstacles, cars
    changing lane); together with the root they are removed from the reduced
    Laplacian.

    """

    axis: Axis
    root: int
    nodes: FrozenSet[int]
    edges: Tuple[Tuple[int, int, float], ...] = ()
    inputs: FrozenSet[int] = frozenset()

    def __post_init__(self):
        for source, target, weight in self.edges:
            if weight <= 0:
                raise ValueError(f"Edge {source}->{target} has non-positive weight {weight}")
            if source == target:
                raise ValueError(f"Self loop on {source}")
            if source not in self.nodes or target not in self.nodes:
                raise ValueError(f"Edge {source}->{target} references unknown nodes")

        object.__setattr__(self, "nodes", frozenset(self.nodes))
        object.__setattr__(self, "inputs", frozenset(self.inputs))
        object.__setattr__(self, "edges", tuple(sorted((int(s), int(t), float(w)) for s, t, w in self.edges)))

    @cached_property
    def weights(self) -> Dict[Tuple[int, int], float]:
        return {(s, t): w for s, t, w in self.edges}

    def in_edges(self, node) -> Dict[int, float]:
        return {s: w for s, t, w in self.edges if t == node}

    def in_weight(self, node):
        return sum(w for _, t, w in self.edges if t == node)

    def edge_set(self):
        return frozenset((s, t) for s, t, _ in self.edges)

    def to_networkx(self):
        graph = nx.DiGraph()
        graph.add_nodes_from(self.nodes)
        graph.add_weighted_edges_from(self.edges)
        return graph

    def with_edges(self, edges, inputs=None, nodes=None):
        return InfluenceGraph(
            self.axis,
            self.root,
            self.nodes if nodes is None else frozenset(nodes),
            tuple(edges),
            self.inputs if inputs is None else frozenset(inputs),
        )


@dataclass(frozen=True, eq=False)
class LaplacianBundle:
    """
    Full Laplacian, reduced Laplacian and input columns for one axis.

    `state_ids` are the rows and columns of `reduced`, `input_ids` the columns
    of `leader_cols`. The input columns carry the coupling with a positive
    sign: `leader_cols = -full[state, inputs]`.

    """

    axis: Axis
    ordering: Tuple[int, ...]
    full: np.ndarray
    reduced: np.ndarray
    leader_cols: np.ndarray
    state_ids: Tuple[int, ...]
    input_ids: Tuple[int, ...]
    index: Dict[int, int] = field(compare=False, repr=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "index", {car: i for i, car in enumerate(self.ordering)})

    @cached_property
    def state_rows(self):
        return np.array([self.index[c] for c in self.state_ids], dtype=int)

    @cached_property
    def input_rows(self):
        return np.array([self.index[c] for c in self.input_ids], dtype=int)

    def is_lower_triangular(self):
        return not np.any(np.triu(self.full, k=1))


def viewing_matrix(x, y, aov, strict, previous=None, margin=0.0):
    """
    Return a boolean matrix whose entry [i, j] is True when j is seen by i.

    The region of car i is the cone of aperture `aov` degrees around +Y with
    apex at the car. With `strict` only points strictly ahead count. Pairs in
    `previous` stay visible while within `margin` degrees of the cone.

    """
    dx = x[None, :] - x[:, None]
    dy = y[None, :] - y[:, None]
    angle = np.arctan2(np.abs(dx), dy)
    half = math.radians(aov) / 2

    ahead = dy > 0 if strict else dy >= 0
    visible = ahead & (angle <= half + ANGLE_EPS)

    if previous is not None and margin > 0:
        visible |= previous & ahead & (angle <= half + math.radians(margin) + ANGLE_EPS)

    np.fill_diagonal(visible, False)
    return visible


def check_geometry(snapshot: FormationSnapshot):
    """
    Raise DegenerateGeometry when two physical cars share a position.

    """
    cars = [c for c in snapshot.cars if c.role != CarRole.LEADER]
    positions = {}
    for car in cars:
        key = (car.x, car.y)
        if not (math.isfinite(car.x) and math.isfinite(car.y)):
            raise ValueError(f"Car {car.id} has a non-finite position")
        if key in positions:
            raise DegenerateGeometry(positions[key], car.id)
        positions[key] = car.id


def previous_mask(previous: Optional[InfluenceGraph], ids):
    if previous is None:
        return None
    index = {car: i for i, car in enumerate(ids)}
    mask = np.zeros((len(ids), len(ids)), dtype=bool)
    for source, target in previous.edge_set():
        if source in index and target in index:
            mask[index[target], index[source]] = True
    return mask


def provisional_levels(ids: Sequence[int], visible: np.ndarray) -> LevelMap:
    """
    Level of every vehicle in the unpruned cone graph.

    A cone reaches several rows ahead, so a car's level is one more than the
    deepest car it sees (the longest hop count from the leader). Cars that see
    nobody follow the phantom leader and form level one.

    """
    graph = nx.DiGraph()
    graph.add_nodes_from(ids)
    for i, target in enumerate(ids):
        for j in np.flatnonzero(visible[i]):
            graph.add_edge(ids[j], target)

    levels = {}
    for node in nx.topological_sort(graph):
        levels[node] = 1 + max((levels[p] for p in graph.predecessors(node)), default=0)
    return levels


def _weighted(edges_by_target: Mapping[int, Iterable[int]], W, weighting):
    edges = []
    for target, sources in edges_by_target.items():
        sources = sorted(set(sources))
        if not sources:
            continue
        weight = 1.0 if weighting == "unit" else W / len(sources)
        edges.extend((source, target, weight) for source in sources)
    return edges


def _warn_crowded_levels(levels: LevelMap, geom: GeometryParams):
    if geom.max_per_level is None:
        return
    counts = {}
    for level in levels.values():
        counts[level] = counts.get(level, 0) + 1
    for level, count in sorted(counts.items()):
        if count > geom.max_per_level:
            logging.warning(f"Level {level} holds {count} cars, more than the expected {geom.max_per_level}")


def build_influence_graph(
    snapshot: FormationSnapshot,
    axis: Axis,
    geom: GeometryParams,
    W=1.0,
    levels: Optional[LevelMap] = None,
    previous: Optional[InfluenceGraph] = None,
    external: Iterable[int] = (),
) -> InfluenceGraph:
    """
    Derive the influence graph of one axis from the current geometry.

    Obstacles are left out; they are wired in afterwards as input-only nodes.
    `external` marks cars whose X motion is imposed (lane changes). Initial
    weights are uniform so that each node's incoming sum is W, or 1 per edge
    with unit weighting.

    """
    check_geometry(snapshot)

    if axis == Axis.Y:
        return _build_y(snapshot, geom, W, previous)
    return _build_x(snapshot, geom, W, levels, previous, external)


def _build_y(snapshot, geom, W, previous):
    if snapshot.leader is None:
        raise MissingLeader(Axis.Y.value, LEADER_ID)

    vehicles = snapshot.vehicles
    ids = [c.id for c in vehicles]
    x, y, _, _ = snapshot.arrays(ids)

    previous = previous_mask(previous, ids)
    visible = viewing_matrix(x, y, geom.aov_y, strict=True, previous=previous, margin=geom.hysteresis)
    levels = provisional_levels(ids, visible)
    _warn_crowded_levels(levels, geom)

    sources = {}
    for i, target in enumerate(ids):
        seen = [ids[j] for j in np.flatnonzero(visible[i])]
        if not seen:
            sources[target] = [LEADER_ID]
            continue
        # Depth pruning: only cars up to `influence_depth` levels ahead.
        sources[target] = [s for s in seen if levels[target] - levels[s] <= geom.influence_depth]

    nodes = frozenset([LEADER_ID] + ids)
    return InfluenceGraph(Axis.Y, LEADER_ID, nodes, tuple(_weighted(sources, W, geom.weighting)))


def _build_x(snapshot, geom, W, levels, previous, external):
    if not snapshot.has(X_ROOT_ID) or snapshot.car(X_ROOT_ID).role not in (CarRole.BOUNDARY, CarRole.REGULAR):
        raise MissingLeader(Axis.X.value, X_ROOT_ID)

    if levels is None:
        levels = assign_levels(_build_y(snapshot, geom, W, None))

    vehicles = snapshot.vehicles
    ids = [c.id for c in vehicles]
    x, y, _, _ = snapshot.arrays(ids)
    index = {car: i for i, car in enumerate(ids)}

    previous = previous_mask(previous, ids)
    visible = viewing_matrix(x, y, geom.aov_x, strict=False, previous=previous, margin=geom.hysteresis)

    # Cars of each level ordered from right (largest x) to left.
    by_level = {}
    for car in ids:
        by_level.setdefault(levels[car], []).append(car)
    for level in by_level:
        by_level[level].sort(key=lambda c: (-x[index[c]], c))

    sources = {car: [] for car in ids}
    for car in ids:
        level = levels[car]
        role = snapshot.car(car).role

        if role == CarRole.BOUNDARY:
            # Boundary cars follow only the boundary of the level above.
            above = [c for c in by_level.get(level - 1, []) if snapshot.car(c).role == CarRole.BOUNDARY]
            if above and car != X_ROOT_ID:
                nearest = min(above, key=lambda c: (abs(x[index[c]] - x[index[car]]), c))
                sources[car].append(nearest)
            continue

        row = by_level[level]
        position = row.index(car)
        if position > 0:
            sources[car].append(row[position - 1])
        if geom.x_bidirectional and position + 1 < len(row):
            sources[car].append(row[position + 1])

        for j in np.flatnonzero(visible[index[car]]):
            other = ids[j]
            if 1 <= level - levels[other] <= geom.influence_depth:
                sources[car].append(other)

    boundary = {c.id for c in vehicles if c.role == CarRole.BOUNDARY}
    inputs = (boundary | set(external)) - {X_ROOT_ID}
    return InfluenceGraph(Axis.X, X_ROOT_ID, frozenset(ids), tuple(_weighted(sources, W, geom.weighting)), inputs)


def assign_levels(graph_y: InfluenceGraph) -> LevelMap:
    """
    Shortest hop count from the root to every node.

    Input-only nodes (obstacles) take the level just above the shallowest car
    they influence, or no level when they influence nobody.

    """
    graph = graph_y.to_networkx()
    levels = dict(nx.single_source_shortest_path_length(graph, graph_y.root))

    for node in sorted(graph_y.nodes):
        if node in levels:
            continue
        if node not in graph_y.inputs:
            raise Unreachable(node)
        reached = [levels[t] for t in graph.successors(node) if t in levels]
        if reached:
            levels[node] = min(reached) - 1

    return levels


def canonical_numbering(snapshot: FormationSnapshot, levels: LevelMap) -> Tuple[int, ...]:
    """
    Order cars by level, then from right to left within a level.

    The leftmost car of a level gets the highest number. Ties on x are broken
    by ascending id and cars without a level go last.

    """

    def key(car):
        if car.id in levels:
            return (0, levels[car.id], -car.x, car.id)
        return (1, 0, 0.0, car.id)

    return tuple(c.id for c in sorted(snapshot.cars, key=key))


def numbering(ordering: Sequence[int]) -> Dict[int, int]:
    """
    Map each car id to its number in `ordering`.

    """
    return {car: number for number, car in enumerate(ordering)}


def relabel_graph(graph: InfluenceGraph, mapping: Mapping[int, int]) -> InfluenceGraph:
    return InfluenceGraph(
        graph.axis,
        mapping[graph.root],
        frozenset(mapping[n] for n in graph.nodes),
        tuple((mapping[s], mapping[t], w) for s, t, w in graph.edges),
        frozenset(mapping[n] for n in graph.inputs),
    )


def relabel_snapshot(snapshot: FormationSnapshot, mapping: Mapping[int, int]) -> FormationSnapshot:
    return FormationSnapshot(tuple(replace(c, id=mapping[c.id]) for c in snapshot.cars), snapshot.t)


def laplacian(graph: InfluenceGraph, ordering: Sequence[int]) -> LaplacianBundle:
    """
    Weighted directed Laplacian of `graph` in the given node order.

    Off-diagonal entries are -w_ij for an edge j -> i, the diagonal is the
    node's incoming weight, so every row sums to zero.

    """
    order = tuple(n for n in ordering if n in graph.nodes)
    if len(order) != len(graph.nodes):
        raise DimensionMismatch(len(graph.nodes), len(order))

    index = {car: i for i, car in enumerate(order)}
    full = np.zeros((len(order), len(order)))
    for source, target, weight in graph.edges:
        full[index[target], index[source]] -= weight
        full[index[target], index[target]] += weight

    inputs = set(graph.inputs) | {graph.root}
    state_ids = tuple(n for n in order if n not in inputs)
    input_ids = tuple(n for n in order if n in inputs)
    rows = [index[n] for n in state_ids]
    cols = [index[n] for n in input_ids]

    reduced = full[np.ix_(rows, rows)]
    leader_cols = -full[np.ix_(rows, cols)]
    return LaplacianBundle(graph.axis, order, full, reduced, leader_cols, state_ids, input_ids)


def unreachable(graph: InfluenceGraph):
    """
    Nodes other than inputs that have no directed path from the root.

    """
    if graph.root not in graph.nodes:
        return set(graph.nodes)
    reached = nx.descendants(graph.to_networkx(), graph.root) | {graph.root}
    return {n for n in graph.nodes if n not in reached and n not in graph.inputs}


def has_directed_spanning_tree(graph: InfluenceGraph) -> bool:
    return not unreachable(graph)


def redistribute_weights(graph: InfluenceGraph, W) -> InfluenceGraph:
    """
    Scale each non-root node's incoming weights so they sum to W.

    Relative proportions are preserved. Input nodes without incoming edges
    are left alone, any other node without one raises IsolatedNode.

    """
    totals = {}
    for _, target, weight in graph.edges:
        totals[target] = totals.get(target, 0.0) + weight

    for node in sorted(graph.nodes):
        if node != graph.root and node not in totals and node not in graph.inputs:
            raise IsolatedNode(node)

    edges = []
    for source, target, weight in graph.edges:
        if target == graph.root:
            edges.append((source, target, weight))
        else:
            edges.append((source, target, weight * W / totals[target]))
    return graph.with_edges(edges)


@dataclass(frozen=True, eq=False)
class InfluenceGraphs:
    """
    The Y and X graphs of one mode together with the Y levels.

    `x` is None when the formation has no car to root the X graph.
    `violations` lists the obstacles that are the sole influence of a car.

    """

    y: InfluenceGraph
    x: Optional[InfluenceGraph]
    levels: LevelMap
    violations: Tuple = ()

    def edge_sets(self):
        return (self.y.edge_set(), self.x.edge_set() if self.x is not None else frozenset())

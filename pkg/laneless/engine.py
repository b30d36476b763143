"""
Drive a scenario from t = 0 to its end.

At every step boundary the due events are applied, the influence graphs are
re-derived from the current geometry and the formation is advanced by one
RK4 step. Graph changes are recorded in the switch log.

"""
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from laneless.constants import defaults
from laneless.dynamics import Mode, step
from laneless.equilibrium import spacing_constants
from laneless.errors import SpanningTreeLost
from laneless.events.main import InvalidEventError, load_handlers
from laneless.events.obstacles import obstacle_wiring
from laneless.formation import X_ROOT_ID, Axis, CarRole, FormationSnapshot, GeometryParams
from laneless.graph import (
    InfluenceGraphs,
    LevelMap,
    assign_levels,
    build_influence_graph,
    canonical_numbering,
    laplacian,
    previous_mask,
    unreachable,
    viewing_matrix,
)


@dataclass
class Trace:
    """
    Recorded run: sampled snapshots with their levels, applied events and
    graph switches.

    """

    samples: List[FormationSnapshot] = field(default_factory=list)
    levels: List[LevelMap] = field(default_factory=list)
    event_log: List[dict] = field(default_factory=list)
    switch_log: List[dict] = field(default_factory=list)

    @property
    def times(self):
        return [s.t for s in self.samples]

    def record(self, snapshot: FormationSnapshot, levels: LevelMap):
        self.samples.append(snapshot)
        self.levels.append(dict(levels))

    @property
    def final(self) -> Optional[FormationSnapshot]:
        return self.samples[-1] if self.samples else None


class RunState:
    """
    Mutable state of one run, handed to the event handlers.

    Setting `stale` forces the graphs, the spacing constants and the mode to
    be rebuilt before the next step.

    """

    def __init__(self, scenario):
        self.snapshot = scenario.initial
        self.gains = scenario.gains
        self.geom = scenario.geom
        self.template = scenario.template
        self.leader_v0 = scenario.leader_v0
        self.lane_changes = {}
        self.graphs: Optional[InfluenceGraphs] = None
        self.mode: Optional[Mode] = None
        self.key = None
        self.stale = True


def derive_graphs(
    snapshot: FormationSnapshot,
    geom: GeometryParams,
    W=1.0,
    previous: Optional[InfluenceGraphs] = None,
    external=(),
    t=0.0,
) -> InfluenceGraphs:
    """
    Influence graphs of the current geometry, obstacles included.

    Raises SpanningTreeLost when some car cannot be reached from the phantom
    leader in the Y graph.

    """
    graph_y = build_influence_graph(snapshot, Axis.Y, geom, W, previous=previous.y if previous else None)
    lost = unreachable(graph_y)
    if lost:
        raise SpanningTreeLost(t, lost)
    levels = assign_levels(graph_y)

    graph_x = None
    if snapshot.has(X_ROOT_ID) and snapshot.car(X_ROOT_ID).role in (CarRole.BOUNDARY, CarRole.REGULAR):
        graph_x = build_influence_graph(
            snapshot,
            Axis.X,
            geom,
            W,
            levels=levels,
            previous=previous.x if previous else None,
            external=external,
        )

    graphs = InfluenceGraphs(graph_y, graph_x, levels)
    for obstacle in snapshot.obstacles:
        graphs = obstacle_wiring(snapshot, obstacle.id, graphs, geom, W)

    if graphs.x is not None:
        stranded = unreachable(graphs.x)
        if stranded:
            logging.warning(f"Cars {sorted(stranded)} have no lateral path from car {X_ROOT_ID} at t={t:g}")
    return graphs


def geometry_key(snapshot: FormationSnapshot, geom: GeometryParams, graphs: Optional[InfluenceGraphs], external):
    """
    Everything the graphs depend on: who sees whom and the lateral order
    within each level.

    Graphs are only re-derived when this key changes.

    """
    cars = [c.id for c in snapshot.cars if c.role != CarRole.LEADER]
    x, y, _, _ = snapshot.arrays(cars)

    previous_y = previous_mask(graphs.y, cars) if graphs else None
    previous_x = previous_mask(graphs.x, cars) if graphs and graphs.x is not None else None
    seen_y = viewing_matrix(x, y, geom.aov_y, True, previous_y, geom.hysteresis)
    seen_x = viewing_matrix(x, y, geom.aov_x, False, previous_x, geom.hysteresis)

    levels = graphs.levels if graphs else {}
    order = tuple(sorted(range(len(cars)), key=lambda i: (levels.get(cars[i], -1), -x[i], cars[i])))
    return (snapshot.ids, frozenset(external), seen_y.tobytes(), seen_x.tobytes(), order)


def _switch_entries(t, before: InfluenceGraphs, after: InfluenceGraphs):
    entries = []
    for axis, old, new in zip((Axis.Y, Axis.X), before.edge_sets(), after.edge_sets()):
        added, removed = sorted(new - old), sorted(old - new)
        if added or removed:
            entries.append(
                {"t": t, "axis": axis.value, "added": [list(e) for e in added], "removed": [list(e) for e in removed]}
            )
            logging.debug(f"Switch at t={t:g} on {axis.value}: +{added} -{removed}")
    return entries


def refresh(state: RunState, trace: Trace, t):
    """
    Re-derive graphs and rebuild the mode when the geometry or the state
    changed.

    """
    external = tuple(sorted(state.lane_changes))
    key = geometry_key(state.snapshot, state.geom, state.graphs, external)
    if not state.stale and key == state.key:
        return

    graphs = derive_graphs(state.snapshot, state.geom, state.gains.W, state.graphs, external, t)
    known = set()
    if state.graphs is not None:
        trace.switch_log.extend(_switch_entries(t, state.graphs, graphs))
        known = {(v.car, v.obstacle) for v in state.graphs.violations}

    for violation in graphs.violations:
        if (violation.car, violation.obstacle) not in known:
            trace.event_log.append(
                {"t": t, "kind": "corollary-violated", "car": violation.car, "obstacle": violation.obstacle}
            )

    C = {}
    if graphs.x is not None:
        ordering = canonical_numbering(state.snapshot, graphs.levels)
        bundle_x = laplacian(graphs.x, ordering)
        C = spacing_constants(state.snapshot, graphs.x, bundle_x, graphs.levels, state.template, state.gains.g_x)

    state.graphs = graphs
    state.mode = Mode.build(state.snapshot, graphs, state.gains, C)
    state.key = geometry_key(state.snapshot, state.geom, graphs, external)
    state.stale = False


def schedule(events, settings, handlers) -> Dict[int, list]:
    """
    Group events by the step they are due at, highest priority first.

    """
    due = {}
    for order, event in enumerate(events):
        priority = handlers[event.kind].get_priority()
        due.setdefault(settings.step_of(event.at), []).append((-priority, order, event))
    return {n: [event for _, _, event in sorted(entries, key=lambda e: e[:2])] for n, entries in due.items()}


def _apply(event, state: RunState, trace: Trace, handlers, t):
    try:
        details = handlers[event.kind].apply(event, state)
    except InvalidEventError as e:
        logging.warning(f"Skipping {event.kind} at t={t:g}: {e}")
        trace.event_log.append({"t": t, "kind": event.kind, "refused": str(e)})
        return

    logging.debug(f"Applied {event.kind} at t={t:g}: {details}")
    trace.event_log.append({"t": t, "kind": event.kind, **details})


def run(scenario, every=1) -> Trace:
    """
    Simulate a scenario, sampling every `every` steps and at the end.

    """
    if every < 1:
        raise ValueError(f"Sampling interval must be at least 1, got {every}")

    handlers = load_handlers()
    settings = scenario.settings
    due = schedule(scenario.events, settings, handlers)
    state = RunState(scenario)
    trace = Trace()

    start_time = time.time()
    for n in range(settings.steps + 1):
        t = n * settings.dt
        state.snapshot = replace(state.snapshot, t=t)

        for event in due.get(n, ()):
            _apply(event, state, trace, handlers, t)

        for car, profile in list(state.lane_changes.items()):
            if settings.step_of(profile.t1) <= n:
                del state.lane_changes[car]
                state.stale = True
                trace.event_log.append({"t": t, "kind": "lane-change-end", "car": car})

        refresh(state, trace, t)

        if n % every == 0 or n == settings.steps:
            trace.record(state.snapshot, state.graphs.levels)
        if n == settings.steps:
            break

        state.snapshot = step(state.snapshot, state.mode, settings.dt, state.leader_v0, state.lane_changes)

    logging.info(
        f"Simulated {len(scenario.initial.cars)} cars to t={settings.t_end:g} in {time.time() - start_time:.2f}s "
        f"({len(trace.switch_log)} switches, {len(trace.event_log)} events)"
    )
    return trace


def max_velocity_deviation(snapshot: FormationSnapshot, v0):
    vehicles = snapshot.vehicles
    if not vehicles:
        return 0.0
    _, _, vx, vy = snapshot.arrays([c.id for c in vehicles])
    return float(max(np.max(np.abs(vy - v0)), np.max(np.abs(vx))))


def level_gaps(snapshot: FormationSnapshot, levels: LevelMap):
    """
    Mean longitudinal gap between each level and the one ahead of it.

    The first entry is the gap between the leader and level one.

    """
    rows = {}
    for car in snapshot.cars:
        if car.role != CarRole.OBSTACLE and car.id in levels:
            rows.setdefault(levels[car.id], []).append(car.y)
    depths = sorted(rows)
    return [float(np.mean(rows[a]) - np.mean(rows[b])) for a, b in zip(depths, depths[1:])]


def lateral_gaps(snapshot: FormationSnapshot, levels: LevelMap) -> Dict[int, List[float]]:
    """
    Gaps between neighbouring cars of every level, from the right.

    """
    rows = {}
    for car in snapshot.vehicles:
        if car.id in levels:
            rows.setdefault(levels[car.id], []).append(car.x)
    gaps = {}
    for level, xs in sorted(rows.items()):
        xs = sorted(xs, reverse=True)
        gaps[level] = [float(a - b) for a, b in zip(xs, xs[1:])]
    return gaps


def summarize(trace: Trace, scenario, tolerance=None):
    """
    Final spacings, velocity deviation and convergence time of a run.

    The convergence time is the first sample after which the velocity
    deviation stays below `tolerance`, None when it never does.

    """
    tolerance = defaults.CONVERGENCE_TOLERANCE if tolerance is None else tolerance
    if not trace.samples:
        return {}

    v0 = scenario.leader_v0
    for entry in trace.event_log:
        if entry["kind"] == "leader-speed" and "v0" in entry:
            v0 = entry["v0"]

    deviations = [max_velocity_deviation(s, v0) for s in trace.samples]
    converged = None
    for t, deviation in zip(reversed(trace.times), reversed(deviations)):
        if deviation >= tolerance:
            break
        converged = t

    final, levels = trace.samples[-1], trace.levels[-1]
    return {
        "t_end": final.t,
        "level_gaps": level_gaps(final, levels),
        "lateral_gaps": {str(level): gaps for level, gaps in lateral_gaps(final, levels).items()},
        "max_velocity_deviation": deviations[-1],
        "convergence_time": converged,
        "switches": len(trace.switch_log),
        "events": len(trace.event_log),
    }

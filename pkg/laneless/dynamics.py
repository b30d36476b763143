"""
Second-order consensus dynamics on both axes.

Per axis the regular cars follow

    a = -k L x - b L v - k g offset

where L is the full Laplacian of the axis graph in canonical order, so that
input columns (leader, boundary cars, obstacles, cars changing lane) enter
through their coupling with the state rows. Inputs are never integrated,
their motion is imposed.

"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, Mapping, Optional, Tuple

import numpy as np

from laneless.errors import DimensionMismatch, NonFiniteState, VelocityJump
from laneless.formation import LEADER_ID, Axis, CarRole, FormationSnapshot, GainParams
from laneless.graph import InfluenceGraph, InfluenceGraphs, LaplacianBundle, canonical_numbering, laplacian

# A lateral drive maps a time to an imposed (x, vx) pair.
Drive = Callable[[float], Tuple[float, float]]


def y_acceleration(car, snapshot: FormationSnapshot, graph_y: InfluenceGraph, gains: GainParams):
    """
    Longitudinal acceleration of `car` from its in-neighbours.

    Each in-edge contributes its share w_ij / W_i of the spacing g_y, W_i
    being the incoming weight of the car, which makes this the row expansion
    of -k L y - b L v - k g_y.

    """
    own = snapshot.car(car)
    edges = graph_y.in_edges(car)
    total = sum(edges.values())

    acceleration = 0.0
    for source, weight in edges.items():
        other = snapshot.car(source)
        acceleration += gains.b * (weight * other.vy - weight * own.vy)
        acceleration += gains.k * (weight * other.y - weight * own.y - (weight / total) * gains.g_y)
    return acceleration


def x_acceleration(
    car, snapshot: FormationSnapshot, graph_x: InfluenceGraph, gains: GainParams, C: Mapping[int, float]
):
    """
    Lateral acceleration of `car`, the row expansion of -k_x L x - b_x L v - k_x g_x C.

    """
    own = snapshot.car(car)

    acceleration = 0.0
    for source, weight in graph_x.in_edges(car).items():
        other = snapshot.car(source)
        acceleration += gains.b_x * weight * (other.vx - own.vx)
        acceleration += gains.k_x * weight * (other.x - own.x)
    return acceleration - gains.k_x * gains.g_x * C.get(car, 0.0)


@dataclass(frozen=True, eq=False)
class AxisLaw:
    """
    Matrix form of the control law of one axis.

    `offset` holds the constant term of every state row.

    """

    bundle: LaplacianBundle
    k: float
    b: float
    offset: np.ndarray

    @cached_property
    def coupling(self):
        return self.bundle.full[self.bundle.state_rows]

    def acceleration(self, positions, velocities):
        """
        Accelerations of the state rows given full position and velocity
        vectors in the bundle's ordering.

        """
        return -self.k * (self.coupling @ positions) - self.b * (self.coupling @ velocities) + self.offset


def y_law(bundle: LaplacianBundle, gains: GainParams) -> AxisLaw:
    diagonal = np.diag(bundle.reduced)
    offset = np.where(diagonal > 0, -gains.k * gains.g_y, 0.0)
    return AxisLaw(bundle, gains.k, gains.b, offset)


def x_law(bundle: LaplacianBundle, gains: GainParams, C: Mapping[int, float]) -> AxisLaw:
    offset = np.array([-gains.k_x * gains.g_x * C.get(car, 0.0) for car in bundle.state_ids])
    return AxisLaw(bundle, gains.k_x, gains.b_x, offset)


def y_accelerations(snapshot: FormationSnapshot, bundle: LaplacianBundle, gains: GainParams):
    """
    Stacked Y accelerations of the state cars of `bundle`.

    """
    _, y, _, vy = snapshot.arrays(bundle.ordering)
    return y_law(bundle, gains).acceleration(y, vy)


def x_accelerations(snapshot: FormationSnapshot, bundle: LaplacianBundle, gains: GainParams, C: Mapping[int, float]):
    x, _, vx, _ = snapshot.arrays(bundle.ordering)
    return x_law(bundle, gains, C).acceleration(x, vx)


@dataclass(frozen=True, eq=False)
class StateVector:
    """
    Stacked [positions; velocities] of the state cars of one axis.

    """

    axis: Axis
    ids: Tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (2 * len(self.ids),):
            raise DimensionMismatch(2 * len(self.ids), values.size)
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "values", values)

    @classmethod
    def from_snapshot(cls, snapshot: FormationSnapshot, bundle: LaplacianBundle):
        x, y, vx, vy = snapshot.arrays(bundle.state_ids)
        if bundle.axis == Axis.Y:
            return cls(Axis.Y, bundle.state_ids, np.concatenate([y, vy]))
        return cls(Axis.X, bundle.state_ids, np.concatenate([x, vx]))

    @property
    def positions(self):
        return self.values[: len(self.ids)]

    @property
    def velocities(self):
        return self.values[len(self.ids) :]


def apply_impulse(state: StateVector, delta) -> StateVector:
    """
    Shift the position block of `state` by `delta`.

    `delta` is either a full [positions; velocities] vector whose velocity
    block must be zero, or the position block alone.

    """
    delta = np.asarray(delta, dtype=float)
    m = len(state.ids)

    if delta.shape == (2 * m,):
        if np.any(delta[m:] != 0):
            raise VelocityJump()
        delta = delta[:m]
    elif delta.shape != (m,):
        raise DimensionMismatch(2 * m, delta.size)

    values = state.values.copy()
    values[:m] += delta
    return StateVector(state.axis, state.ids, values)


def rk4_step(f, t, w, dt):
    """
    Single classical Runge-Kutta step of w' = f(t, w).

    """
    k1 = f(t, w)
    k2 = f(t + dt / 2, w + dt / 2 * k1)
    k3 = f(t + dt / 2, w + dt / 2 * k2)
    k4 = f(t + dt, w + dt * k3)
    return w + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def boundary_references(snapshot: FormationSnapshot, levels: Mapping[int, int]) -> Dict[int, int]:
    """
    Pick for each boundary car the regular car of its level it mirrors in Y.

    The nearest regular car by lateral distance is chosen, ties going to
    the lower id. Boundary cars alone in their level are not mirrored.

    """
    references = {}
    for boundary in snapshot.with_role(CarRole.BOUNDARY):
        level = levels.get(boundary.id)
        peers = [c for c in snapshot.with_role(CarRole.REGULAR) if level is not None and levels.get(c.id) == level]
        if peers:
            references[boundary.id] = min(peers, key=lambda c: (abs(c.x - boundary.x), c.id)).id
    return references


@dataclass(frozen=True, eq=False)
class Mode:
    """
    Everything needed to integrate one switching mode.

    `ids` is the id order of the snapshots this mode steps. `C` maps X state
    cars to their spacing constants.

    """

    ids: Tuple[int, ...]
    graphs: InfluenceGraphs
    gains: GainParams
    y: AxisLaw
    x: Optional[AxisLaw]
    C: Mapping[int, float] = field(default_factory=dict)
    boundary: Mapping[int, int] = field(default_factory=dict)

    @classmethod
    def build(cls, snapshot: FormationSnapshot, graphs: InfluenceGraphs, gains: GainParams, C=None):
        C = dict(C or {})
        ordering = canonical_numbering(snapshot, graphs.levels)

        law_y = y_law(laplacian(graphs.y, ordering), gains)
        law_x = x_law(laplacian(graphs.x, ordering), gains, C) if graphs.x is not None else None
        return cls(snapshot.ids, graphs, gains, law_y, law_x, C, boundary_references(snapshot, graphs.levels))

    @cached_property
    def index(self):
        return {car: i for i, car in enumerate(self.ids)}

    def gather(self, law: AxisLaw):
        return np.array([self.index[car] for car in law.bundle.ordering], dtype=int)

    @cached_property
    def y_gather(self):
        return self.gather(self.y)

    @cached_property
    def x_gather(self):
        return self.gather(self.x) if self.x is not None else None


def _integrate(law: AxisLaw, gather, positions, velocities, t, dt, inputs):
    """
    Advance the state rows of one axis in place, with input rows imposed by
    `inputs(tau) -> (positions, velocities)`.

    """
    p = positions[gather]
    v = velocities[gather]
    rows, cols = law.bundle.state_rows, law.bundle.input_rows
    m = len(rows)

    def rhs(tau, w):
        p[rows] = w[:m]
        v[rows] = w[m:]
        p[cols], v[cols] = inputs(tau)
        return np.concatenate([w[m:], law.acceleration(p, v)])

    w = rk4_step(rhs, t, np.concatenate([p[rows], v[rows]]), dt)
    p[rows] = w[:m]
    v[rows] = w[m:]
    p[cols], v[cols] = inputs(t + dt)

    positions[gather] = p
    velocities[gather] = v


def _leader_inputs(law: AxisLaw, y, vy, gather, t, v0):
    cols = gather[law.bundle.input_rows]
    base_y, base_v = y[cols].copy(), vy[cols].copy()
    lead = law.bundle.input_ids.index(LEADER_ID)
    base_v[lead] = v0
    start = base_y[lead]

    def inputs(tau):
        current = base_y.copy()
        current[lead] = start + v0 * (tau - t)
        return current, base_v

    return inputs


def _lateral_inputs(law: AxisLaw, x, gather, drive: Mapping[int, Drive]):
    cols = gather[law.bundle.input_rows]
    base_x, base_v = x[cols].copy(), np.zeros(len(cols))
    driven = [(i, drive[car]) for i, car in enumerate(law.bundle.input_ids) if car in drive]

    def inputs(tau):
        if not driven:
            return base_x, base_v
        current, speed = base_x.copy(), base_v.copy()
        for i, profile in driven:
            current[i], speed[i] = profile(tau)
        return current, speed

    return inputs


def advance(mode: Mode, x, y, vx, vy, t, dt, v0, drive: Mapping[int, Drive] = None):
    """
    One RK4 step on both axes, updating the arrays in place.

    The arrays follow `mode.ids`. The leader moves at `v0`, obstacles and
    boundary cars keep their lateral position, cars in `drive` follow their
    imposed lateral profile. Boundary cars mirror their reference car in Y
    after the step.

    """
    drive = drive or {}

    _integrate(mode.y, mode.y_gather, y, vy, t, dt, _leader_inputs(mode.y, y, vy, mode.y_gather, t, v0))
    if mode.x is not None:
        _integrate(mode.x, mode.x_gather, x, vx, t, dt, _lateral_inputs(mode.x, x, mode.x_gather, drive))

    index = mode.index
    for boundary, reference in mode.boundary.items():
        y[index[boundary]] = y[index[reference]]
        vy[index[boundary]] = vy[index[reference]]
        vx[index[boundary]] = 0.0

    finite = np.isfinite(x) & np.isfinite(y) & np.isfinite(vx) & np.isfinite(vy)
    if not finite.all():
        cars = [mode.ids[i] for i in np.flatnonzero(~finite)]
        logging.error(f"Integration diverged at t={t + dt:g}, check the gains")
        raise NonFiniteState(t + dt, cars)


def step(snapshot: FormationSnapshot, mode: Mode, dt, leader_v0, drive: Mapping[int, Drive] = None):
    """
    Advance a snapshot by one fixed RK4 step of length `dt`.

    """
    if snapshot.ids != mode.ids:
        raise DimensionMismatch(len(mode.ids), len(snapshot.ids))

    x, y, vx, vy = snapshot.arrays()
    advance(mode, x, y, vx, vy, snapshot.t, dt, leader_v0, drive)
    return snapshot.with_arrays(x, y, vx, vy, snapshot.t + dt)

"""
Equilibrium positions and the lateral spacing constants.

Lateral templates are measured leftwards from the road boundary in
multiples of g_x, so the desired lateral position of the car in template
slot x_f is x_boundary - g_x * x_f. The spacing constants are C = L x_f and
the lateral equilibrium satisfies L x = -g_x C.

"""
import logging
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, solve, solve_triangular

from laneless.errors import DimensionMismatch, SingularLevel, ZeroSpacing
from laneless.formation import LEADER_ID, CarRole, FormationSnapshot
from laneless.graph import InfluenceGraph, LaplacianBundle, LevelMap

# Pivots below this magnitude count as zero in the echelon reduction.
RANK_TOLERANCE = 1e-10


class CVector(Mapping):
    """
    Spacing constants of the lateral law, keyed by car id.

    """

    def __init__(self, ids: Sequence[int], values):
        values = np.asarray(values, dtype=float)
        if values.shape != (len(ids),):
            raise DimensionMismatch(len(ids), values.size)
        self.ids = tuple(ids)
        self.values = values
        self._index = {car: i for i, car in enumerate(self.ids)}

    def __getitem__(self, car):
        return float(self.values[self._index[car]])

    def __iter__(self):
        return iter(self.ids)

    def __len__(self):
        return len(self.ids)

    def __repr__(self):
        return f"CVector({dict(self)})"

    def replaced(self, updates: Mapping):
        values = self.values.copy()
        for car, value in updates.items():
            values[self._index[car]] = value
        return CVector(self.ids, values)


@dataclass(frozen=True)
class OffsetTemplate:
    """
    Lateral template in multiples of g_x, one slot per car in canonical order.

    Slots are assigned by position: the n-th car of the lateral ordering
    (obstacles excluded) takes `slots[n]`. Without explicit slots every
    level is spaced uniformly: 0 for its rightmost car, then 1, 2, ...

    """

    slots: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.slots is not None:
            object.__setattr__(self, "slots", tuple(float(s) for s in self.slots))

    @property
    def uniform(self):
        return self.slots is None

    def positions(self, ordering: Sequence[int], snapshot: FormationSnapshot, levels: LevelMap) -> Dict[int, float]:
        """
        Template slot of every non-obstacle car of `ordering`.

        """
        cars = [c for c in ordering if c != LEADER_ID and snapshot.car(c).role != CarRole.OBSTACLE]
        if self.uniform:
            return uniform_template(cars, levels)
        if len(self.slots) < len(cars):
            raise DimensionMismatch(len(cars), len(self.slots))
        return {car: self.slots[n] for n, car in enumerate(cars)}


def uniform_template(ordering: Sequence[int], levels: LevelMap) -> Dict[int, float]:
    """
    Slot index of every car within its level, counted from the right.

    """
    slots, seen = {}, {}
    for car in ordering:
        level = levels.get(car)
        slots[car] = float(seen.get(level, 0))
        seen[level] = seen.get(level, 0) + 1
    return slots


def template_positions(slots: Mapping[int, float], g_x, anchor=0.0) -> Dict[int, float]:
    """
    Desired lateral positions for template slots, leftwards of `anchor`.

    """
    return {car: anchor - g_x * slot for car, slot in slots.items()}


def solve_y_equilibrium(bundle: LaplacianBundle, g_y, leader_y, inputs: Mapping[int, float] = None):
    """
    Solve -L y = g_y [0; 1] given the leader position.

    Returns y for every node of `bundle.ordering`. Other input nodes
    (obstacles) take their positions from `inputs`. The reduced Laplacian is
    lower triangular under canonical numbering and the system is solved by
    forward substitution.

    """
    known = dict(inputs or {})
    known[LEADER_ID] = leader_y

    diagonal = np.diag(bundle.reduced)
    for car, entry in zip(bundle.state_ids, diagonal):
        if entry == 0:
            raise SingularLevel(car)

    given = np.array([known[car] for car in bundle.input_ids], dtype=float)
    rhs = -g_y * np.ones(len(bundle.state_ids)) + bundle.leader_cols @ given

    if bundle.is_lower_triangular():
        solution = solve_triangular(bundle.reduced, rhs, lower=True) if len(rhs) else rhs
    else:
        logging.debug("Y Laplacian is not triangular in canonical order, solving densely")
        solution = solve(bundle.reduced, rhs)

    y = np.empty(len(bundle.ordering))
    y[bundle.state_rows] = solution
    y[bundle.input_rows] = given
    return y


def compute_C_from_template(bundle_x: LaplacianBundle, x_f) -> CVector:
    """
    C = L x_f for a template aligned with the bundle's ordering.

    `x_f` is a vector in `bundle_x.ordering` or a mapping of car id to slot.

    """
    if isinstance(x_f, Mapping):
        missing = [car for car in bundle_x.ordering if car not in x_f]
        if missing:
            raise DimensionMismatch(len(bundle_x.ordering), len(bundle_x.ordering) - len(missing))
        x_f = [x_f[car] for car in bundle_x.ordering]

    x_f = np.asarray(x_f, dtype=float)
    if x_f.shape != (len(bundle_x.ordering),):
        raise DimensionMismatch(len(bundle_x.ordering), x_f.size)
    return CVector(bundle_x.ordering, bundle_x.full @ x_f)


def compute_z_local(car, desired: Mapping[int, float], weights: Mapping[int, float], g_x):
    """
    Spacing constant of one car from its own and its in-neighbours' desired
    lateral positions.

    Only local information is used: z_i = (sum_j w_ij x*_j - W_i x*_i) / g_x,
    which equals row i of L x_f for desired positions built from x_f.

    """
    if g_x == 0:
        raise ZeroSpacing()
    total = sum(weights.values())
    return (sum(w * desired[j] for j, w in weights.items()) - total * desired[car]) / g_x


@dataclass(frozen=True)
class ExistenceReport:
    level: int
    cars: Tuple[int, ...]
    feasible: bool
    rank: int
    equations: int


def echelon_rank(matrix, tol=RANK_TOLERANCE):
    """
    Rank of `matrix` by reduction to row echelon form with unit pivots.

    """
    reduced = np.array(matrix, dtype=float, copy=True)
    if reduced.size == 0:
        return 0

    rows, cols = reduced.shape
    rank = 0
    for col in range(cols):
        if rank == rows:
            break
        pivot = rank + int(np.argmax(np.abs(reduced[rank:, col])))
        if abs(reduced[pivot, col]) <= tol:
            continue
        reduced[[rank, pivot]] = reduced[[pivot, rank]]
        reduced[rank] /= reduced[rank, col]
        below = reduced[rank + 1 :, col][:, None]
        reduced[rank + 1 :] -= below * reduced[rank]
        rank += 1
    return rank


def existence_system(bundle_x: LaplacianBundle, cars: Sequence[int], g_x):
    """
    Coefficients and right-hand side of the spacing system of one level.

    Unknowns are the lateral positions of the level's cars followed by the z
    of its state cars. Equations are the Laplacian rows of the state cars
    (x of other levels folded into the right-hand side as unknown
    parameters, hence zero) and the gap constraints x_i - x_{i+1} = g_x
    between consecutive cars from the right.

    """
    state = [c for c in cars if c in bundle_x.state_ids]
    n, s = len(cars), len(state)
    position = {car: i for i, car in enumerate(cars)}

    rows, rhs = [], []
    for z, car in enumerate(state):
        row = np.zeros(n + s)
        for other, column in position.items():
            row[column] = bundle_x.full[bundle_x.index[car], bundle_x.index[other]]
        row[n + z] = g_x
        rows.append(row)
        rhs.append(0.0)

    for i in range(n - 1):
        row = np.zeros(n + s)
        row[i], row[i + 1] = 1.0, -1.0
        rows.append(row)
        rhs.append(g_x)

    return np.array(rows).reshape(len(rows), n + s), np.array(rhs)


def verify_existence(bundle_x: LaplacianBundle, level, g_x, levels: LevelMap) -> ExistenceReport:
    """
    Check that the spacing system of `level` has at least one solution.

    The system is solvable for every right-hand side when its coefficient
    matrix has full row rank.

    """
    cars = tuple(c for c in bundle_x.ordering if levels.get(c) == level)
    matrix, _ = existence_system(bundle_x, cars, g_x)
    rank = echelon_rank(matrix)
    feasible = rank == matrix.shape[0]

    if not feasible:
        logging.warning(f"Level {level} spacing system has rank {rank} for {matrix.shape[0]} equations")
    return ExistenceReport(level, cars, feasible, rank, matrix.shape[0])


def lateral_levels(bundle_x: LaplacianBundle, levels: LevelMap) -> Iterable[int]:
    return sorted({levels[c] for c in bundle_x.ordering if c in levels})


def solve_x_equilibrium(bundle_x: LaplacianBundle, C: Mapping[int, float], g_x, inputs: Mapping[int, float]):
    """
    Lateral positions solving L x = -g_x C given the imposed input positions.

    Returns x for every node of `bundle_x.ordering`.

    """
    given = np.array([inputs[car] for car in bundle_x.input_ids], dtype=float)
    constants = np.array([C.get(car, 0.0) for car in bundle_x.state_ids])
    rhs = -g_x * constants + bundle_x.leader_cols @ given

    try:
        solution = solve(bundle_x.reduced, rhs) if len(rhs) else rhs
    except LinAlgError as e:
        raise SingularLevel(bundle_x.state_ids[0]) from e

    x = np.empty(len(bundle_x.ordering))
    x[bundle_x.state_rows] = solution
    x[bundle_x.input_rows] = given
    return x


def spacing_constants(
    snapshot: FormationSnapshot, graph_x: InfluenceGraph, bundle_x: LaplacianBundle, levels: LevelMap, template, g_x
) -> CVector:
    """
    Spacing constants of one mode.

    Cars are spaced by C = L x_f. A car influenced by an obstacle computes
    its own constant from local information instead: it wants to keep g_x
    from the obstacle on the side it currently is on.

    """
    slots = template.positions(bundle_x.ordering, snapshot, levels)
    C = compute_C_from_template(bundle_x, {car: slots.get(car, 0.0) for car in bundle_x.ordering})
    desired = template_positions(slots, g_x)

    overrides = {}
    for car in bundle_x.state_ids:
        edges = graph_x.in_edges(car)
        obstacles = [j for j in edges if snapshot.car(j).role == CarRole.OBSTACLE]
        if not obstacles:
            continue

        local = {j: desired[j] for j in edges if j not in obstacles}
        local[car] = desired[car]
        for obstacle in obstacles:
            side = 1.0 if snapshot.car(car).x >= snapshot.car(obstacle).x else -1.0
            local[obstacle] = desired[car] - side * g_x
        overrides[car] = compute_z_local(car, local, edges, g_x)

    return C.replaced(overrides) if overrides else C

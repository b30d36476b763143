"""
Value types describing a formation: cars, roles, gains and geometry.

"""
import enum
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from laneless.constants import defaults


class Axis(str, enum.Enum):
    X = "x"
    Y = "y"


class CarRole(str, enum.Enum):
    LEADER = "phantom-leader"
    BOUNDARY = "boundary"
    OBSTACLE = "obstacle"
    REGULAR = "regular"


LEADER_ID = 0
X_ROOT_ID = 1


@dataclass(frozen=True)
class Car:
    """
    Kinematic state of a single car along with its role.

    """

    id: int
    role: CarRole
    x: float
    y: float
    vx: float = 0.0
    vy: float = 0.0

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"Car ids are non-negative, got {self.id}")
        if (self.id == LEADER_ID) != (self.role == CarRole.LEADER):
            raise ValueError("Id 0 is reserved for the phantom leader")


@dataclass(frozen=True)
class FormationSnapshot:
    """
    The state of every car at one instant.

    Cars are kept sorted by id. Positions are in length units, velocities in
    length per time unit.

    """

    cars: Tuple[Car, ...]
    t: float = 0.0

    def __post_init__(self):
        ordered = tuple(sorted(self.cars, key=lambda c: c.id))
        ids = [c.id for c in ordered]
        if len(set(ids)) != len(ids):
            raise ValueError(f"Duplicate car ids in {ids}")
        leaders = [c for c in ordered if c.role == CarRole.LEADER]
        if len(leaders) > 1:
            raise ValueError("A formation has at most one phantom leader")
        object.__setattr__(self, "cars", ordered)

    @property
    def ids(self):
        return tuple(c.id for c in self.cars)

    def car(self, car_id) -> Car:
        for c in self.cars:
            if c.id == car_id:
                return c
        raise KeyError(car_id)

    def has(self, car_id):
        return any(c.id == car_id for c in self.cars)

    def with_role(self, *roles):
        return tuple(c for c in self.cars if c.role in roles)

    @property
    def vehicles(self):
        """
        Cars that take part in the geometry: regular and boundary cars.

        """
        return self.with_role(CarRole.REGULAR, CarRole.BOUNDARY)

    @property
    def obstacles(self):
        return self.with_role(CarRole.OBSTACLE)

    @property
    def leader(self) -> Optional[Car]:
        leaders = self.with_role(CarRole.LEADER)
        return leaders[0] if leaders else None

    def arrays(self, ids=None):
        """
        Return x, y, vx, vy arrays for the given ids (all cars by default).

        """
        cars = self.cars if ids is None else [self.car(i) for i in ids]
        return (
            np.array([c.x for c in cars], dtype=float),
            np.array([c.y for c in cars], dtype=float),
            np.array([c.vx for c in cars], dtype=float),
            np.array([c.vy for c in cars], dtype=float),
        )

    def with_arrays(self, x, y, vx, vy, t=None):
        """
        Build a new snapshot with the kinematic state replaced, ids unchanged.

        """
        cars = tuple(
            replace(c, x=float(x[i]), y=float(y[i]), vx=float(vx[i]), vy=float(vy[i])) for i, c in enumerate(self.cars)
        )
        return FormationSnapshot(cars, self.t if t is None else t)

    def translated(self, dx, dy):
        return FormationSnapshot(tuple(replace(c, x=c.x + dx, y=c.y + dy) for c in self.cars), self.t)

    def add(self, car: Car):
        return FormationSnapshot(self.cars + (car,), self.t)

    def remove(self, car_id):
        return FormationSnapshot(tuple(c for c in self.cars if c.id != car_id), self.t)


@dataclass(frozen=True)
class GainParams:
    """
    Control law gains and spacing constants.

    All gains are non-negative and W is strictly positive. Zero gains are
    accepted so that degenerate closed loops can still be analyzed.

    """

    b: float = defaults.B
    k: float = defaults.K
    b_x: float = defaults.B_X
    k_x: float = defaults.K_X
    g_y: float = defaults.G_Y
    g_x: float = defaults.G_X
    W: float = defaults.W

    def __post_init__(self):
        for name in ("b", "k", "b_x", "k_x", "g_y", "g_x"):
            if getattr(self, name) < 0:
                raise ValueError(f"Gain {name} must be non-negative, got {getattr(self, name)}")
        if self.W <= 0:
            raise ValueError(f"W must be positive, got {self.W}")

    def degenerate(self):
        """
        Names of the parameters that are zero, which only makes sense for analysis.

        """
        return [name for name in ("b", "k", "b_x", "k_x", "g_y", "g_x") if getattr(self, name) == 0]


@dataclass(frozen=True)
class GeometryParams:
    """
    Viewing geometry and influence-graph options.

    The Y viewing region is a cone of aperture aov_y around +Y, strictly
    ahead of the car. The X region is a cone of aperture aov_x, which for the
    default 180 degrees is the closed half-plane ahead.

    """

    aov_y: float = defaults.AOV_Y
    aov_x: float = defaults.AOV_X
    influence_depth: int = defaults.INFLUENCE_DEPTH
    max_per_level: Optional[int] = defaults.MAX_PER_LEVEL
    hysteresis: float = defaults.HYSTERESIS
    x_bidirectional: bool = True
    weighting: str = "uniform"

    def __post_init__(self):
        if not 0 < self.aov_y <= self.aov_x <= 180:
            raise ValueError(f"Viewing angles must satisfy 0 < aov_y <= aov_x <= 180, got {self.aov_y}, {self.aov_x}")
        if self.influence_depth < 1:
            raise ValueError(f"influence_depth must be at least 1, got {self.influence_depth}")
        if self.max_per_level is not None and self.max_per_level < 1:
            raise ValueError(f"max_per_level must be at least 1, got {self.max_per_level}")
        if self.hysteresis < 0:
            raise ValueError(f"hysteresis must be non-negative, got {self.hysteresis}")
        if self.weighting not in ("uniform", "unit"):
            raise ValueError(f"Unknown weighting {self.weighting!r}")


@dataclass(frozen=True)
class IntegrationSettings:
    """
    Fixed-step fourth-order Runge-Kutta settings.

    """

    dt: float = defaults.DT
    t_end: float = defaults.T_END
    method: str = field(default="rk4")

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_end < 0:
            raise ValueError(f"t_end must be non-negative, got {self.t_end}")
        if self.method != "rk4":
            raise ValueError(f"Only fixed-step rk4 is supported, got {self.method!r}")

    @property
    def steps(self):
        return int(round(self.t_end / self.dt))

    def step_of(self, t):
        """
        Quantize a time to the nearest step boundary.

        """
        return int(round(t / self.dt))


def reference_formation(
    v0=defaults.V0, g_y=defaults.G_Y, g_x=defaults.G_X, offsets: Dict[int, Tuple[float, float]] = None
):
    """
    Build the 16-car reference formation at its uniform-template equilibrium.

    Every level is `g_y` behind the one ahead, cars within a level are `g_x`
    apart and leftwards of the boundary car. `offsets` maps car ids to
    (dx, dy) displacements applied on top of the equilibrium.

    """
    offsets = offsets or {}
    cars = [Car(LEADER_ID, CarRole.LEADER, defaults.BOUNDARY_X, defaults.HEAD_Y + g_y, 0.0, v0)]

    car_id = 1
    for level in range(defaults.LEVELS):
        for slot in range(defaults.PER_LEVEL):
            dx, dy = offsets.get(car_id, (0.0, 0.0))
            role = CarRole.BOUNDARY if slot == 0 else CarRole.REGULAR
            x = defaults.BOUNDARY_X - slot * g_x + (dx if role == CarRole.REGULAR else 0.0)
            y = defaults.HEAD_Y - level * g_y + dy
            cars.append(Car(car_id, role, x, y, 0.0, v0))
            car_id += 1

    logging.debug(f"Built reference formation with {len(cars) - 1} cars")
    return FormationSnapshot(tuple(cars))


def chain_formation(count, gap=defaults.G_Y, v0=defaults.V0):
    """
    A single file of `count` regular cars behind the leader.

    """
    cars = [Car(LEADER_ID, CarRole.LEADER, 0.0, 0.0, 0.0, v0)]
    cars.extend(Car(i, CarRole.REGULAR, 0.0, -i * gap, 0.0, v0) for i in range(1, count + 1))
    return FormationSnapshot(tuple(cars))


def car_ids(cars: Iterable[Car]):
    return [c.id for c in cars]

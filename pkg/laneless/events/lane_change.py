"""
Lane changes.

While it changes lane a car is an external input to the lateral dynamics:
its position follows a cubic ease from where it started to its target, and
the rest of the formation reacts to it through their X edges. Its
longitudinal motion is unaffected.

"""
import logging
from dataclasses import dataclass

from laneless.events.main import EventHandler, InvalidEventError
from laneless.formation import X_ROOT_ID, CarRole


@dataclass(frozen=True)
class LaneChangeProfile:
    car: int
    t0: float
    t1: float
    x_start: float
    x_target: float

    def __post_init__(self):
        if not self.t0 < self.t1:
            raise ValueError(f"Lane change of car {self.car} must end after it starts ({self.t0:g}, {self.t1:g})")

    def __call__(self, t):
        return lane_change_input(self.car, t, self)


def lane_change_input(car, t, profile: LaneChangeProfile):
    """
    Imposed lateral position and velocity of `car` at time `t`.

    The ease 3u^2 - 2u^3 has zero velocity at both ends. Times outside
    [t0, t1] are clamped to the nearest end.

    """
    duration = profile.t1 - profile.t0
    u = min(max((t - profile.t0) / duration, 0.0), 1.0)
    span = profile.x_target - profile.x_start
    return profile.x_start + span * (3 * u**2 - 2 * u**3), span * 6 * u * (1 - u) / duration


class LaneChange(EventHandler):
    @staticmethod
    def get_kinds():
        return "lane-change"

    def validate(self, event):
        if "car" not in event.params or "x_target" not in event.params:
            raise InvalidEventError("lane-change needs a car and a target position")
        if event.until is None or not event.at < event.until:
            raise InvalidEventError(f"lane-change must end after it starts, got [{event.at:g}, {event.until}]")

    def apply(self, event, state):
        car_id = event.params["car"]
        if not state.snapshot.has(car_id):
            raise InvalidEventError(f"No car {car_id}")

        car = state.snapshot.car(car_id)
        if car.role != CarRole.REGULAR or car_id == X_ROOT_ID:
            raise InvalidEventError(f"Car {car_id} is a {car.role.value} car and cannot change lane")
        if car_id in state.lane_changes:
            raise InvalidEventError(f"Car {car_id} is already changing lane")
        if event.until <= state.snapshot.t:
            raise InvalidEventError(f"Lane change of car {car_id} ends before t={state.snapshot.t:g}")

        profile = LaneChangeProfile(car_id, state.snapshot.t, event.until, car.x, event.params["x_target"])
        state.lane_changes[car_id] = profile
        state.stale = True
        logging.debug(f"Car {car_id} changes lane {profile.x_start:g} -> {profile.x_target:g} until t={profile.t1:g}")
        return {"car": car_id, "x_start": profile.x_start, "x_target": profile.x_target, "until": profile.t1}

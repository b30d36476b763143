"""
Event handlers, applied directly to a run state.

"""
import logging

import pytest

from laneless import engine
from laneless.constants import defaults
from laneless.events.lane_change import LaneChangeProfile, lane_change_input
from laneless.events.main import Event, EventHandler, InvalidEventError, load_handlers
from laneless.formation import CarRole, reference_formation
from laneless.scenario import Scenario

KINDS = {
    "formation-change",
    "gy-change",
    "gx-change",
    "obstacle-appear",
    "obstacle-remove",
    "lane-change",
    "leader-speed",
}


def running_state():
    state = engine.RunState(Scenario(reference_formation()))
    engine.refresh(state, engine.Trace(), 0.0)
    return state


def test_load_handlers():
    handlers = load_handlers()

    assert set(handlers) == KINDS
    assert handlers["gy-change"] is handlers["gx-change"]
    assert handlers["obstacle-remove"].get_priority() == EventHandler.HIGHEST_PRIORITY
    assert handlers["leader-speed"].get_priority() == EventHandler.LOWEST_PRIORITY
    assert handlers["lane-change"].get_priority() == EventHandler.DEFAULT_PRIORITY


def test_lane_change_refusals():
    handler = load_handlers()["lane-change"]
    state = running_state()

    for car in (1, 5, 99):
        with pytest.raises(InvalidEventError):
            handler.apply(Event("lane-change", 0.0, {"car": car, "x_target": 50.0}, until=10.0), state)

    event = Event("lane-change", 0.0, {"car": 8, "x_target": 75.0}, until=10.0)
    details = handler.apply(event, state)
    assert details == {"car": 8, "x_start": 0.0, "x_target": 75.0, "until": 10.0}
    assert state.stale

    with pytest.raises(InvalidEventError):
        handler.apply(event, state)
    with pytest.raises(InvalidEventError):
        handler.validate(Event("lane-change", 5.0, {"car": 8, "x_target": 75.0}, until=5.0))


def test_lane_change_profile():
    profile = LaneChangeProfile(8, 100.0, 200.0, 0.0, 75.0)

    assert lane_change_input(8, 100.0, profile) == (0.0, 0.0)
    assert lane_change_input(8, 200.0, profile) == (75.0, 0.0)
    assert lane_change_input(8, 150.0, profile) == pytest.approx((37.5, 1.125))
    assert profile(250.0) == (75.0, 0.0)

    with pytest.raises(ValueError):
        LaneChangeProfile(8, 100.0, 100.0, 0.0, 75.0)


def test_obstacle_ids():
    handlers = load_handlers()
    state = running_state()

    first = handlers["obstacle-appear"].apply(Event("obstacle-appear", 0.0, {"x": 35.0, "y": 800.0}), state)
    second = handlers["obstacle-appear"].apply(Event("obstacle-appear", 0.0, {"x": 35.0, "y": 900.0}), state)
    assert (first["id"], second["id"]) == (defaults.OBSTACLE_BASE_ID, defaults.OBSTACLE_BASE_ID + 1)
    assert state.snapshot.car(101).role == CarRole.OBSTACLE

    with pytest.raises(InvalidEventError):
        handlers["obstacle-appear"].apply(Event("obstacle-appear", 0.0, {"x": 0.0, "y": 0.0, "id": 100}), state)

    handlers["obstacle-remove"].apply(Event("obstacle-remove", 0.0, {"id": 100}), state)
    assert not state.snapshot.has(100)
    with pytest.raises(InvalidEventError):
        handlers["obstacle-remove"].apply(Event("obstacle-remove", 0.0, {"id": 5}), state)


def test_gap_change():
    handler = load_handlers()["gy-change"]
    state = running_state()

    details = handler.apply(Event("gy-change", 0.0, {"delta": 10.0}), state)
    assert details["g_y"] == 60.0
    assert details["admissible"] is False
    assert state.gains.g_y == 60.0

    with pytest.raises(InvalidEventError):
        handler.apply(Event("gx-change", 0.0, {"delta": -100.0}), state)


def test_formation_change_admissibility():
    handler = load_handlers()["formation-change"]

    state = running_state()
    assert handler.apply(Event("formation-change", 0.0, {"template": None}), state)["admissible"] is True

    state = running_state()
    narrow = [float(s) for s in defaults.NARROW_SECOND_TEMPLATE]
    assert handler.apply(Event("formation-change", 0.0, {"template": narrow}), state)["admissible"] is False

    state = running_state()
    with pytest.raises(InvalidEventError):
        handler.apply(Event("formation-change", 0.0, {"template": [0.0, 1.0]}), state)


def test_leader_speed():
    handler = load_handlers()["leader-speed"]
    state = running_state()

    assert handler.apply(Event("leader-speed", 0.0, {"v0": 12.0}), state) == {"v0": 12.0}
    assert state.leader_v0 == 12.0
    assert state.snapshot.leader.vy == 12.0


def test_mirrored_gap_changes(caplog):
    handler = load_handlers()["gy-change"]

    # Levels 45 apart against a 50 spacing, so shrinking the spacing is the admissible direction.
    state = engine.RunState(Scenario(reference_formation(g_y=45.0)))
    engine.refresh(state, engine.Trace(), 0.0)
    assert handler.apply(Event("gy-change", 0.0, {"delta": -5.0}), state)["admissible"] is True
    assert "increases the deviation norm" not in caplog.text

    state = engine.RunState(Scenario(reference_formation(g_y=45.0)))
    engine.refresh(state, engine.Trace(), 0.0)
    with caplog.at_level(logging.WARNING):
        assert handler.apply(Event("gy-change", 0.0, {"delta": 5.0}), state)["admissible"] is False
    assert "gy-change at t=0 increases the deviation norm" in caplog.text

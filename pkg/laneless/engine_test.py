"""
End to end runs of the bundled scenarios.

The slowest closed-loop pole sits near -k/b, so the convergence runs cover
thousands of time units and use a coarse step.

"""
from dataclasses import replace

import numpy as np
import pytest

from laneless import engine, storage
from laneless.events.main import Event, load_handlers
from laneless.formation import Car, CarRole, FormationSnapshot, IntegrationSettings, chain_formation
from laneless.scenario import Scenario, example_scenario


def coarse(scenario, t_end, dt=1.0):
    return replace(scenario, settings=IntegrationSettings(dt=dt, t_end=t_end))


@pytest.mark.slow
def test_steady_converges():
    scenario = coarse(example_scenario("steady"), 10000.0)
    trace = engine.run(scenario, every=100)
    summary = engine.summarize(trace, scenario)

    assert summary["max_velocity_deviation"] < 1e-3
    assert summary["convergence_time"] is not None
    assert summary["level_gaps"] == pytest.approx([50.0] * 4, abs=1e-4)
    for level in range(1, 5):
        assert summary["lateral_gaps"][str(level)] == pytest.approx([30.0] * 3, abs=1e-4)


@pytest.mark.slow
def test_formation_change():
    scenario = coarse(example_scenario("formation-change"), 5000.0)
    trace = engine.run(scenario, every=50)

    switched = trace.times.index(2000.0)
    gaps = engine.lateral_gaps(trace.samples[switched], trace.levels[switched])
    for level, expected in ((1, 30.0), (2, 30.0), (3, 15.0), (4, 30.0)):
        assert gaps[level] == pytest.approx([expected] * 3, abs=0.5)

    gaps = engine.lateral_gaps(trace.final, trace.levels[-1])
    for level, expected in ((1, 30.0), (2, 15.0), (3, 30.0), (4, 15.0)):
        assert gaps[level] == pytest.approx([expected] * 3, abs=0.5)

    kinds = [entry["kind"] for entry in trace.event_log]
    assert kinds.count("formation-change") == 1


@pytest.mark.slow
def test_obstacle_slows_first_level():
    scenario = coarse(example_scenario("obstacle"), 8000.0)
    trace = engine.run(scenario, every=10)

    early = [s for s in trace.samples if 50.0 <= s.t <= 400.0]
    assert min(min(s.car(c).vy for c in range(1, 5)) for s in early) < scenario.leader_v0 - 2.0
    # Car 3 sits right of the obstacle and is pushed further right while level one closes in.
    assert max(s.car(3).x for s in early) > 31.5
    assert trace.final.car(3).x == pytest.approx(30.0, abs=1e-2)

    applied = [e["kind"] for e in trace.event_log if "refused" not in e]
    assert "obstacle-appear" in applied
    assert "obstacle-remove" in applied
    assert not trace.final.obstacles
    assert engine.summarize(trace, scenario)["max_velocity_deviation"] < 1e-3


@pytest.mark.slow
def test_lane_change():
    scenario = coarse(example_scenario("lane-change"), 8000.0)
    trace = engine.run(scenario, every=100)
    final = trace.final

    assert [final.car(c).x for c in (5, 8, 6, 7)] == pytest.approx([90.0, 60.0, 30.0, 0.0], abs=1e-3)
    summary = engine.summarize(trace, scenario)
    assert summary["level_gaps"] == pytest.approx([50.0] * 4, abs=1e-3)

    kinds = [entry["kind"] for entry in trace.event_log]
    assert "lane-change" in kinds
    assert "lane-change-end" in kinds


@pytest.mark.slow
def test_leader_speed_change():
    events = (Event("leader-speed", 10.0, {"v0": 12.0}),)
    scenario = Scenario(chain_formation(2), events=events, settings=IntegrationSettings(dt=1.0, t_end=6000.0))
    trace = engine.run(scenario, every=100)

    assert [c.vy for c in trace.final.vehicles] == pytest.approx([12.0, 12.0], abs=1e-3)
    assert engine.summarize(trace, scenario)["max_velocity_deviation"] < 1e-3


def test_runs_are_deterministic(tmp_path):
    scenario = coarse(example_scenario("steady"), 200.0)
    for name in ("first.csv", "second.csv"):
        storage.write_trace(engine.run(scenario, every=10), tmp_path / name)

    assert (tmp_path / "first.csv").read_bytes() == (tmp_path / "second.csv").read_bytes()


def test_leader_only():
    leader = Car(0, CarRole.LEADER, 0.0, 0.0, 0.0, 10.0)
    scenario = Scenario(FormationSnapshot((leader,)), settings=IntegrationSettings(dt=0.5, t_end=5.0))
    trace = engine.run(scenario)

    assert len(trace.samples) == 11
    assert trace.final.leader.y == pytest.approx(50.0)
    assert engine.summarize(trace, scenario)["level_gaps"] == []


def test_sampling():
    scenario = Scenario(chain_formation(2), settings=IntegrationSettings(dt=0.1, t_end=1.0))
    trace = engine.run(scenario, every=3)

    assert trace.times == pytest.approx([0.0, 0.3, 0.6, 0.9, 1.0])
    with pytest.raises(ValueError):
        engine.run(scenario, every=0)


def test_schedule_by_priority():
    events = (
        Event("leader-speed", 1.0, {"v0": 5.0}),
        Event("obstacle-appear", 1.0, {"x": 0.0, "y": 100.0}),
        Event("obstacle-remove", 1.02, {"id": 100}),
        Event("gy-change", 3.0, {"delta": 1.0}),
    )
    due = engine.schedule(events, IntegrationSettings(dt=0.1, t_end=5.0), load_handlers())

    assert sorted(due) == [10, 30]
    assert [e.kind for e in due[10]] == ["obstacle-remove", "obstacle-appear", "leader-speed"]


def test_refused_event_is_logged():
    events = (Event("obstacle-remove", 0.5, {"id": 100}),)
    scenario = Scenario(chain_formation(2), events=events, settings=IntegrationSettings(dt=0.1, t_end=1.0))
    trace = engine.run(scenario)

    assert trace.event_log[0]["kind"] == "obstacle-remove"
    assert "refused" in trace.event_log[0]


def test_gap_change_moves_equilibrium():
    events = (Event("gy-change", 0.0, {"delta": 10.0}),)
    scenario = Scenario(chain_formation(2), events=events, settings=IntegrationSettings(dt=0.1, t_end=0.1))
    trace = engine.run(scenario)

    entry = trace.event_log[0]
    assert entry["g_y"] == 60.0
    assert entry["admissible"] is None
    assert np.isfinite(trace.final.car(2).y)


def test_replay_between_switches():
    snapshot = chain_formation(3)
    x, y, vx, vy = snapshot.arrays()
    y[1] += 3.0
    y[3] -= 2.0
    vy[2] += 0.5
    scenario = Scenario(snapshot.with_arrays(x, y, vx, vy), settings=IntegrationSettings(dt=0.5, t_end=60.0))
    trace = engine.run(scenario, every=20)
    assert trace.switch_log == []

    middle = trace.samples[trace.times.index(30.0)]
    replay = engine.run(Scenario(replace(middle, t=0.0), settings=IntegrationSettings(dt=0.5, t_end=30.0)))

    for replayed, recorded in zip(replay.final.arrays(), trace.final.arrays()):
        assert np.allclose(replayed, recorded, rtol=0.0, atol=1e-9)

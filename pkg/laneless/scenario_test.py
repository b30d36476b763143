"""
Scenario files and the bundled examples.

"""
import json

import pytest

from laneless.errors import ScenarioError
from laneless.events.main import Event
from laneless.formation import CarRole
from laneless.scenario import (
    EXAMPLES,
    dump_scenario,
    example_scenario,
    load_scenario,
    parse_scenario,
    write_scenario,
)

BAD_KEY = """{
  "name": "bad",
  "reference": {},
  "gains": {
    "b": 0.4,
    "kk": 1.0
  }
}
"""

MISSING_COMMA = """{
  "name": "bad"
  "reference": {}
}
"""

UNKNOWN_EVENT = """{
  "name": "bad",
  "reference": {},
  "events": [
    {"kind": "gy-change", "at_time": 1.0, "delta_length": 5.0},
    {"kind": "teleport", "at_time": 2.0}
  ]
}
"""

LATE_EVENT = """{
  "name": "late",
  "reference": {},
  "integration": {"dt_time": 0.5, "t_end_time": 10.0},
  "events": [
    {"kind": "gy-change", "at_time": 20.0, "delta_length": 5.0}
  ]
}
"""


@pytest.mark.parametrize("name", EXAMPLES)
def test_examples_round_trip(name, tmp_path):
    scenario = example_scenario(name)
    path = tmp_path / f"{name}.json"
    write_scenario(scenario, path)

    assert load_scenario(path) == scenario


def test_unknown_example():
    with pytest.raises(ScenarioError):
        example_scenario("parade")


def test_unknown_key_line():
    with pytest.raises(ScenarioError) as e:
        parse_scenario(BAD_KEY, "bad.json")
    assert e.value.line == 6
    assert str(e.value).startswith("bad.json:6: ")


def test_syntax_error_line():
    with pytest.raises(ScenarioError) as e:
        parse_scenario(MISSING_COMMA)
    assert e.value.line == 3


def test_unknown_event_line():
    with pytest.raises(ScenarioError) as e:
        parse_scenario(UNKNOWN_EVENT)
    assert e.value.line == 6
    assert "teleport" in str(e.value)


def test_event_after_end():
    with pytest.raises(ScenarioError) as e:
        parse_scenario(LATE_EVENT)
    assert e.value.line == 6


def test_reference_seed():
    text = json.dumps({"name": "jitter", "reference": {"jitter_length": 3.0}, "seed": 7})

    first, second = parse_scenario(text), parse_scenario(text)
    assert first.initial == second.initial
    assert first.seed == 7
    assert parse_scenario(text, seed=8).initial != first.initial

    # Boundary cars stay on the road edge.
    for car in first.initial.with_role(CarRole.BOUNDARY):
        assert car.x == 90.0


def test_cars_or_reference():
    with pytest.raises(ScenarioError):
        parse_scenario(json.dumps({"name": "neither"}))

    data = dump_scenario(example_scenario("steady"))
    data["reference"] = {}
    with pytest.raises(ScenarioError):
        parse_scenario(json.dumps(data))


def test_missing_leader():
    data = dump_scenario(example_scenario("steady"))
    data["cars"] = [car for car in data["cars"] if car["id"] != 0]
    with pytest.raises(ScenarioError) as e:
        parse_scenario(json.dumps(data))
    assert "leader" in str(e.value)


def test_short_template():
    data = dump_scenario(example_scenario("steady"))
    data["template"] = [0, 1, 2]
    with pytest.raises(ScenarioError):
        parse_scenario(json.dumps(data))


def test_lane_change_validated():
    data = dump_scenario(example_scenario("lane-change"))
    data["events"][0]["until_time"] = 50.0
    with pytest.raises(ScenarioError):
        parse_scenario(json.dumps(data))


def test_events_keep_their_line(tmp_path):
    path = tmp_path / "events.json"
    write_scenario(example_scenario("obstacle"), path)
    scenario = load_scenario(path)

    lines = path.read_text().splitlines()
    for event in scenario.events:
        assert '"kind"' in lines[event.line - 1]
    assert scenario.events[0] == Event("obstacle-appear", 50.0, {"x": 25.0, "y": 1700.0, "id": 100})


def test_unreadable_file(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "missing.json")

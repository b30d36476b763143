"""
The sim commands, driven through `run.main` where the parsing matters.

"""
import csv
import json
from dataclasses import replace

import pytest

import run
from laneless import commands, engine, storage
from laneless.constants import paths
from laneless.formation import chain_formation
from laneless.scenario import dump_scenario, example_scenario, write_scenario


def short_config(scenario_path, output_dir, **kwargs):
    return commands.RunConfig(scenario_path, output_dir, dt=1.0, t_end=20.0, every=5, **kwargs)


def read_csv(path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


@pytest.fixture
def steady(tmp_path):
    path = tmp_path / "steady.json"
    write_scenario(example_scenario("steady"), path)
    return path


def test_run_writes_outputs(steady, tmp_path):
    out = tmp_path / "out"
    assert commands.cmd_run(short_config(steady, out)) == commands.EXIT_OK

    rows = read_csv(out / paths.TRACE)
    assert rows[0] == storage.TRACE_HEADER
    assert len(rows) == 1 + 5 * 17

    summary = storage.read_json(out / paths.SUMMARY)
    assert summary["scenario"] == "steady"
    assert summary["t_end"] == 20.0
    assert set(storage.read_json(out / paths.EVENTS)) == {"events", "switches"}


def test_malformed_scenario(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "name": "broken",\n')
    out = tmp_path / "out"

    assert commands.cmd_run(short_config(path, out)) == commands.EXIT_INVALID
    assert not out.exists()


def test_bad_override(steady, tmp_path):
    config = commands.RunConfig(steady, tmp_path / "out", dt=1.0, t_end=-5.0)
    assert commands.cmd_run(config) == commands.EXIT_INVALID
    with pytest.raises(ValueError):
        commands.RunConfig(steady, every=0)


def test_run_directory(tmp_path):
    scenarios = tmp_path / "scenarios"
    for name in ("first", "second"):
        write_scenario(example_scenario("steady"), scenarios / f"{name}.json")
    (scenarios / "notes.txt").write_text("not a scenario")

    out = tmp_path / "out"
    assert commands.cmd_run(short_config(scenarios, out), workers=2) == commands.EXIT_OK
    assert (out / "first" / paths.TRACE).read_bytes() == (out / "second" / paths.TRACE).read_bytes()

    # Events past the overridden end time fail validation.
    write_scenario(example_scenario("lane-change"), scenarios / "third.json")
    assert commands.cmd_run(short_config(scenarios, tmp_path / "again"), workers=2) == commands.EXIT_INVALID
    assert not (tmp_path / "again" / "third").exists()


def test_plotdata(steady, tmp_path):
    out = tmp_path / "out"
    commands.cmd_run(short_config(steady, out))
    trace = out / paths.TRACE

    assert commands.cmd_plotdata(trace, "xy-snapshot") == commands.EXIT_OK
    rows = read_csv(out / "xy-snapshot.csv")
    assert rows[0] == ["car", "role", "x", "y"]
    assert len(rows) == 1 + 16

    assert commands.cmd_plotdata(trace, "y-velocity", output_dir=tmp_path / "plots") == commands.EXIT_OK
    rows = read_csv(tmp_path / "plots" / "y-velocity.csv")
    assert rows[0] == ["t", "car", "vy"]
    assert len(rows) == 1 + 5 * 16


def test_decimated_snapshot(steady, tmp_path):
    for every in (1, 5):
        config = commands.RunConfig(steady, tmp_path / str(every), dt=1.0, t_end=20.0, every=every)
        assert commands.cmd_run(config) == commands.EXIT_OK
        assert commands.cmd_plotdata(tmp_path / str(every) / paths.TRACE, "xy-snapshot", t=10.0) == commands.EXIT_OK

    assert read_csv(tmp_path / "1" / "xy-snapshot.csv") == read_csv(tmp_path / "5" / "xy-snapshot.csv")


def test_plotdata_errors(tmp_path):
    assert commands.cmd_plotdata(tmp_path / "trace.csv", "histogram") == commands.EXIT_INVALID
    assert commands.cmd_plotdata(tmp_path / "trace.csv", "y-velocity") == commands.EXIT_INVALID


def test_plotdata_empty_trace(tmp_path):
    trace = tmp_path / paths.TRACE
    storage.write_trace(engine.Trace(), trace)

    for kind in commands.PLOT_KINDS:
        assert commands.cmd_plotdata(trace, kind) == commands.EXIT_OK
        assert len(read_csv(tmp_path / f"{kind}.csv")) == 1


def test_snapshot_time():
    first = chain_formation(2)
    later = replace(first.translated(0.0, 100.0), t=10.0)

    header, rows = commands.plot_rows([first, later], "xy-snapshot", t=3.0)
    assert header == ["car", "role", "x", "y"]
    assert [row[3] for row in rows] == [repr(-50.0), repr(-100.0)]

    _, rows = commands.plot_rows([first, later], "xy-snapshot")
    assert [row[3] for row in rows] == [repr(50.0), repr(0.0)]


def test_analyze_obstacle(tmp_path):
    path = tmp_path / "obstacle.json"
    write_scenario(example_scenario("obstacle"), path)

    assert commands.cmd_analyze(path, tmp_path) == commands.EXIT_OK
    report = storage.read_json(tmp_path / paths.STABILITY)
    assert len(report["modes"]) == 2
    assert report["hurwitz"]
    assert report["modes"][0]["corollary_violations"] == []
    assert all(entry["feasible"] for entry in report["modes"][0]["existence"])


def test_analyze_undamped(tmp_path):
    data = dump_scenario(example_scenario("steady"))
    data["gains"]["b"] = 0.0
    path = tmp_path / "undamped.json"
    path.write_text(json.dumps(data))

    assert commands.cmd_analyze(path, tmp_path) == commands.EXIT_OK
    report = storage.read_json(tmp_path / paths.STABILITY)
    assert not report["hurwitz"]
    assert report["lyapunov"]["y"] == "inapplicable"


def test_main(tmp_path):
    assert run.main(["example", "all", "--out", str(tmp_path)]) == commands.EXIT_OK
    assert (tmp_path / "obstacle.json").exists()

    out = tmp_path / "out"
    argv = ["run", str(tmp_path / "steady.json"), "--dt", "1", "--t-end", "10", "--out", str(out)]
    assert run.main(argv) == commands.EXIT_OK
    assert run.main(["plotdata", str(out / paths.TRACE), "--kind", "nope"]) == commands.EXIT_INVALID

    with pytest.raises(SystemExit):
        run.main(["run", str(tmp_path / "steady.json"), "--every", "0"])
    with pytest.raises(SystemExit):
        run.main(["example", "parade"])

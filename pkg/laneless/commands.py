"""
The commands behind the `sim` entry point.

Every command returns its exit code:

    0   success
    1   the scenario (or trace) could not be read or validated
    2   a switch left the Y graph without a spanning tree
    3   the integration produced a non-finite state

Output files are only written once a command has succeeded.

"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

from laneless import __version__, engine, storage
from laneless.constants import paths
from laneless.equilibrium import lateral_levels, verify_existence
from laneless.errors import NonFiniteState, ScenarioError, SpanningTreeLost
from laneless.events.main import InvalidEventError, load_handlers
from laneless.formation import CarRole
from laneless.graph import canonical_numbering, laplacian
from laneless.scenario import EXAMPLES, example_scenario, load_scenario, validate, write_scenario
from laneless.stability import analyze, lyapunov_certificate
from laneless.utils.core import print_progress

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_SPANNING_TREE = 2
EXIT_NON_FINITE = 3

PLOT_KINDS = ["xy-snapshot", "y-velocity", "x-trajectory"]


@dataclass(frozen=True)
class RunConfig:
    scenario_path: Path
    output_dir: Path = paths.OUTPUT
    dt: Optional[float] = None
    t_end: Optional[float] = None
    every: int = 1
    seed: Optional[int] = None

    def __post_init__(self):
        if self.every < 1:
            raise ValueError(f"Sampling interval must be at least 1, got {self.every}")


def prepare(config: RunConfig):
    """
    Load a scenario and apply the command line overrides.

    """
    scenario = load_scenario(config.scenario_path, config.seed)
    if config.dt is None and config.t_end is None:
        return scenario

    try:
        settings = replace(
            scenario.settings,
            dt=scenario.settings.dt if config.dt is None else config.dt,
            t_end=scenario.settings.t_end if config.t_end is None else config.t_end,
        )
    except ValueError as e:
        raise ScenarioError(str(e), path=config.scenario_path) from e

    scenario = replace(scenario, settings=settings)
    validate(scenario, config.scenario_path)
    return scenario


def run_one(config: RunConfig):
    """
    Run a single scenario file and write its outputs.

    """
    try:
        scenario = prepare(config)
    except ScenarioError as e:
        logging.error(str(e))
        return EXIT_INVALID

    try:
        trace = engine.run(scenario, config.every)
    except SpanningTreeLost as e:
        logging.error(f"{config.scenario_path}: {e}")
        return EXIT_SPANNING_TREE
    except NonFiniteState as e:
        logging.error(f"{config.scenario_path}: {e}")
        return EXIT_NON_FINITE

    summary = engine.summarize(trace, scenario)
    summary.update({"scenario": scenario.name, "version": __version__})

    output = Path(config.output_dir)
    storage.write_trace(trace, output / paths.TRACE)
    storage.write_json(output / paths.EVENTS, {"events": trace.event_log, "switches": trace.switch_log})
    storage.write_json(output / paths.SUMMARY, summary)
    logging.info(f"Wrote {output / paths.TRACE} ({len(trace.samples)} samples)")
    return EXIT_OK


def cmd_run(config: RunConfig, workers=None):
    """
    Run a scenario, or every scenario of a directory in parallel.

    Scenarios of a directory write into `<output_dir>/<file stem>/`. The
    exit code is the worst of the individual runs.

    """
    path = Path(config.scenario_path)
    if not path.is_dir():
        return run_one(config)

    files = sorted(path.glob("*.json"))
    if not files:
        logging.error(f"No scenario files in {path}")
        return EXIT_INVALID

    configs = [replace(config, scenario_path=f, output_dir=Path(config.output_dir) / f.stem) for f in files]
    logging.info(f"Running {len(configs)} scenarios from {path}")

    codes = []
    with ProcessPoolExecutor(max_workers=workers) as executor:
        for i, code in enumerate(executor.map(run_one, configs)):
            codes.append(code)
            print_progress(f"Scenarios in {path.name}", i, len(configs))

    failed = [c.scenario_path.name for c, code in zip(configs, codes) if code != EXIT_OK]
    if failed:
        logging.warning(f"{len(failed)} of {len(configs)} scenarios failed: {', '.join(failed)}")
    return max(codes)


def reachable_modes(scenario):
    """
    The distinct graph pairs a scenario passes through.

    Events are applied in their scheduled order to the initial geometry,
    without integrating, and a mode is kept whenever the edge sets differ
    from every mode found so far.

    """
    handlers = load_handlers()
    due = engine.schedule(scenario.events, scenario.settings, handlers)
    state = engine.RunState(scenario)
    scratch = engine.Trace()

    modes, seen = [], set()

    def collect(t):
        try:
            engine.refresh(state, scratch, t)
        except SpanningTreeLost as e:
            logging.warning(f"Mode at t={t:g} skipped: {e}")
            state.stale = True
            return
        key = state.graphs.edge_sets()
        if key not in seen:
            seen.add(key)
            modes.append({"t": t, "graphs": state.graphs, "gains": state.gains, "snapshot": state.snapshot})

    collect(0.0)
    for n in sorted(due):
        t = n * scenario.settings.dt
        state.snapshot = replace(state.snapshot, t=t)
        for car, profile in list(state.lane_changes.items()):
            if scenario.settings.step_of(profile.t1) <= n:
                del state.lane_changes[car]
                state.stale = True
        for event in due[n]:
            try:
                handlers[event.kind].apply(event, state)
            except InvalidEventError as e:
                logging.warning(f"Skipping {event.kind} at t={t:g}: {e}")
        collect(t)

    if state.lane_changes:
        state.lane_changes.clear()
        state.stale = True
        collect(state.snapshot.t)
    return modes


def mode_report(mode):
    """
    Spectrum, certificate and lateral existence checks of one mode.

    """
    graphs, gains, snapshot = mode["graphs"], mode["gains"], mode["snapshot"]
    ordering = canonical_numbering(snapshot, graphs.levels)
    bundle_y = laplacian(graphs.y, ordering)

    report = {
        "t": mode["t"],
        "corollary_violations": [[v.car, v.obstacle] for v in graphs.violations],
        "y": analyze(bundle_y, gains).as_dict(),
        "x": None,
        "existence": [],
    }

    bundle_x = None
    if graphs.x is not None:
        bundle_x = laplacian(graphs.x, ordering)
        report["x"] = analyze(bundle_x, gains).as_dict()
        vehicles = {c.id for c in snapshot.vehicles}
        for level in lateral_levels(bundle_x, graphs.levels):
            if not any(graphs.levels.get(c) == level for c in bundle_x.state_ids if c in vehicles):
                continue
            existence = verify_existence(bundle_x, level, gains.g_x, graphs.levels)
            report["existence"].append(
                {
                    "level": level,
                    "feasible": existence.feasible,
                    "rank": existence.rank,
                    "equations": existence.equations,
                }
            )
    return report, bundle_y, bundle_x


def cmd_analyze(scenario_path, output_dir=paths.OUTPUT):
    """
    Write stability.json for every mode reachable from the event list.

    """
    try:
        scenario = load_scenario(scenario_path)
    except ScenarioError as e:
        logging.error(str(e))
        return EXIT_INVALID

    modes = reachable_modes(scenario)
    reports, bundles_y, bundles_x = [], [], []
    for mode in modes:
        report, bundle_y, bundle_x = mode_report(mode)
        reports.append(report)
        bundles_y.append(bundle_y)
        if bundle_x is not None:
            bundles_x.append(bundle_x)

    common_y = lyapunov_certificate(bundles_y, scenario.gains) if bundles_y else None
    common_x = lyapunov_certificate(bundles_x, scenario.gains) if bundles_x else None

    first = reports[0] if reports else None
    result = {
        "scenario": scenario.name,
        "version": __version__,
        "hurwitz": all(r["y"]["hurwitz"] and (r["x"] is None or r["x"]["hurwitz"]) for r in reports),
        "eigenvalues": first["y"]["eigenvalues"] if first else [],
        "lyapunov": {
            "y": common_y.as_dict() if common_y is not None else "inapplicable",
            "x": common_x.as_dict() if common_x is not None else "inapplicable",
        },
        "modes": reports,
    }

    storage.write_json(Path(output_dir) / paths.STABILITY, result)
    logging.info(f"Analyzed {len(reports)} modes, Hurwitz: {result['hurwitz']}")
    return EXIT_OK


def _nearest(samples, t):
    return min(samples, key=lambda s: (abs(s.t - t), s.t))


def plot_rows(samples, kind, t=None):
    """
    Header and rows of one plot-ready table.

    xy-snapshot holds the position of every car at the sample closest to
    `t` (the last sample by default). y-velocity and x-trajectory hold one
    row per car per sample.

    """
    if kind == "xy-snapshot":
        header = ["car", "role", "x", "y"]
        if not samples:
            return header, []
        snapshot = samples[-1] if t is None else _nearest(samples, t)
        rows = [[c.id, c.role.value, repr(c.x), repr(c.y)] for c in snapshot.cars if c.role != CarRole.LEADER]
        return header, rows

    field = "vy" if kind == "y-velocity" else "x"
    rows = []
    for snapshot in samples:
        for car in snapshot.vehicles:
            rows.append([repr(snapshot.t), car.id, repr(getattr(car, field))])
    return ["t", "car", field], rows


def cmd_plotdata(trace_path, kind, t=None, output_dir=None):
    """
    Extract plot-ready columns from a trace.

    """
    if kind not in PLOT_KINDS:
        logging.error(f"Unknown plot kind {kind!r}, choose from {', '.join(PLOT_KINDS)}")
        return EXIT_INVALID

    trace_path = Path(trace_path)
    try:
        samples, _ = storage.read_trace(trace_path)
    except (OSError, ValueError) as e:
        logging.error(f"Cannot read trace {trace_path}: {e}")
        return EXIT_INVALID

    header, rows = plot_rows(samples, kind, t)
    output = Path(output_dir) if output_dir is not None else trace_path.parent
    storage.write_rows(output / f"{kind}.csv", header, rows)
    logging.info(f"Wrote {len(rows)} {kind} rows to {output / f'{kind}.csv'}")
    return EXIT_OK


def cmd_example(name, output_dir=paths.OUTPUT):
    """
    Write one bundled scenario, or all of them, as scenario files.

    """
    names = EXAMPLES if name == "all" else [name]
    try:
        for example in names:
            write_scenario(example_scenario(example), Path(output_dir) / f"{example}.json")
    except ScenarioError as e:
        logging.error(str(e))
        return EXIT_INVALID
    return EXIT_OK

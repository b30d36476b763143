"""
Scenario files: loading, validation, writing and the bundled examples.

A scenario is a JSON object:

    {
        "name": "steady",
        "leader_v0_speed": 10.0,
        "gains": {"b": 0.4, "k": 0.001, "g_y_length": 50.0, ...},
        "geometry": {"aov_y_degrees": 120.0, ...},
        "integration": {"dt_time": 0.1, "t_end_time": 100.0},
        "template": [0, 1, 2, 3, ...],
        "cars": [{"id": 0, "role": "phantom-leader", "x_length": 90.0, ...}, ...],
        "events": [{"kind": "gy-change", "at_time": 10.0, "delta_length": 5.0}, ...]
    }

Instead of "cars" a file may give "reference": {"jitter_length": 3.0} to
start from the 16-car reference formation with every regular car displaced
at random, drawn from the top-level "seed".

"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from laneless import storage
from laneless.constants import defaults
from laneless.equilibrium import OffsetTemplate
from laneless.errors import DegenerateGeometry, ScenarioError
from laneless.events.main import Event, InvalidEventError, load_handlers
from laneless.formation import (
    Car,
    CarRole,
    FormationSnapshot,
    GainParams,
    GeometryParams,
    IntegrationSettings,
    reference_formation,
)
from laneless.graph import check_geometry
from laneless.schema import (
    Locator,
    SchemaError,
    Section,
    Variable,
    at_least_one,
    non_negative,
    positive,
)

ROLES = [role.value for role in CarRole]


def _one_of(choices):
    return lambda value: None if value in choices else f"must be one of {', '.join(choices)}"


GAINS = Section(
    "gains",
    [
        Variable("b", "real", default=defaults.B, check=non_negative),
        Variable("k", "real", default=defaults.K, check=non_negative),
        Variable("b_x", "real", default=defaults.B_X, check=non_negative),
        Variable("k_x", "real", default=defaults.K_X, check=non_negative),
        Variable("g_y_length", "real", name="g_y", default=defaults.G_Y, check=non_negative),
        Variable("g_x_length", "real", name="g_x", default=defaults.G_X, check=non_negative),
        Variable("W", "real", default=defaults.W, check=positive),
    ],
)

GEOMETRY = Section(
    "geometry",
    [
        Variable("aov_y_degrees", "real", name="aov_y", default=defaults.AOV_Y, check=positive),
        Variable("aov_x_degrees", "real", name="aov_x", default=defaults.AOV_X, check=positive),
        Variable("influence_depth", "int", default=defaults.INFLUENCE_DEPTH, check=at_least_one),
        Variable("max_per_level", "int", default=defaults.MAX_PER_LEVEL, check=at_least_one),
        Variable("hysteresis_degrees", "real", name="hysteresis", default=defaults.HYSTERESIS, check=non_negative),
        Variable("x_bidirectional", "bool", default=True),
        Variable("weighting", "string", default="uniform", check=_one_of(["uniform", "unit"])),
    ],
)

INTEGRATION = Section(
    "integration",
    [
        Variable("dt_time", "real", name="dt", default=defaults.DT, check=positive),
        Variable("t_end_time", "real", name="t_end", default=defaults.T_END, check=non_negative),
    ],
)

CAR = Section(
    "car",
    [
        Variable("id", "int", check=non_negative),
        Variable("role", "string", check=_one_of(ROLES)),
        Variable("x_length", "real", name="x"),
        Variable("y_length", "real", name="y"),
        Variable("vx_speed", "real", name="vx", default=0.0),
        Variable("vy_speed", "real", name="vy", default=0.0),
    ],
)

REFERENCE = Section(
    "reference",
    [
        Variable("jitter_length", "real", name="jitter", default=0.0, check=non_negative),
    ],
)

TOP = Section(
    "scenario",
    [
        Variable("name", "string", default="scenario"),
        Variable("leader_v0_speed", "real", name="leader_v0", default=defaults.V0),
        Variable("template", "real", cls="array", default=None),
        Variable("seed", "int", default=None),
        # Nested sections, parsed separately:
        Variable("gains", "object", default=None),
        Variable("geometry", "object", default=None),
        Variable("integration", "object", default=None),
        Variable("cars", "object", default=None),
        Variable("reference", "object", default=None),
        Variable("events", "object", default=None),
    ],
)

_COMMON = [Variable("kind", "string"), Variable("at_time", "real", name="at", check=non_negative)]

EVENTS = {
    "formation-change": [Variable("template", "real", cls="array", default=None)],
    "gy-change": [Variable("delta_length", "real", name="delta")],
    "gx-change": [Variable("delta_length", "real", name="delta")],
    "obstacle-appear": [
        Variable("x_length", "real", name="x"),
        Variable("y_length", "real", name="y"),
        Variable("id", "int", default=None, check=non_negative),
    ],
    "obstacle-remove": [Variable("id", "int")],
    "lane-change": [
        Variable("car", "int"),
        Variable("x_target_length", "real", name="x_target"),
        Variable("until_time", "real", name="until"),
    ],
    "leader-speed": [Variable("v0_speed", "real", name="v0")],
}
EVENT_SECTIONS = {kind: Section(kind, _COMMON + params) for kind, params in EVENTS.items()}


@dataclass(frozen=True)
class Scenario:
    initial: FormationSnapshot
    gains: GainParams = field(default_factory=GainParams)
    geom: GeometryParams = field(default_factory=GeometryParams)
    events: Tuple[Event, ...] = ()
    settings: IntegrationSettings = field(default_factory=IntegrationSettings)
    leader_v0: float = defaults.V0
    template: OffsetTemplate = field(default_factory=OffsetTemplate)
    name: str = "scenario"
    seed: Optional[int] = None


def jittered_reference(jitter, seed, v0=defaults.V0, g_y=defaults.G_Y, g_x=defaults.G_X):
    """
    Reference formation with every regular car displaced uniformly in
    [-jitter, jitter] on both axes.

    """
    rng = np.random.default_rng(seed)
    snapshot = reference_formation(v0, g_y, g_x)
    offsets = {
        car.id: tuple(float(v) for v in rng.uniform(-jitter, jitter, size=2))
        for car in snapshot.with_role(CarRole.REGULAR)
    }
    return reference_formation(v0, g_y, g_x, offsets)


class _Parser:
    """
    Turn the decoded JSON of one file into a Scenario, anchoring every
    error at the line it comes from.

    """

    def __init__(self, text, path=None, seed=None):
        self.locator = Locator(text)
        self.path = path
        self.seed = seed

    def error(self, message, key=None, start=1, line=None):
        if line is None and key is not None:
            line = self.locator.line_of(key, start)
        return ScenarioError(message, line, self.path)

    def section(self, section, data, start=1):
        try:
            return section.parse(data)
        except SchemaError as e:
            raise self.error(str(e), e.key, start) from e

    def build(self, make, values, key, start=1):
        try:
            return make(**values)
        except ValueError as e:
            raise self.error(str(e), key, start) from e

    def parse(self, data):
        top = self.section(TOP, data)
        nested = {name: top.get(name) for name in ("gains", "geometry", "integration", "cars", "reference", "events")}

        gains = self.build(GainParams, self.section(GAINS, nested["gains"] or {}, self._start("gains")), "gains")
        geom = self.build(
            GeometryParams, self.section(GEOMETRY, nested["geometry"] or {}, self._start("geometry")), "geometry"
        )
        settings = self.build(
            IntegrationSettings,
            self.section(INTEGRATION, nested["integration"] or {}, self._start("integration")),
            "integration",
        )
        v0 = top["leader_v0"]

        seed = self.seed if self.seed is not None else top.get("seed")
        initial = self.formation(nested["cars"], nested["reference"], v0, gains, seed)
        events = self.events(nested["events"] or [])
        return Scenario(
            initial, gains, geom, events, settings, v0, OffsetTemplate(top.get("template")), top["name"], seed
        )

    def _start(self, key):
        return self.locator.line_of(key) or 1

    def formation(self, cars, reference, v0, gains, seed=None):
        if (cars is None) == (reference is None):
            raise self.error("exactly one of cars or reference must be given", "cars" if cars else "reference")

        if reference is not None:
            values = self.section(REFERENCE, reference, self._start("reference"))
            return jittered_reference(values["jitter"], seed, v0, gains.g_y, gains.g_x)

        if not isinstance(cars, list):
            raise self.error("cars must be a list", "cars")

        parsed = []
        lines = self.locator.occurrences("id", self._start("cars"))
        for i, data in enumerate(cars):
            start = lines[i] if i < len(lines) else self._start("cars")
            values = self.section(CAR, data, start)
            values["role"] = CarRole(values["role"])
            parsed.append(self.build(Car, values, "id", start))

        try:
            return FormationSnapshot(tuple(parsed))
        except ValueError as e:
            raise self.error(str(e), "cars") from e

    def events(self, entries):
        if not isinstance(entries, list):
            raise self.error("events must be a list", "events")

        events = []
        lines = self.locator.occurrences("kind", self._start("events"))
        for i, data in enumerate(entries):
            start = lines[i] if i < len(lines) else self._start("events")
            kind = data.get("kind") if isinstance(data, dict) else None
            if kind not in EVENT_SECTIONS:
                raise self.error(f"unknown event kind {kind!r}", line=start)

            values = self.section(EVENT_SECTIONS[kind], data, start)
            values.pop("kind")
            at = values.pop("at")
            until = values.pop("until", None)
            events.append(Event(kind, at, values, until, start))
        return tuple(events)


def validate(scenario: Scenario, path=None):
    """
    Cross-field checks that the schema cannot express.

    """
    snapshot = scenario.initial
    if snapshot.leader is None:
        raise ScenarioError("the formation needs a phantom leader (id 0)", path=path)
    try:
        check_geometry(snapshot)
    except DegenerateGeometry as e:
        raise ScenarioError(str(e), path=path) from e

    vehicles = len(snapshot.vehicles)
    if not scenario.template.uniform and len(scenario.template.slots) < vehicles:
        raise ScenarioError(f"template has {len(scenario.template.slots)} slots for {vehicles} cars", path=path)

    handlers = load_handlers()
    t_end = scenario.settings.t_end
    for event in scenario.events:
        if event.at > t_end or (event.until is not None and event.until > t_end):
            raise ScenarioError(f"{event.kind} falls outside [0, {t_end:g}]", event.line, path)
        if event.kind == "formation-change" and event.params.get("template") is not None:
            if len(event.params["template"]) < vehicles:
                raise ScenarioError(f"template has too few slots for {vehicles} cars", event.line, path)
        try:
            handlers[event.kind].validate(event)
        except InvalidEventError as e:
            raise ScenarioError(str(e), event.line, path) from e


def parse_scenario(text, path=None, seed=None) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(e.msg, e.lineno, path) from e

    scenario = _Parser(text, path, seed).parse(data)
    validate(scenario, path)
    return scenario


def load_scenario(path, seed=None) -> Scenario:
    """
    Read and validate a scenario file.

    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf8")
    except OSError as e:
        raise ScenarioError(f"cannot read scenario: {e.strerror}", path=path) from e

    scenario = parse_scenario(text, path, seed)
    logging.info(f"Loaded scenario {scenario.name!r} from {path} ({len(scenario.events)} events)")
    return scenario


def dump_scenario(scenario: Scenario):
    """
    JSON object for a scenario, with the formation written car by car.

    """
    data = {"name": scenario.name, "leader_v0_speed": scenario.leader_v0}
    if scenario.seed is not None:
        data["seed"] = scenario.seed
    if not scenario.template.uniform:
        data["template"] = list(scenario.template.slots)

    data["gains"] = GAINS.dump(vars(scenario.gains))
    data["geometry"] = GEOMETRY.dump(vars(scenario.geom))
    data["integration"] = INTEGRATION.dump({"dt": scenario.settings.dt, "t_end": scenario.settings.t_end})
    data["cars"] = [CAR.dump({**vars(car), "role": car.role.value}) for car in scenario.initial.cars]

    data["events"] = []
    for event in scenario.events:
        values = {"kind": event.kind, "at": event.at, "until": event.until, **event.params}
        data["events"].append(EVENT_SECTIONS[event.kind].dump(values))
    return data


def write_scenario(scenario: Scenario, path):
    storage.write_json(path, dump_scenario(scenario), indent=2)
    logging.info(f"Wrote scenario {scenario.name!r} to {path}")


def example_scenario(name) -> Scenario:
    """
    One of the bundled reference scenarios.

    steady: perturbed reference formation settling into its spacing.
    formation-change: narrow third level, then narrow second and fourth from t=2000.
    obstacle: an obstacle far ahead that every level slows for and steers around.
    lane-change: the leftmost car of level two moves right.

    """
    settings = IntegrationSettings(dt=0.5, t_end=8000.0)

    if name == "steady":
        offsets = {6: (3.0, -4.0), 11: (-2.0, 5.0), 15: (4.0, 2.0)}
        return Scenario(reference_formation(offsets=offsets), settings=settings, name=name)

    if name == "formation-change":
        alternate = [float(s) for s in defaults.NARROW_ALTERNATE_TEMPLATE]
        events = (Event("formation-change", 2000.0, {"template": alternate}),)
        template = OffsetTemplate(defaults.NARROW_SECOND_TEMPLATE)
        settings = IntegrationSettings(dt=0.5, t_end=5000.0)
        return Scenario(reference_formation(), events=events, settings=settings, template=template, name=name)

    if name == "obstacle":
        # 1000 ahead of the first level when it appears, between cars 3 and 4.
        events = (
            Event("obstacle-appear", 50.0, {"x": 25.0, "y": 1700.0, "id": defaults.OBSTACLE_BASE_ID}),
            Event("obstacle-remove", 1000.0, {"id": defaults.OBSTACLE_BASE_ID}),
        )
        return Scenario(reference_formation(), events=events, settings=settings, name=name)

    if name == "lane-change":
        # Cars are numbered from the boundary leftwards, so car 8 crosses its whole level.
        events = (Event("lane-change", 100.0, {"car": 8, "x_target": 75.0}, until=200.0),)
        return Scenario(reference_formation(), events=events, settings=settings, name=name)

    raise ScenarioError(f"unknown example {name!r}, choose from {', '.join(EXAMPLES)}")


EXAMPLES = ["steady", "formation-change", "obstacle", "lane-change"]

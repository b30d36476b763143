"""
Formation changes: new lateral templates and spacing steps.

Each of these is an impulse: the state is continuous but the equilibrium it
is measured against jumps. Whether the jump is admissible (does not move
the deviation away from the origin) is logged, never enforced.

"""
import logging
from dataclasses import replace

import numpy as np

from laneless.equilibrium import OffsetTemplate, spacing_constants
from laneless.errors import DimensionMismatch
from laneless.events.main import EventHandler, InvalidEventError
from laneless.stability import impulse_admissible, lateral_deviation, longitudinal_deviation


def _advise(event, admissible):
    if admissible is None:
        return
    if admissible:
        logging.debug(f"{event.kind} at t={event.at:g} is an admissible impulse")
    else:
        logging.warning(f"{event.kind} at t={event.at:g} increases the deviation norm, stability is not guaranteed")


def _impulse(before, after):
    """
    Admissibility of moving from deviation `before` to deviation `after`.

    """
    return impulse_admissible(before, after.positions - before.positions)


class FormationChange(EventHandler):
    """
    Switch to a new lateral template.

    """

    @staticmethod
    def get_kinds():
        return "formation-change"

    def validate(self, event):
        template = event.params.get("template")
        if template is not None and not all(np.isfinite(template)):
            raise InvalidEventError("Template slots must be finite")

    def apply(self, event, state):
        template = OffsetTemplate(event.params.get("template"))

        admissible = None
        if state.mode is not None and state.mode.x is not None:
            bundle_x, g_x = state.mode.x.bundle, state.gains.g_x
            try:
                C = spacing_constants(state.snapshot, state.graphs.x, bundle_x, state.graphs.levels, template, g_x)
            except DimensionMismatch as e:
                raise InvalidEventError(f"Template has {e.actual} slots for {e.expected} cars") from e
            before = lateral_deviation(state.snapshot, bundle_x, state.mode.C, g_x)
            admissible = _impulse(before, lateral_deviation(state.snapshot, bundle_x, C, g_x))

        state.template = template
        state.stale = True
        _advise(event, admissible)
        return {"template": list(template.slots) if template.slots else "uniform", "admissible": admissible}


class GapChange(EventHandler):
    """
    Step the longitudinal or the lateral spacing by a signed amount.

    """

    @staticmethod
    def get_kinds():
        return ["gy-change", "gx-change"]

    def validate(self, event):
        if "delta" not in event.params:
            raise InvalidEventError(f"{event.kind} needs a spacing delta")

    def apply(self, event, state):
        name = "g_y" if event.kind == "gy-change" else "g_x"
        value = getattr(state.gains, name) + event.params["delta"]
        if value < 0:
            raise InvalidEventError(f"{name} would become negative ({value:g})")
        gains = replace(state.gains, **{name: value})

        admissible = None
        mode = state.mode
        if mode is not None and name == "g_y":
            before = longitudinal_deviation(state.snapshot, mode.y.bundle, state.gains, state.leader_v0)
            admissible = _impulse(before, longitudinal_deviation(state.snapshot, mode.y.bundle, gains, state.leader_v0))
        elif mode is not None and mode.x is not None:
            before = lateral_deviation(state.snapshot, mode.x.bundle, mode.C, state.gains.g_x)
            admissible = _impulse(before, lateral_deviation(state.snapshot, mode.x.bundle, mode.C, value))

        state.gains = gains
        state.stale = True
        _advise(event, admissible)
        return {name: value, "admissible": admissible}

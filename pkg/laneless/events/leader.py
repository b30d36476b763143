"""
Leader speed changes.

"""
import logging
from dataclasses import replace

from laneless.events.main import EventHandler, InvalidEventError
from laneless.formation import FormationSnapshot


class LeaderSpeed(EventHandler):
    @staticmethod
    def get_kinds():
        return "leader-speed"

    def get_priority(self):
        return self.LOWEST_PRIORITY

    def validate(self, event):
        if "v0" not in event.params:
            raise InvalidEventError("leader-speed needs a speed")

    def apply(self, event, state):
        leader = state.snapshot.leader
        if leader is None:
            raise InvalidEventError("The formation has no phantom leader")

        v0 = event.params["v0"]
        logging.debug(f"Leader speed {state.leader_v0:g} -> {v0:g} at t={state.snapshot.t:g}")
        state.leader_v0 = v0
        state.snapshot = FormationSnapshot(
            tuple(replace(c, vy=v0) if c.id == leader.id else c for c in state.snapshot.cars), state.snapshot.t
        )
        return {"v0": v0}

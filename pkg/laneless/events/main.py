"""
Main entry point for scenario events, including the abstract base class.

"""
import abc
import inspect
import pkgutil
from dataclasses import dataclass, field
from importlib import import_module
from pathlib import Path
from typing import Any, Dict, Optional

from laneless.errors import SimulationError


class InvalidEventError(SimulationError):
    """
    Raised by a handler when it refuses an event.

    This may be because the event is inconsistent with itself (a lane change
    that ends before it starts) or with the formation at the time it is due
    (removing an obstacle that is not there). Refused events are logged and
    skipped.

    """

    pass


@dataclass(frozen=True)
class Event:
    """
    A scheduled change to a running scenario.

    `params` holds the kind-specific values. `until` ends interval events
    (lane changes). `line` is where the event starts in its scenario file.

    """

    kind: str
    at: float
    params: Dict[str, Any] = field(default_factory=dict, hash=False)
    until: Optional[float] = None
    line: Optional[int] = field(default=None, compare=False)


class EventHandler(metaclass=abc.ABCMeta):
    """
    Abstract event handler.

    Every event kind a scenario may schedule has one handler, which checks
    the event when the scenario is loaded and applies it to the run state
    when it is due.

    """

    # Priority constants:
    HIGHEST_PRIORITY = 3
    DEFAULT_PRIORITY = 2
    LOWEST_PRIORITY = 1

    def get_priority(self):
        """
        Return the priority for this handler.

        Events due at the same step are applied from the highest priority
        down, in file order within one priority.

        """
        return self.DEFAULT_PRIORITY

    @abc.abstractstaticmethod
    def get_kinds():
        """
        Returns the event kind (or list of kinds) this handler implements.

        """
        raise NotImplementedError

    def validate(self, event: Event):
        """
        Check an event before any run starts, raising InvalidEventError.

        """
        pass

    @abc.abstractmethod
    def apply(self, event: Event, state):
        """
        Apply a due event to the run state and return its log details.

        """
        raise NotImplementedError


def load_handlers():
    """
    Load all handlers in this package that are subclasses of EventHandler.

    """
    handler_map = {}

    # Run through all sibling modules
    for (_, name, _) in pkgutil.iter_modules([str(Path(__file__).parent)]):
        if name.endswith("_test"):
            continue
        module = import_module(f".{name}", package=__package__)

        for attribute in dir(module):
            handler = getattr(module, attribute)

            if inspect.isclass(handler) and issubclass(handler, EventHandler):
                try:
                    instanced = handler()
                except TypeError:
                    # Skip EventHandler itself (TypeError because of abstracts)
                    continue

                kinds = handler.get_kinds()
                if isinstance(kinds, list):
                    handler_map.update(dict((kind, instanced) for kind in kinds))
                else:
                    handler_map[kinds] = instanced

    return handler_map

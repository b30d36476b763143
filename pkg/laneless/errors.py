"""
Errors raised while building graphs, integrating and running scenarios.

"""


class SimulationError(Exception):
    """
    Base class for every error raised by the simulator.

    """

    pass


class MissingLeader(SimulationError):
    """
    Raised when the root of an influence graph is not in the formation.

    The Y graph is rooted at the phantom leader (id 0), the X graph at the
    boundary car with id 1.

    """

    def __init__(self, axis, root):
        super().__init__(f"No root car {root} for the {axis} influence graph")
        self.axis = axis
        self.root = root


class DegenerateGeometry(SimulationError):
    """
    Raised when two cars occupy the same position.

    """

    def __init__(self, first, second):
        super().__init__(f"Cars {first} and {second} are coincident")
        self.cars = (first, second)


class Unreachable(SimulationError):
    def __init__(self, car):
        super().__init__(f"Car {car} has no directed path from the root")
        self.car = car


class IsolatedNode(SimulationError):
    def __init__(self, car):
        super().__init__(f"Car {car} has no incoming edges")
        self.car = car


class NonFiniteState(SimulationError):
    """
    Raised when a coordinate leaves the finite range during integration.

    This nearly always means the gains are misconfigured.

    """

    def __init__(self, t, cars=()):
        super().__init__(f"Non-finite state at t={t:g} for cars {list(cars)}")
        self.t = t
        self.cars = tuple(cars)


class VelocityJump(SimulationError):
    def __init__(self):
        super().__init__("Impulses may only shift positions, the velocity block must be zero")


class SingularLevel(SimulationError):
    def __init__(self, car):
        super().__init__(f"Zero diagonal entry for car {car}, it is disconnected")
        self.car = car


class DimensionMismatch(SimulationError):
    def __init__(self, expected, actual):
        super().__init__(f"Expected dimension {expected}, got {actual}")
        self.expected = expected
        self.actual = actual


class ZeroSpacing(SimulationError):
    def __init__(self):
        super().__init__("The lateral spacing g_x must be nonzero")


class SpanningTreeLost(SimulationError):
    """
    Raised when a switch leaves the Y graph without a spanning tree at node 0.

    """

    def __init__(self, t, cars):
        super().__init__(f"Spanning tree lost at t={t:g}, unreachable cars: {sorted(cars)}")
        self.t = t
        self.cars = tuple(sorted(cars))


class CorollaryViolated(SimulationError):
    """
    An obstacle is the only influence of a car.

    This is reported, never raised out of a run: the simulation continues but
    its stability is no longer certified.

    """

    def __init__(self, car, obstacle):
        super().__init__(f"Car {car} is influenced by obstacle {obstacle} alone")
        self.car = car
        self.obstacle = obstacle


class ScenarioError(SimulationError):
    """
    Raised when a scenario file does not parse or validate.

    The message is anchored at the line of the offending key when it can be
    located in the file.

    """

    def __init__(self, message, line=None, path=None):
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            location = f"line {line}: "
        super().__init__(f"{location}{message}")
        self.line = line
        self.path = path

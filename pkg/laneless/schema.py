"""
Typed variables and sections describing the scenario file format.

Keys in scenario files carry their unit as a suffix (`g_y_length`,
`dt_time`, `aov_y_degrees`); the schema maps them to the internal names
used by the simulator.

"""
import math
import re


class Required:
    def __repr__(self):
        return "REQUIRED"


REQUIRED = Required()


class SchemaError(ValueError):
    """
    Raised when a value does not match its variable, carrying the file key.

    """

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class Variable:
    """
    Variable entity in a scenario section.

    Variables always have the following properties:

        key = "g_y_length"      (name in the file)
        name = "g_y"            (name in the simulator)
        class = "static|array"
        type = "real|int|bool|string|object"
        default = value or REQUIRED

    """

    def __init__(self, key, type, name=None, cls="static", default=REQUIRED, check=None, description=""):
        self.properties = {
            "key": key,
            "name": name or key,
            "class": cls,
            "type": type,
            "default": default,
            "description": description,
        }
        self.check = check

    def __getitem__(self, key):
        """
        Access Variable properties like a dictionary.

        Some properties of Variables are reserved keywords (class, type) so
        accessing them is easier as a dictionary.

        """
        return self.properties[key]

    @property
    def required(self):
        return self["default"] is REQUIRED

    def parse_value(self, value):
        """
        Parse a given value for this Variable.

        """
        if value is None and self["default"] is None:
            return None

        if self["class"] == "array":
            if not isinstance(value, list):
                raise SchemaError(self["key"], f"expected a list of {self['type']} values")
            parsed = [self._parse(v) for v in value]
        else:
            parsed = self._parse(value)

        if self.check is not None:
            message = self.check(parsed)
            if message:
                raise SchemaError(self["key"], message)
        return parsed

    def _parse(self, value):
        """
        Internal parse function used in list comprehension.

        """
        if self["type"] == "real":
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise SchemaError(self["key"], f"expected a finite number, got {value!r}")
            return float(value)
        elif self["type"] == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise SchemaError(self["key"], f"expected an integer, got {value!r}")
            return value
        elif self["type"] == "object":
            return value
        elif self["type"] == "bool":
            if not isinstance(value, bool):
                raise SchemaError(self["key"], f"expected true or false, got {value!r}")
            return value
        if not isinstance(value, str):
            raise SchemaError(self["key"], f"expected a string, got {value!r}")
        return value

    def dump_value(self, value):
        """
        Inverse of parse_value for the scenario writer.

        """
        return list(value) if self["class"] == "array" and value is not None else value


class Section:
    """
    A named group of variables, as found in one JSON object.

    """

    def __init__(self, name, variables):
        self.name = name
        self.variables = variables
        self.by_key = {v["key"]: v for v in variables}

    def parse(self, data):
        """
        Parse a JSON object into a dict of internal names to values.

        Unknown keys are rejected and missing optional keys take their
        default.

        """
        if not isinstance(data, dict):
            raise SchemaError(self.name, "expected an object")

        for key in data:
            if key not in self.by_key:
                raise SchemaError(key, f"unknown key in {self.name}")

        result = {}
        for variable in self.variables:
            if variable["key"] in data:
                result[variable["name"]] = variable.parse_value(data[variable["key"]])
            elif variable.required:
                raise SchemaError(variable["key"], f"missing from {self.name}")
            elif variable["default"] is not None:
                result[variable["name"]] = variable["default"]
        return result

    def dump(self, values):
        """
        Build the JSON object for a dict of internal names to values.

        """
        data = {}
        for variable in self.variables:
            if variable["name"] in values and values[variable["name"]] is not None:
                data[variable["key"]] = variable.dump_value(values[variable["name"]])
        return data


def non_negative(value):
    return None if value >= 0 else f"must be non-negative, got {value:g}"


def positive(value):
    return None if value > 0 else f"must be positive, got {value:g}"


def at_least_one(value):
    return None if value >= 1 else f"must be at least 1, got {value}"


class Locator:
    """
    Find the line of a key in the text of a JSON file.

    """

    def __init__(self, text):
        self.lines = text.splitlines()

    def line_of(self, key, start=1):
        """
        First line at or after `start` where `key` appears as a JSON key.

        """
        pattern = re.compile(rf'"{re.escape(key)}"\s*:')
        for number in range(max(start, 1), len(self.lines) + 1):
            if pattern.search(self.lines[number - 1]):
                return number
        return None

    def occurrences(self, key, start=1):
        pattern = re.compile(rf'"{re.escape(key)}"\s*:')
        return [n for n in range(max(start, 1), len(self.lines) + 1) if pattern.search(self.lines[n - 1])]

"""
All functions related to writing and reading run output.

Every file is written to a temporary sibling first and renamed into place,
so a failed command never leaves a partial file behind.

"""
import contextlib
import csv
import json
import os
import tempfile
from pathlib import Path

from laneless.formation import Car, CarRole, FormationSnapshot

TRACE_HEADER = ["t", "car", "role", "level", "x", "y", "vx", "vy"]


@contextlib.contextmanager
def atomic_open(path, newline=None):
    """
    Open a temporary file next to `path` and move it over `path` on success.

    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf8", newline=newline) as handle:
            yield handle
        os.replace(temp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(temp)
        raise


def write_json(path, data, indent=2, sort_keys=False):
    with atomic_open(path) as handle:
        json.dump(data, handle, indent=indent, sort_keys=sort_keys)
        handle.write("\n")


def read_json(path):
    with open(path, encoding="utf8") as handle:
        return json.load(handle)


def trace_rows(trace):
    """
    One row per car per sample, obstacles and the leader included.

    """
    for snapshot, levels in zip(trace.samples, trace.levels):
        for car in snapshot.cars:
            level = levels.get(car.id, "")
            kinematics = [repr(car.x), repr(car.y), repr(car.vx), repr(car.vy)]
            yield [repr(snapshot.t), car.id, car.role.value, level] + kinematics


def write_rows(path, header, rows):
    with atomic_open(path, newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def write_trace(trace, path):
    write_rows(path, TRACE_HEADER, trace_rows(trace))


def read_trace(path):
    """
    Read a trace back into (snapshots, levels), one entry per sample time.

    """
    samples, levels = [], []
    current_t, cars, current_levels = None, [], {}

    with open(path, encoding="utf8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != TRACE_HEADER:
            raise ValueError(f"{path} is not a trace, expected header {','.join(TRACE_HEADER)}")

        for row in reader:
            t, car_id, role, level, x, y, vx, vy = row
            t = float(t)
            if current_t is not None and t != current_t:
                samples.append(FormationSnapshot(tuple(cars), current_t))
                levels.append(current_levels)
                cars, current_levels = [], {}
            current_t = t
            cars.append(Car(int(car_id), CarRole(role), float(x), float(y), float(vx), float(vy)))
            if level != "":
                current_levels[int(car_id)] = int(level)

    if current_t is not None:
        samples.append(FormationSnapshot(tuple(cars), current_t))
        levels.append(current_levels)
    return samples, levels

"""
Path constants

"""
from pathlib import Path

OUTPUT = Path("output")

# File names written into a run's output directory
TRACE = "trace.csv"
EVENTS = "events.json"
SUMMARY = "summary.json"
STABILITY = "stability.json"

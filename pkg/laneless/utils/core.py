"""
Utility functions.

"""
import argparse
import os
import sys


###########################################################################
#                           ARGPARSE UTILITY                              #
###########################################################################
class FullPaths(argparse.Action):
    """
    Expand user- and relative-paths.

    """

    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, os.path.abspath(os.path.expanduser(values)))


def is_path(name):
    """
    Checks if a path is an existing file or directory.

    """
    if not os.path.isdir(name) and not os.path.isfile(name):
        raise argparse.ArgumentTypeError(f"{name} is not a directory or file")
    return name


def at_least_one(value):
    """
    Parse a positive integer argument.

    """
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{value} is not an integer")
    if number < 1:
        raise argparse.ArgumentTypeError(f"{value} must be at least 1")
    return number


###########################################################################
#                                CLI UTILITY                              #
###########################################################################
def print_progress(label, i, end_val, bar_length=20, stream=None):
    stream = stream or sys.stderr
    percent = float(i + 1) / end_val
    hashes = "#" * int(round(percent * bar_length))
    spaces = " " * (bar_length - len(hashes))

    if i == end_val - 1:
        stream.write(f"\r{label:45} [{hashes + spaces}] DONE\n")
    else:
        stream.write(f"\r{label:45} [{hashes + spaces}] {int(round(percent * 100))}%")
    stream.flush()

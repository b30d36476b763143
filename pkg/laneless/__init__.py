"""
Simulation and analysis of lane-less vehicle formations under consensus control.

"""
__version__ = "0.3.0"

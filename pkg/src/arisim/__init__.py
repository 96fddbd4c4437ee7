"""Simulation of aRIS-aided underwater acoustic MIMO links."""

__version__ = "0.1.0"

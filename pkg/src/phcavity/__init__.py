"""Photonic-crystal slab microcavity toolkit: FDTD solver, geometry, analysis."""

__version__ = "0.1.0"

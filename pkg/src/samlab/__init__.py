"""Collision-sampler simulation laboratory."""

__version__ = "0.1.0"

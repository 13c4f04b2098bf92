"""Flatness-based motion planning for a moving cantilever beam with tip-mass."""

__version__ = "0.1.0"

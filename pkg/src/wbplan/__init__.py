"""Balanced whole-body sampling-based motion planning."""

__version__ = "0.1.0"

"""Interval-partition diffusions built from marked stable Lévy processes."""

__version__ = "0.1.0"

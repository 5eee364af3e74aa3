"""Heterogeneous multicore-fiber true time delay lines."""

__version__ = "0.1.0"

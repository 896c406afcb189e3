"""Exact computations in countable abelian groups and on finite-dimensional tori."""

__version__ = "0.1.0"

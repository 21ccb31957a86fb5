"""Semidefinite-programming bounds for multi-size cap and sphere packings."""

__version__ = "0.1.0"

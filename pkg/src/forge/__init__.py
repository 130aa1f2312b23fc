"""Compile relational theories to pithy form and sample exchangeable structures."""

__version__ = "0.1.0"

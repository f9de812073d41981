"""Deterministic indoor exploration with an online topological scene memory."""

__version__ = "0.1.0"

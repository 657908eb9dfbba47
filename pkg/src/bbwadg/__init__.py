"""Bernstein-Bezier weight-adjusted DG for acoustic and elastic waves."""

__version__ = "0.1.0"

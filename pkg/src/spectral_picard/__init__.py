"""Spectral fixed-point solver for periodic incompressible flow with
certified decay-class arithmetic and smallness-condition checks."""

__version__ = "0.1.0"

"""Optimal low-congestion regions for congested transport on the unit square."""
from ._accel import backend
from .congestion import (
    CongestionFunction,
    EnvelopePair,
    SubgradientPolicy,
    build_envelope,
    quadratic_pair,
)
from .grid import Grid, ScalarField, SourceConfig, VectorField, build_source
from .solver import SolveReport, SolverConfig, minimize, recover

__version__ = "0.1.0"

"""Pathwise solutions of a transport equation driven by a fractional potential.

Modules:
    spectral     periodic grids, transforms, multipliers, spatial cutoff
    sobolev      Bessel potential and Besov norms, regularity probes
    paraproduct  products of distributions via smooth frequency truncation
    dirichlet    Dirichlet Laplacian on D, heat semigroup, fractional powers
    noise        fBm synthesis, cutoff noise, regularity reports
    solver       weighted Holder norms, integral operator, Picard iteration
    cli          command-line front end
"""
from .spectral import Grid, GridError, RealField
from .dirichlet import SineCoeffs
from .noise import NoiseSpec
from .reports import BoundReport
from .solver import ConfigError, SolverConfig, TimePath, picard_solve

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "GridError",
    "RealField",
    "SineCoeffs",
    "NoiseSpec",
    "BoundReport",
    "ConfigError",
    "SolverConfig",
    "TimePath",
    "picard_solve",
]

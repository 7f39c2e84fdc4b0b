"""Pseudo-spectral ideal MHD in a thin slab with a strong horizontal background field."""

from .errors import ArtifactError, BlowUpError, ConfigError, ConstraintError, GridError, ParityError, SlabError
from .fields import ElsasserState, Family, InitialParams, VectorField, make_initial
from .grid import Grid, GridSpec, Parity, ScalarField, make_grid

__version__ = "0.1.0"

__all__ = [
    "ArtifactError",
    "BlowUpError",
    "ConfigError",
    "ConstraintError",
    "ElsasserState",
    "Family",
    "Grid",
    "GridError",
    "GridSpec",
    "InitialParams",
    "Parity",
    "ParityError",
    "ScalarField",
    "SlabError",
    "VectorField",
    "make_grid",
    "make_initial",
]

"""Determining wavenumber toolkit for periodic incompressible flows."""

from detwave.errors import (
    AdmissibilityError,
    CFLError,
    ConfigError,
    DetwaveError,
    LambdaInfiniteError,
    ResolutionError,
    SnapshotError,
)
from detwave.littlewood_paley import BandDecomposition, DyadicPartition, build_partition, decompose
from detwave.spectral import ForcingSpec, Grid, SolverState, SpectralField, random_field, step
from detwave.wavenumber import TupleGrid, derive_params, uniform_lambda

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError",
    "CFLError",
    "ConfigError",
    "DetwaveError",
    "LambdaInfiniteError",
    "ResolutionError",
    "SnapshotError",
    "BandDecomposition",
    "DyadicPartition",
    "build_partition",
    "decompose",
    "ForcingSpec",
    "Grid",
    "SolverState",
    "SpectralField",
    "random_field",
    "step",
    "TupleGrid",
    "derive_params",
    "uniform_lambda",
]

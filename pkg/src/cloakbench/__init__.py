"""Numerical benchmark for approximate electromagnetic cloaking by complementary media."""

from . import geomap, media, mie_solver, shellnorm, specfun
from .harness import ExperimentConfig, SweepRecord, fit_records, run_sweep

__all__ = [
    "specfun",
    "geomap",
    "media",
    "mie_solver",
    "shellnorm",
    "ExperimentConfig",
    "SweepRecord",
    "fit_records",
    "run_sweep",
]
__version__ = "0.1.0"

"""Particle, matter-density and flash ontologies on a shared Schrodinger solver."""

from importlib.metadata import PackageNotFoundError, version

from .bohmian import Ensemble, GuidanceField, run_ensemble, sample_initial_positions, velocity_field
from .grid import GridSpec, PotentialField, WaveFunction
from .grw import CollapseEvent, GrwParams, NaturalUnits, collapse, run_grw
from .ontology import FlashEvent, MatterDensityField, RegionPartition, matter_density
from .scenarios import ScenarioSpec, build, load_bundled
from .schrodinger import PropagatorConfig, evolve, step

try:
    __version__ = version("ontosim")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"

__all__ = [
    "CollapseEvent",
    "Ensemble",
    "FlashEvent",
    "GridSpec",
    "GrwParams",
    "GuidanceField",
    "MatterDensityField",
    "NaturalUnits",
    "PotentialField",
    "PropagatorConfig",
    "RegionPartition",
    "ScenarioSpec",
    "WaveFunction",
    "build",
    "collapse",
    "evolve",
    "load_bundled",
    "matter_density",
    "run_ensemble",
    "run_grw",
    "sample_initial_positions",
    "step",
    "velocity_field",
]

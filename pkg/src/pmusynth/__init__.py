"""Synthetic load, wind and PMU measurement data for transmission grid studies."""

__version__ = "0.1.0"

from .exceptions import (CoverageError, InfeasibleError, PmuSynthError, PowerFlowError,
                         TsbError, ValidationError)
from .grid import CorrelationCurve, GeoPoint, GridCase, correlation, great_circle_distance, load_grid_case
from .wind.power import TurbineCurve, WindPowerCurve, power_output
from .wind.variation import SigmaEstimator, estimate_sigma_distribution
from .wind.synth import CorrelatedWindSynthesizer, build_reference_lattice, synthesize_wind_speeds
from .demand.scaling import MinuteLoadScaler, scale_day_hour
from .demand.patterns import LoadPatternClusterer, extract_patterns
from .demand.assignment import PatternAssigner, assign_patterns
from .demand.hourly import build_hourly_load, fit_bus_weights
from .composition import CompositionTable, LoadCompositionTransformer, compose
from .emit.tsb import read_tsb, write_tsb
from .config import PipelineConfig

__all__ = [
    "__version__", "PmuSynthError", "ValidationError", "CoverageError", "InfeasibleError",
    "PowerFlowError", "TsbError", "GeoPoint", "CorrelationCurve", "GridCase", "correlation",
    "great_circle_distance", "load_grid_case", "TurbineCurve", "WindPowerCurve", "power_output",
    "SigmaEstimator", "estimate_sigma_distribution", "CorrelatedWindSynthesizer",
    "build_reference_lattice", "synthesize_wind_speeds", "MinuteLoadScaler", "scale_day_hour",
    "LoadPatternClusterer", "extract_patterns", "PatternAssigner", "assign_patterns",
    "build_hourly_load", "fit_bus_weights", "CompositionTable", "LoadCompositionTransformer",
    "compose", "read_tsb", "write_tsb", "PipelineConfig",
]

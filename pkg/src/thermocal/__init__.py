"""Calibration, validation and fee optimization for a heated test cell.

The package couples a one-node RC surrogate of a setpoint-heated cell to a
Bayesian workflow: componentwise Metropolis calibration of three physical
factors plus the observation noise variance, posterior-predictive
goodness-of-fit checks, uncertainty propagation to the mean heating power,
and a utility-based choice of a fixed-price heating fee.
"""

__version__ = "0.1.0"

from .decision import DecisionResult, UtilitySpec, optimize_fee
from .errors import ConfigError, DataError, DomainError, SimulationError, ThermocalError
from .mcmc import AdaptationPolicy, Chain, diagnostics, effective_sample_size, run_chain
from .sensitivity import OATSpec, hybrid_index, oat_index, screen, sobol_first_order
from .statmodel import MeasurementSeries, PosteriorModel, PriorSpec
from .synthetic import SyntheticDataSpec, default_forcing, generate_measurements
from .thermal import (
    CellGeometry,
    ForcingMatrix,
    ForcingRecord,
    ParameterVector,
    PredictionSeries,
    block_average,
    simulate,
    step,
)
from .validation import PosteriorSample, ValidationReport, propagate, validate_model

__all__ = [
    "AdaptationPolicy",
    "CellGeometry",
    "Chain",
    "ConfigError",
    "DataError",
    "DecisionResult",
    "DomainError",
    "ForcingMatrix",
    "ForcingRecord",
    "MeasurementSeries",
    "OATSpec",
    "ParameterVector",
    "PosteriorModel",
    "PosteriorSample",
    "PredictionSeries",
    "PriorSpec",
    "SimulationError",
    "SyntheticDataSpec",
    "ThermocalError",
    "UtilitySpec",
    "ValidationReport",
    "block_average",
    "default_forcing",
    "diagnostics",
    "effective_sample_size",
    "generate_measurements",
    "hybrid_index",
    "oat_index",
    "optimize_fee",
    "propagate",
    "run_chain",
    "screen",
    "simulate",
    "sobol_first_order",
    "step",
    "validate_model",
    "__version__",
]

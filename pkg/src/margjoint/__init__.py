"""Joint-distribution parameters from marginal, summary-level study data."""

from .binary_core import (
    JointBinaryParams,
    MarginalSummary,
    SummaryCollection,
    log_likelihood,
    phi_coefficient,
)
from .binary_estimate import EstimateOptions, EstimateReport, full_estimate
from .binary_sim import Scenario, diagnostics, run_scenario
from .estimators import BivariateBinomialMLE, HierarchicalCorrelation
from .exceptions import ConvergenceError, DomainError
from .io import load_real_data

__all__ = [
    "BivariateBinomialMLE",
    "ConvergenceError",
    "DomainError",
    "EstimateOptions",
    "EstimateReport",
    "HierarchicalCorrelation",
    "JointBinaryParams",
    "MarginalSummary",
    "Scenario",
    "SummaryCollection",
    "diagnostics",
    "full_estimate",
    "load_real_data",
    "log_likelihood",
    "phi_coefficient",
    "run_scenario",
]

__version__ = "0.1.0"

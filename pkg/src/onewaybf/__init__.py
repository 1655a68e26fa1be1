"""Bayes factors for the random-effects term in a balanced one-way ANOVA."""

from .bayes_factor import (
    BayesFactorResult,
    Method,
    Model,
    ModelParams,
    PearsonTypeVI,
    closed_form_log_bf,
    posterior_prob_m1,
    quadrature_log_bf,
)
from .core_math import QuadratureSpec
from .data import BalancedDesign, DataMatrix, SufficientStats, ingest_csv, sufficient_stats
from .errors import DomainError, InputError, OneWayBFError, QuadratureError

__version__ = "0.1.0"

__all__ = [
    "BalancedDesign",
    "BayesFactorResult",
    "DataMatrix",
    "DomainError",
    "InputError",
    "Method",
    "Model",
    "ModelParams",
    "OneWayBFError",
    "PearsonTypeVI",
    "QuadratureError",
    "QuadratureSpec",
    "SufficientStats",
    "closed_form_log_bf",
    "ingest_csv",
    "posterior_prob_m1",
    "quadrature_log_bf",
    "sufficient_stats",
]

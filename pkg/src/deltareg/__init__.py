"""High-order regularization of weighted Dirac-delta sums for Chebyshev collocation solvers."""

from .delta_kernel import DeltaKernel, KernelSpec, build_kernel, evaluate_delta, verify_conditions
from .errors import DeltaRegError, OracleFailure, SolverBlowUp, ValidationError
from .regularizer import (
    ParticleField,
    QuadratureRule,
    RegularizedSource,
    convolve_oracle,
    newton_cotes_weights,
    optimal_epsilon,
    regularize,
    validate_exactness_constraint,
)
from .spectral import SpectralOperator, TimeStepper

__version__ = "0.1.0"

__all__ = [
    "DeltaKernel",
    "KernelSpec",
    "build_kernel",
    "evaluate_delta",
    "verify_conditions",
    "DeltaRegError",
    "OracleFailure",
    "SolverBlowUp",
    "ValidationError",
    "ParticleField",
    "QuadratureRule",
    "RegularizedSource",
    "convolve_oracle",
    "newton_cotes_weights",
    "optimal_epsilon",
    "regularize",
    "validate_exactness_constraint",
    "SpectralOperator",
    "TimeStepper",
]

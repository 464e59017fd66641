"""Jump-Restore continuous-time MCMC: local kernels, killing/regeneration, estimators
and an exact finite-state verifier."""

from ._accel import BACKEND
from .core import StateSpace, UnnormalizedDensity, WeightedSample, wrap_torus
from .errors import (
    CapabilityError,
    EmptyEstimateError,
    InvalidInputError,
    InvalidParameterError,
    JumpRestoreError,
    KappaTooSmallError,
    PreconditionError,
    ReducibilityError,
    UndefinedGradientError,
)
from .rng import RngStream, derive_stream
from .targets import builtin_target

__all__ = [
    "BACKEND", "StateSpace", "UnnormalizedDensity", "WeightedSample", "wrap_torus",
    "RngStream", "derive_stream", "builtin_target",
    "JumpRestoreError", "InvalidInputError", "InvalidParameterError", "CapabilityError",
    "UndefinedGradientError", "EmptyEstimateError", "PreconditionError", "ReducibilityError",
    "KappaTooSmallError",
]

"""Simulation and numerical analysis of non-homogeneous Ito processes."""

from .errors import (
    HypothesisViolation,
    IllPosedFitError,
    ModelParseError,
    NhitoError,
    NumericalFailure,
    OutOfDomainError,
    QuadratureError,
    RightDerivativeError,
    SectorViolatedError,
    ValidationError,
)
from .model import (
    Box,
    CoefficientField,
    JumpKernelSpec,
    JumpLaw,
    ProcessModel,
    TruncationSpec,
    eval_characteristics,
    lift_space_time,
    validate_model,
)
from .specio import dumps, loads, parse_model_spec

__version__ = "0.1.0"

"""Problem definitions: abstract surface plus three desk-scale instances."""

from .advdiff import AdvDiffInversionProblem, build_advdiff_inversion_1d
from .base import (
    DerivativeCheckReport,
    EvalPoint,
    ProblemDefinition,
    ProblemDims,
    ProblemError,
    SetPartition,
    WeightedSpaces,
    check_derivatives,
)
from .diffusion import DiffusionControlProblem, build_diffusion_control_1d
from .logistic import LogisticToyProblem, build_logistic_toy

__all__ = [
    "AdvDiffInversionProblem",
    "DerivativeCheckReport",
    "DiffusionControlProblem",
    "EvalPoint",
    "LogisticToyProblem",
    "ProblemDefinition",
    "ProblemDims",
    "ProblemError",
    "SetPartition",
    "WeightedSpaces",
    "build_advdiff_inversion_1d",
    "build_diffusion_control_1d",
    "build_logistic_toy",
    "check_derivatives",
]

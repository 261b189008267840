"""Data-driven distributionally robust multistage optimization with dual dynamic programming."""

from .approx import Cut, LowerApprox, UpperApprox
from .ddp import DdpConfig, SolveReport, run
from .errors import DrmcoError
from .lp import LinearProgram, LpStatus, solve
from .measures import DiscreteMeasure, radius_hat, wasserstein_discrete
from .model import AmbiguitySpec, ConstraintBlock, Instance, StageModel, UncertaintySet, validate

__all__ = [
    "AmbiguitySpec",
    "ConstraintBlock",
    "Cut",
    "DdpConfig",
    "DiscreteMeasure",
    "DrmcoError",
    "Instance",
    "LinearProgram",
    "LowerApprox",
    "LpStatus",
    "SolveReport",
    "StageModel",
    "UncertaintySet",
    "UpperApprox",
    "radius_hat",
    "run",
    "solve",
    "validate",
    "wasserstein_discrete",
]

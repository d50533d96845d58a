"""Front projected descent methods for box-constrained multiobjective
optimization."""

from frontdescent.descent import (
    FPD,
    FPD_NMT,
    ConstantSigma,
    DriverConfig,
    GeometricSigma,
    InvariantChecker,
    Observer,
    RunTrace,
    StoppingRule,
    run,
)
from frontdescent.hypervolume import ReferenceTracker, hypervolume
from frontdescent.linesearch import ArmijoParams
from frontdescent.pareto import DecisionPoint, FrontSet, filter_nondominated
from frontdescent.problems import BoxBounds, FunctionProblem, Problem, get_problem, list_problems

__all__ = [
    "FPD",
    "FPD_NMT",
    "ArmijoParams",
    "BoxBounds",
    "ConstantSigma",
    "DecisionPoint",
    "DriverConfig",
    "FrontSet",
    "FunctionProblem",
    "GeometricSigma",
    "InvariantChecker",
    "Observer",
    "Problem",
    "ReferenceTracker",
    "RunTrace",
    "StoppingRule",
    "filter_nondominated",
    "get_problem",
    "hypervolume",
    "list_problems",
    "run",
]

__version__ = "0.1.0"

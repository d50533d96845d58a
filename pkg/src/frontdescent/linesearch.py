"""Armijo-type backtracking searches over the grid alpha0 * delta**h.

Three acceptance rules are provided: the classical multiobjective Armijo
condition against the current point, the nonmonotone variant against any
reference point that is no better than the current one, and the exploration
rule that asks the trial point to beat every member of a set in at least one
objective.
"""

from __future__ import annotations

import itertools
import operator
from dataclasses import dataclass

import numpy as np

from frontdescent.pareto import DecisionPoint, FrontSet, rows_all, rows_any
from frontdescent.problems import Problem


class LineSearchError(RuntimeError):
    pass


@dataclass(frozen=True)
class ArmijoParams:
    alpha0: float = 1.0
    delta: float = 0.5
    gamma: float = 1e-4
    max_backtracks: int = 60

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha0 <= 1.0:
            raise ValueError("alpha0 must lie in (0, 1]")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.max_backtracks < 0:
            raise ValueError("max_backtracks must be nonnegative")

    def step(self, h: int) -> float:
        return self.alpha0 * self.delta**h


@dataclass(frozen=True)
class SearchResult:
    """Outcome of one backtracking search.

    Attributes:
        alpha: Accepted step (0.0 when an exploration search gives up).
        trials: Objective evaluations spent, one per tried step.
        point: The accepted trial point with its objective vector, or None.
        reference_id: Id of the reference point that accepted the step
            (nonmonotone search only).
        success: False only for an exploration search that ran out of
            backtracks.
    """

    alpha: float
    trials: int
    point: DecisionPoint | None
    reference_id: int | None = None
    success: bool = True


def _trial(problem: Problem, x: np.ndarray, v: np.ndarray, alpha: float) -> DecisionPoint:
    # x + alpha v is in the box in exact arithmetic; clip away rounding.
    z = problem.bounds.clip(x + alpha * v)
    return DecisionPoint(z, problem.evaluate(z))


def _check_descent(d_value: float) -> None:
    if not d_value < 0.0:
        raise ValueError(f"Armijo search needs a descent direction (D = {d_value})")


def monotone_armijo(
    problem: Problem,
    x: DecisionPoint,
    v: np.ndarray,
    d_value: float,
    params: ArmijoParams = ArmijoParams(),
) -> SearchResult:
    """Largest grid step with F(x + a v) <= F(x) + gamma a D componentwise."""
    _check_descent(d_value)
    for h in range(params.max_backtracks + 1):
        alpha = params.step(h)
        z = _trial(problem, x.x, v, alpha)
        if (z.fx <= x.fx + params.gamma * alpha * d_value).all():
            return SearchResult(alpha, h + 1, z)
    raise LineSearchError(f"no Armijo step after {params.max_backtracks} backtracks")


def eligible_references(x: DecisionPoint, candidates: FrontSet) -> list[DecisionPoint]:
    """Members c with F(x) <= F(c), in set order."""
    if not len(candidates):
        return []
    mask = rows_all(operator.ge, candidates.fx, x.fx)
    return list(itertools.compress(candidates.points, mask.tolist()))


def nonmonotone_armijo(
    problem: Problem,
    x: DecisionPoint,
    v: np.ndarray,
    d_value: float,
    candidates: FrontSet,
    params: ArmijoParams = ArmijoParams(),
) -> SearchResult:
    """Largest grid step accepted by some reference c with F(x) <= F(c):
    F(x + a v) <= F(c) + gamma a D. The reference may differ between steps;
    the first accepting one in set order is reported."""
    _check_descent(d_value)
    refs = eligible_references(x, candidates)
    if not refs:
        raise LineSearchError("no eligible reference point; use monotone_armijo")
    ref_fx = np.vstack([c.fx for c in refs])
    for h in range(params.max_backtracks + 1):
        alpha = params.step(h)
        z = _trial(problem, x.x, v, alpha)
        ok = (z.fx <= ref_fx + params.gamma * alpha * d_value).all(axis=1)
        if ok.any():
            return SearchResult(alpha, h + 1, z, reference_id=refs[int(np.argmax(ok))].id)
    raise LineSearchError(f"no nonmonotone step after {params.max_backtracks} backtracks")


def exploration_search(
    problem: Problem,
    z: DecisionPoint,
    v: np.ndarray,
    current: FrontSet,
    params: ArmijoParams = ArmijoParams(),
) -> SearchResult:
    """Largest grid step whose trial point is strictly better than every
    member of ``current`` in at least one objective."""
    fy = current.fx
    for h in range(params.max_backtracks + 1):
        alpha = params.step(h)
        w = _trial(problem, z.x, v, alpha)
        if not len(current) or rows_any(operator.gt, fy, w.fx).all():
            return SearchResult(alpha, h + 1, w)
    return SearchResult(0.0, params.max_backtracks + 1, None, success=False)

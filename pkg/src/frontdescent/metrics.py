"""Post-run metrics and performance profiles.

Four metrics are computed per (problem, solver) cell: purity against the
union reference front, hypervolume, N_f^m (objective evaluations per
processed point) and alpha^m (mean accepted phase-1 step). Profiles need
"lower is better" costs, so purity and alpha^m are inverted and the
hypervolume becomes V_R - V + 1e-7.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from frontdescent.hypervolume import hypervolume
from frontdescent.pareto import DecisionPoint, FrontSet, filter_nondominated

SENTINEL = 1e12
HV_OFFSET = 1e-7
METRICS = ("purity", "hv", "nf", "alpha")


class MetricError(ValueError):
    pass


@dataclass
class RunSummary:
    """What the metrics need from one finished run."""

    problem: str
    n: int
    solver: str
    fx: np.ndarray
    f_evals: int
    processed: int
    alphas: list[float] = field(default_factory=list)

    @classmethod
    def from_trace(cls, trace, solver: str | None = None) -> "RunSummary":
        label = solver or trace.method
        return cls(trace.problem, trace.n, label, trace.final.fx.copy(),
                   trace.total_f_evals, trace.total_processed, list(trace.alphas))

    @property
    def total_f_evals(self) -> int:
        return self.f_evals

    @property
    def total_processed(self) -> int:
        return self.processed


def _as_front(points) -> FrontSet:
    if isinstance(points, FrontSet):
        return points
    fx = np.atleast_2d(np.asarray(points, dtype=float))
    return FrontSet([DecisionPoint(np.zeros(0), f) for f in fx], fx)


def reference_front(fronts: Iterable) -> FrontSet:
    """Nondominated union of several solver fronts."""
    points: list[DecisionPoint] = []
    for front in fronts:
        points.extend(_as_front(front).points)
    return filter_nondominated(points)


def purity(solver_front, reference) -> float:
    """Fraction of the solver's points whose objective vector is in the
    reference front (exact equality)."""
    front = _as_front(solver_front)
    if not len(front):
        raise MetricError("purity of an empty front is undefined")
    ref = _as_front(reference)
    if not len(ref):
        return 0.0
    hits = (front.fx[:, None, :] == ref.fx[None, :, :]).all(axis=2).any(axis=1)
    return float(hits.mean())


def transform_for_profiles(metric: str, raw: float | None, v_ref: float | None = None) -> float:
    """Map a raw metric to a positive "lower is better" cost.

    Zero (or missing) purity and alpha^m map to ``SENTINEL``.
    """
    if metric in ("purity", "alpha"):
        if raw is None or raw <= 0.0:
            return SENTINEL
        return 1.0 / raw
    if metric == "hv":
        if v_ref is None:
            raise MetricError("the hypervolume transform needs V_R")
        return v_ref - raw + HV_OFFSET
    if metric == "nf":
        return float(raw)
    raise MetricError(f"unknown metric {metric!r}")


def nf_mean(trace) -> float:
    """Objective evaluations per point that passed the domination guard."""
    if trace.total_processed == 0:
        raise MetricError("no processed points; N_f^m is undefined")
    return trace.total_f_evals / trace.total_processed


def alpha_mean(trace) -> float:
    """Mean accepted phase-1 step size."""
    alphas = list(trace.alphas)
    if not alphas:
        raise MetricError("no phase-1 line search was executed")
    return float(np.mean(alphas))


@dataclass
class MetricMatrix:
    problems: list[str]
    solvers: list[str]
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.problems), len(self.solvers)):
            raise MetricError("values must be a problems x solvers array")
        if not (self.values > 0).all():
            raise MetricError("profile costs must be positive")


@dataclass
class Profile:
    """Step functions rho_s(tau), sampled at every ratio that occurs."""

    taus: np.ndarray
    rho: dict[str, np.ndarray]
    ratios: np.ndarray

    def __call__(self, solver: str, tau: float) -> float:
        col = self.ratios[:, list(self.rho).index(solver)]
        return float(np.mean(col <= tau))

    def rows(self) -> list[tuple[str, float, float]]:
        return [(s, float(t), float(r)) for s, curve in self.rho.items()
                for t, r in zip(self.taus, curve)]


def performance_profiles(matrix: MetricMatrix) -> Profile:
    ratios = matrix.values / matrix.values.min(axis=1, keepdims=True)
    taus = np.unique(ratios)
    rho = {s: (ratios[:, j][None, :] <= taus[:, None]).mean(axis=1)
           for j, s in enumerate(matrix.solvers)}
    return Profile(taus, rho, ratios)


@dataclass
class CellMetrics:
    problem: str
    n: int
    solver: str
    purity: float
    hv: float
    hv_transformed: float
    nf_mean: float | None
    alpha_mean: float | None


def _maybe(fn, run) -> float | None:
    try:
        return fn(run)
    except MetricError:
        return None


def instance_metrics(runs: Sequence[RunSummary]) -> list[CellMetrics]:
    """Metrics for every solver on one (problem, n) instance.

    The hypervolume reference point is the componentwise max over all
    solvers' final fronts; V_R is the hypervolume of their nondominated union.
    """
    if len(runs) < 2:
        raise MetricError("a reference front needs at least two solvers")
    fronts = [_as_front(r.fx) for r in runs]
    ref = reference_front(fronts)
    zeta = np.vstack([f.fx for f in fronts]).max(axis=0)
    v_ref = hypervolume(ref, zeta)
    out = []
    for run, front in zip(runs, fronts):
        hv = hypervolume(front, zeta)
        out.append(CellMetrics(run.problem, run.n, run.solver, purity(front, ref), hv,
                               transform_for_profiles("hv", hv, v_ref),
                               _maybe(nf_mean, run), _maybe(alpha_mean, run)))
    return out


def cost_matrix(cells: Sequence[CellMetrics], metric: str,
                solvers: Sequence[str] | None = None) -> MetricMatrix:
    """Profile costs for one metric, one row per (problem, n)."""
    solvers = list(solvers or dict.fromkeys(c.solver for c in cells))
    keys = list(dict.fromkeys((c.problem, c.n) for c in cells))
    lookup: Mapping = {(c.problem, c.n, c.solver): c for c in cells}
    values = np.empty((len(keys), len(solvers)))
    for i, (prob, n) in enumerate(keys):
        for j, s in enumerate(solvers):
            c = lookup.get((prob, n, s))
            if c is None:
                raise MetricError(f"missing cell {prob} n={n} solver={s}")
            if metric == "purity":
                values[i, j] = transform_for_profiles("purity", c.purity)
            elif metric == "hv":
                values[i, j] = c.hv_transformed
            elif metric == "nf":
                values[i, j] = SENTINEL if c.nf_mean is None else c.nf_mean
            elif metric == "alpha":
                values[i, j] = transform_for_profiles("alpha", c.alpha_mean)
            else:
                raise MetricError(f"unknown metric {metric!r}")
    return MetricMatrix([f"{p}:n{n}" for p, n in keys], solvers, values)

"""Front projected descent drivers: monotone FPD and nonmonotone FPD_NMT.

One iteration processes every point of the current set X^k in increasing
order of theta (so the least stationary point goes first):

1. skip x_p if some member of the working set X_hat dominates it;
2. phase 1: step along the common direction v(x_p) when theta(x_p) < -sigma_k,
   insert the result z into X_hat;
3. phase 2: from z, for every proper objective subset I with theta^I(z) < 0,
   take the largest step along v^I(z) that is not dominated by X_hat and
   insert it.

FPD starts X_hat from X^k, uses the monotone Armijo rule and returns X_hat.
FPD_NMT starts X_hat from the reference set C^k, accepts phase-1 steps
against any no-better point of X_hat, and merges X_hat with the
minimum-hypervolume set of a memory window at the end.
"""

from __future__ import annotations

import logging
import operator
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from frontdescent.direction import (
    DEFAULT_SETTINGS,
    SolverSettings,
    point_direction,
    proper_subsets_with_descent,
)
from frontdescent.hypervolume import ReferenceTracker, hypervolume
from frontdescent.linesearch import (
    ArmijoParams,
    LineSearchError,
    eligible_references,
    exploration_search,
    monotone_armijo,
    nonmonotone_armijo,
)
from frontdescent.pareto import (
    DecisionPoint,
    FrontSet,
    crowding_prune,
    filter_nondominated,
    insert_and_filter,
    is_dominated,
    rows_any,
)
from frontdescent.problems import Problem

log = logging.getLogger(__name__)

FPD = "FPD"
FPD_NMT = "FPD_NMT"
METHODS = (FPD, FPD_NMT)
# "hard": X^{k+1} never exceeds the cap. "cover": pruned points come back
# when the next reference set would otherwise lose its cover in X^{k+1}.
PRUNE_MODES = ("hard", "cover")


class InvariantViolation(AssertionError):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ConstantSigma:
    value: float = 1e-4

    def __call__(self, k: int) -> float:
        return self.value


@dataclass(frozen=True)
class GeometricSigma:
    sigma0: float = 1e-2
    rho: float = 0.9

    def __post_init__(self) -> None:
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")

    def __call__(self, k: int) -> float:
        return self.sigma0 * self.rho**k


@dataclass(frozen=True)
class StoppingRule:
    """Stop at ``max_iterations``, after ``time_budget`` seconds, or (constant
    sigma only) once Theta(X^k) >= -sigma held for ``stall_window``
    consecutive iterations. ``stall_window=None`` runs the full budget."""

    max_iterations: int = 200
    time_budget: float | None = None
    stall_window: int | None = 3


@dataclass(frozen=True)
class DriverConfig:
    armijo: ArmijoParams = field(default_factory=ArmijoParams)
    sigma: ConstantSigma | GeometricSigma = field(default_factory=ConstantSigma)
    memory: int = 4
    crowding_cap: int | None = 100
    stop: StoppingRule = field(default_factory=StoppingRule)
    solver: SolverSettings = DEFAULT_SETTINGS
    prune: str = "hard"
    snapshot_every: int | None = None
    check_invariants: bool = False

    def __post_init__(self) -> None:
        if self.prune not in PRUNE_MODES:
            raise ValueError(f"prune must be one of {PRUNE_MODES}")
        if self.memory < 1:
            raise ValueError("memory M must be a positive integer")
        if self.crowding_cap is not None and self.crowding_cap < 2:
            raise ValueError("crowding cap must be at least 2")
        if isinstance(self.sigma, ConstantSigma) and self.sigma.value < 0:
            raise ValueError("sigma must be nonnegative")


# ---------------------------------------------------------------------------
# observation hooks


class Observer:
    """No-op hooks called by the drivers; subclass to inspect a run."""

    def on_point(self, point: DecisionPoint) -> None:
        """A point was inserted into the working set."""

    def on_order(self, k: int, ordered: list[DecisionPoint], thetas: list[float]) -> None:
        """Processing order of X^k with the cached theta values."""

    def on_reference(self, k: int, X: FrontSet, C: FrontSet, X_l: FrontSet,
                     C_prev: FrontSet, zeta: np.ndarray) -> None:
        """Reference set C^k was built (FPD_NMT)."""

    def on_refine(self, k: int, x: DecisionPoint, z: DecisionPoint, X_hat: FrontSet) -> None:
        """Phase 1 finished for x; z has just been inserted into X_hat."""

    def on_iteration_end(self, k: int, X: FrontSet, merged: FrontSet, X_next: FrontSet,
                         refined: list[DecisionPoint]) -> None:
        """``merged`` is X^{k+1} before pruning, ``X_next`` after."""


class InvariantChecker(Observer):
    """Checks the set invariants of the framework as the run proceeds.

    Violations are collected in ``violations``; with ``strict`` the first
    one raises :class:`InvariantViolation`. ``cover=False`` skips the check
    that X^k covers C^k, which hard pruning can break.
    """

    def __init__(self, problem: Problem, strict: bool = True, rtol: float = 1e-12,
                 cover: bool = True) -> None:
        self.problem = problem
        self.strict = strict
        self.rtol = rtol
        self.cover = cover
        self.violations: list[str] = []
        self.checks = 0

    def _fail(self, message: str) -> None:
        self.violations.append(message)
        if self.strict:
            raise InvariantViolation(message)

    def _tol(self, *values: float) -> float:
        return self.rtol * max(1.0, *(abs(v) for v in values))

    def on_point(self, point: DecisionPoint) -> None:
        self.checks += 1
        if not self.problem.bounds.contains(point.x):
            self._fail(f"infeasible point {point.x}")

    def on_order(self, k, ordered, thetas) -> None:
        self.checks += 1
        if thetas and thetas[0] != min(thetas):
            self._fail(f"k={k}: first processed point is not an argmin of theta")

    def on_reference(self, k, X, C, X_l, C_prev, zeta) -> None:
        self.checks += 1
        cfx, xfx = C.fx, X.fx
        if not _mutually_nondominated(cfx):
            self._fail(f"k={k}: C^k is not mutually nondominated")
        le = (xfx[:, None, :] <= cfx[None, :, :]).all(axis=2)  # le[x, c]
        if self.cover and not le.any(axis=0).all():
            self._fail(f"k={k}: some c in C^k is not covered by X^k")
        if not le.any(axis=1).all():
            self._fail(f"k={k}: some x in X^k has no no-better point in C^k")
        v_c = hypervolume(C, zeta)
        v_l = hypervolume(X_l, zeta)
        v_prev = hypervolume(C_prev, zeta)
        if v_c < max(v_l, v_prev) - self._tol(v_c, v_l, v_prev):
            self._fail(f"k={k}: V(C^k)={v_c} < max(V(X^l)={v_l}, V(C^k-1)={v_prev})")

    def on_refine(self, k, x, z, X_hat) -> None:
        self.checks += 1
        if not X_hat.contains_value(z.fx):
            self._fail(f"k={k}: z is not in X_hat after insertion")

    def on_iteration_end(self, k, X, merged, X_next, refined) -> None:
        self.checks += 1
        if not _mutually_nondominated(X_next.fx):
            self._fail(f"k={k}: X^(k+1) is not mutually nondominated")
        for z in refined:
            if not (merged.fx <= z.fx).all(axis=1).any():
                self._fail(f"k={k}: no point of X^(k+1) is no worse than a refined z")
        for p in X_next:
            if not self.problem.bounds.contains(p.x):
                self._fail(f"k={k}: infeasible point in X^(k+1)")


def _mutually_nondominated(fx: np.ndarray) -> bool:
    if fx.shape[0] < 2:
        return True
    le = (fx[:, None, :] <= fx[None, :, :]).all(axis=2)
    np.fill_diagonal(le, False)
    return not le.any()


# ---------------------------------------------------------------------------
# run bookkeeping


@dataclass
class IterationRecord:
    k: int
    size: int
    hv: float
    big_theta: float
    sigma: float
    zeta: list[float]
    hv_reference: float | None = None
    processed: int = 0
    alpha_sum: float = 0.0
    alpha_count: int = 0
    refine_trials: int = 0
    explore_trials: int = 0
    explore_failures: int = 0
    refine_failures: int = 0
    f_evals: int = 0
    j_evals: int = 0
    wall_time: float = 0.0


@dataclass
class RunTrace:
    problem: str
    n: int
    m: int
    method: str
    memory: int | None
    records: list[IterationRecord] = field(default_factory=list)
    snapshots: dict[int, dict[str, np.ndarray]] = field(default_factory=dict)
    final: FrontSet = field(default_factory=FrontSet)
    zeta: np.ndarray | None = None
    stop_reason: str = ""
    alphas: list[float] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return max(len(self.records) - 1, 0)

    @property
    def total_f_evals(self) -> int:
        return self.records[-1].f_evals if self.records else 0

    @property
    def total_processed(self) -> int:
        return sum(r.processed for r in self.records)


@dataclass
class _Work:
    processed: int = 0
    alpha_sum: float = 0.0
    alpha_count: int = 0
    refine_trials: int = 0
    explore_trials: int = 0
    explore_failures: int = 0
    refine_failures: int = 0
    alphas: list[float] = field(default_factory=list)
    refined: list[DecisionPoint] = field(default_factory=list)


@dataclass
class MemoryWindow:
    """Last M+1 iterate sets X^k, ..., X^{k-M}, newest last, plus the
    iteration index of the set picked at the end of the previous iteration."""

    size: int
    recent: deque = field(default_factory=deque)
    prev_argmin: int | None = None

    def push(self, k: int, X: FrontSet) -> None:
        self.recent.append((k, X))
        while len(self.recent) > self.size + 1:
            self.recent.popleft()

    def sets(self, last: int | None = None) -> list[tuple[int, FrontSet]]:
        """Newest-last entries, restricted to the ``last`` most recent."""
        items = list(self.recent)
        return items if last is None else items[-last:]


@dataclass
class ReferenceState:
    current: FrontSet = field(default_factory=FrontSet)
    previous: FrontSet = field(default_factory=FrontSet)


class _Context:
    def __init__(self, problem: Problem, config: DriverConfig, tracker: ReferenceTracker,
                 observers: list[Observer]) -> None:
        self.problem = problem
        self.config = config
        self.tracker = tracker
        self.observers = observers

    def emit(self, hook: str, *args) -> None:
        for obs in self.observers:
            getattr(obs, hook)(*args)

    def insert(self, X_hat: FrontSet, point: DecisionPoint) -> FrontSet:
        self.tracker.update([point.fx])
        self.emit("on_point", point)
        return insert_and_filter(X_hat, point)


# ---------------------------------------------------------------------------
# iteration pieces


def _ordered(X: FrontSet, ctx: _Context, k: int) -> tuple[list[DecisionPoint], float]:
    thetas = [point_direction(p, ctx.problem, ctx.config.solver).theta for p in X]
    order = sorted(range(len(X)), key=lambda i: thetas[i])
    ordered = [X[i] for i in order]
    ctx.emit("on_order", k, ordered, [thetas[i] for i in order])
    return ordered, min(thetas)


def _sweep(X: FrontSet, X_hat: FrontSet, k: int, ctx: _Context, nonmonotone: bool,
           work: _Work) -> FrontSet:
    problem, cfg = ctx.problem, ctx.config
    sigma = cfg.sigma(k)
    ordered, _ = _ordered(X, ctx, k)
    for x in ordered:
        if is_dominated(X_hat, x):
            continue
        work.processed += 1
        out = point_direction(x, problem, cfg.solver)
        if out.theta < -sigma:
            try:
                if nonmonotone and eligible_references(x, X_hat):
                    res = nonmonotone_armijo(problem, x, out.v, out.d_value, X_hat, cfg.armijo)
                else:
                    res = monotone_armijo(problem, x, out.v, out.d_value, cfg.armijo)
            except LineSearchError:
                # Only reachable at a kink of a nonsmooth objective, where the
                # Jacobian misstates a one-sided slope. Keep x and move on.
                work.refine_trials += cfg.armijo.max_backtracks + 1
                work.refine_failures += 1
                log.warning("k=%d: phase-1 search failed at a nonsmooth point; x kept", k)
                z = x
            else:
                z = res.point
                work.refine_trials += res.trials
                work.alpha_sum += res.alpha
                work.alpha_count += 1
                work.alphas.append(res.alpha)
        else:
            z = x
        X_hat = ctx.insert(X_hat, z)
        work.refined.append(z)
        ctx.emit("on_refine", k, x, z, X_hat)

        if problem.m < 2:
            continue
        if z.jac is None:
            z.jac = problem.jacobian(z.x)
        for _, partial in proper_subsets_with_descent(z, z.jac, problem.bounds, cfg.solver):
            if not X_hat.contains_value(z.fx):
                break
            res = exploration_search(problem, z, partial.v, X_hat, cfg.armijo)
            work.explore_trials += res.trials
            if not res.success:
                work.explore_failures += 1
                log.debug("k=%d: exploration search gave up", k)
                continue
            X_hat = ctx.insert(X_hat, res.point)
    return X_hat


def fpd_iteration(X: FrontSet, k: int, ctx: _Context, work: _Work) -> FrontSet:
    """One monotone FPD iteration; returns X^{k+1} before pruning."""
    return _sweep(X, X, k, ctx, nonmonotone=False, work=work)


def build_reference_set(X: FrontSet, window: MemoryWindow, refstate: ReferenceState,
                        zeta: np.ndarray) -> tuple[FrontSet, int, FrontSet]:
    """Build C^k from the minimum-hypervolume window set and C^{k-1}.

    Returns C^k, the iteration index l(k) and the set X^{l(k)}. Ties in the
    hypervolume prefer the set carried over from the previous iteration,
    then the oldest one.
    """
    entries = window.sets()
    values = [hypervolume(S, zeta) for _, S in entries]
    low = min(values)
    ties = [i for i, v in enumerate(values) if v == low]
    pick = next((i for i in ties if entries[i][0] == window.prev_argmin), ties[0])
    l_k, X_l = entries[pick]
    C_bar = filter_nondominated(list(X_l) + list(refstate.current))
    cfx = C_bar.fx
    extra = [x for x in X if len(C_bar) and rows_any(operator.lt, cfx, x.fx).all()]
    return FrontSet(C_bar.points + extra), l_k, X_l


def fpd_nmt_iteration(X: FrontSet, k: int, ctx: _Context, work: _Work, window: MemoryWindow,
                      refstate: ReferenceState) -> tuple[FrontSet, FrontSet, FrontSet | None]:
    """One FPD_NMT iteration.

    Returns X^{k+1} before pruning, C^k and the picked window set X_bar
    (None when the working set itself was picked). The identity of the
    pick is stored in ``window`` so the next reference set reuses it.
    """
    zeta = ctx.tracker.frozen()
    C, _, X_l = build_reference_set(X, window, refstate, zeta)
    ctx.emit("on_reference", k, X, C, X_l, refstate.current, zeta)
    refstate.previous, refstate.current = refstate.current, C

    X_hat = _sweep(X, C, k, ctx, nonmonotone=True, work=work)

    zeta = ctx.tracker.frozen()
    entries: list[tuple[object, FrontSet]] = [("hat", X_hat)]
    entries += list(reversed(window.sets(last=ctx.config.memory)))
    values = [hypervolume(S, zeta) for _, S in entries]
    low = min(values)
    ties = [i for i, v in enumerate(values) if v == low]
    pick = next((i for i in ties if entries[i][0] == window.prev_argmin), ties[-1])
    tag, X_bar = entries[pick]
    window.prev_argmin = k + 1 if tag == "hat" else tag
    merged = filter_nondominated(list(X_hat) + list(X_bar))
    return merged, C, None if tag == "hat" else X_bar


def prune_keeping_cover(merged: FrontSet, cap: int, obligations: FrontSet) -> FrontSet:
    """Crowding-prune ``merged`` to ``cap`` points, then restore removed
    points until every obligation point has a no-worse member again."""
    pruned = crowding_prune(merged, cap)
    if len(pruned) == len(merged) or not len(obligations):
        return pruned
    kept_ids = {p.id for p in pruned}
    removed = [p for p in merged if p.id not in kept_ids]
    ofx = obligations.fx
    covered = (pruned.fx[:, None, :] <= ofx[None, :, :]).all(axis=2).any(axis=0)
    rfx = np.vstack([p.fx for p in removed])
    cover = (rfx[:, None, :] <= ofx[None, :, :]).all(axis=2)  # cover[r, o]
    gains = cover[:, ~covered].sum(axis=1)
    while not covered.all():
        r = int(np.argmax(gains))
        if gains[r] == 0:
            break
        kept_ids.add(removed[r].id)
        newly = cover[r] & ~covered
        gains -= cover[:, newly].sum(axis=1)
        covered |= newly
    return FrontSet([p for p in merged if p.id in kept_ids])


# ---------------------------------------------------------------------------
# driver


def initial_front(problem: Problem, points: Iterable[np.ndarray] | None = None) -> FrontSet:
    pts = problem.initial_points() if points is None else list(points)
    evaluated = [DecisionPoint(np.asarray(x, float), problem.evaluate(np.asarray(x, float)))
                 for x in pts]
    return filter_nondominated(evaluated)


def run(
    problem: Problem,
    config: DriverConfig = DriverConfig(),
    method: str = FPD_NMT,
    initial_points: Iterable[np.ndarray] | None = None,
    observers: Iterable[Observer] = (),
) -> RunTrace:
    """Run FPD or FPD_NMT on ``problem`` until the stopping rule fires."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    nonmonotone = method == FPD_NMT
    observers = list(observers)
    if config.check_invariants:
        cover = config.prune == "cover" or config.crowding_cap is None
        observers.append(InvariantChecker(problem, cover=cover))
    problem.counter.reset()
    start = time.perf_counter()

    tracker = ReferenceTracker()
    ctx = _Context(problem, config, tracker, observers)
    X = initial_front(problem, initial_points)
    tracker.update(p.fx for p in X)
    for p in X:
        ctx.emit("on_point", p)

    window = MemoryWindow(config.memory)
    refstate = ReferenceState()
    trace = RunTrace(problem.name, problem.n, problem.m, method,
                     config.memory if nonmonotone else None)
    snap_every = config.snapshot_every
    if snap_every is None:
        snap_every = 1 if problem.n <= 10 else 10
    stall = 0
    k = 0
    while True:
        if nonmonotone:
            window.push(k, X)
        theta_min = min(point_direction(p, problem, config.solver).theta for p in X)
        sigma = config.sigma(k)
        zeta = tracker.frozen()
        record = IterationRecord(
            k=k, size=len(X), hv=hypervolume(X, zeta), big_theta=theta_min,
            sigma=sigma, zeta=[float(z) for z in zeta],
            f_evals=problem.counter.objective_evals,
            j_evals=problem.counter.jacobian_evals,
            wall_time=time.perf_counter() - start,
        )
        trace.records.append(record)
        if snap_every and k % snap_every == 0:
            trace.snapshots[k] = {"X": X.fx.copy(), "X_x": np.vstack([p.x for p in X])}

        if isinstance(config.sigma, ConstantSigma) and theta_min >= -sigma:
            stall += 1
        else:
            stall = 0
        if k >= config.stop.max_iterations:
            trace.stop_reason = "max_iterations"
            break
        if config.stop.time_budget is not None and record.wall_time >= config.stop.time_budget:
            trace.stop_reason = "time_budget"
            break
        window_len = config.stop.stall_window
        if isinstance(config.sigma, ConstantSigma) and window_len is not None and stall >= window_len:
            trace.stop_reason = "stationary"
            break

        work = _Work()
        if nonmonotone:
            merged, C, X_bar = fpd_nmt_iteration(X, k, ctx, work, window, refstate)
            record.hv_reference = hypervolume(C, zeta)
            if k in trace.snapshots:
                trace.snapshots[k]["C"] = C.fx.copy()
            # The next reference set must stay covered by X^{k+1}. When X_hat
            # was picked, X^{k+1} is picked next and covers itself.
            obligations = filter_nondominated(list(C) + list(X_bar or ()))
        else:
            merged = fpd_iteration(X, k, ctx, work)
            obligations = FrontSet()
        X_next = merged
        if config.crowding_cap is not None and len(merged) > config.crowding_cap:
            if config.prune == "cover":
                X_next = prune_keeping_cover(merged, config.crowding_cap, obligations)
            else:
                X_next = crowding_prune(merged, config.crowding_cap)
        ctx.emit("on_iteration_end", k, X, merged, X_next, work.refined)

        record.processed = work.processed
        record.alpha_sum = work.alpha_sum
        record.alpha_count = work.alpha_count
        record.refine_trials = work.refine_trials
        record.explore_trials = work.explore_trials
        record.explore_failures = work.explore_failures
        record.refine_failures = work.refine_failures
        trace.alphas.extend(work.alphas)
        X = X_next
        k += 1

    trace.final = X
    trace.zeta = tracker.frozen()
    return trace

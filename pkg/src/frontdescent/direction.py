"""Projected common and partial descent directions.

For a point x, Jacobian J (rows are objective gradients) and box [l, u],
the direction subproblem is

    min_d  max_{j in I} g_j . d + 0.5 ||d||^2   s.t.  l <= x + d <= u.

It is solved through its dual over the unit simplex,

    max_lam  q(lam) = lam . J d(lam) + 0.5 ||d(lam)||^2,
    d(lam)  = clip(-J^T lam, l - x, u - x),

One objective has a closed form and two objectives reduce to a
piecewise-linear root search in lam. Three or more go to a primal
active-set method on the epigraph form, which is exact up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from frontdescent.pareto import DecisionPoint, FrontSet
from frontdescent.problems import BoxBounds, Problem


class DirectionSolverError(RuntimeError):
    """The active-set method hit its iteration limit."""


@dataclass(frozen=True)
class SolverSettings:
    """``dual_tolerance``: a subproblem value above ``-dual_tolerance`` counts
    as no descent. ``max_iters``: active-set iteration cap, ``None`` picks
    ``10 (m + n) + 50``."""

    dual_tolerance: float = 1e-8
    max_iters: int | None = None

    def __post_init__(self) -> None:
        if not self.dual_tolerance > 0:
            raise ValueError("dual_tolerance must be positive")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be positive")


@dataclass(frozen=True)
class DirectionOutcome:
    """Solution of a direction subproblem.

    Attributes:
        v: The minimizing step d (x + v lies in the box).
        theta: Optimal value, always <= 0.
        d_value: D(x, v) = max over all objectives of g_j . v.
        subset: Objective indices the subproblem was restricted to.
    """

    v: np.ndarray
    theta: float
    d_value: float
    subset: tuple[int, ...]


DEFAULT_SETTINGS = SolverSettings()


def _step_box(x: np.ndarray, bounds: BoxBounds) -> tuple[np.ndarray, np.ndarray]:
    lo = bounds.lower - x
    hi = bounds.upper - x
    # Shrink by an ulp where x + hi rounds past the face. Rounding is
    # monotone, so every step inside [lo, hi] then lands inside the box.
    with np.errstate(invalid="ignore"):
        while (over := x + hi > bounds.upper).any():
            hi[over] = np.nextafter(hi[over], -np.inf)
        while (under := x + lo < bounds.lower).any():
            lo[under] = np.nextafter(lo[under], np.inf)
    # x on a face: the difference is an exact zero already; keep the sign clean
    return np.minimum(lo, 0.0), np.maximum(hi, 0.0)


def _clip(w: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.minimum(np.maximum(-w, lo), hi)


def _solve_single(g: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return _clip(g, lo, hi)


def _solve_pair(a: np.ndarray, b: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    # lam weights a, (1 - lam) weights b; q'(lam) = (a - b) . d(lam) is
    # nonincreasing and piecewise linear with kinks where components clip.
    c = a - b

    def slope(lam: float) -> float:
        return float(c @ _clip(b + lam * c, lo, hi))

    s0 = slope(0.0)
    if s0 <= 0.0:
        return _clip(b, lo, hi)
    s1 = slope(1.0)
    if s1 >= 0.0:
        return _clip(a, lo, hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        kinks = np.concatenate([(-b - lo) / c, (-b - hi) / c])
    kinks = kinks[np.isfinite(kinks) & (kinks > 0.0) & (kinks < 1.0)]
    kinks = np.unique(kinks)
    left, s_left = 0.0, s0
    right, s_right = 1.0, s1
    # bisection over the sorted kinks to find the linear piece holding the root
    lo_i, hi_i = 0, kinks.size - 1
    while lo_i <= hi_i:
        mid = (lo_i + hi_i) // 2
        s_mid = slope(kinks[mid])
        if s_mid > 0.0:
            left, s_left = kinks[mid], s_mid
            lo_i = mid + 1
        elif s_mid < 0.0:
            right, s_right = kinks[mid], s_mid
            hi_i = mid - 1
        else:
            return _clip(b + kinks[mid] * c, lo, hi)
    lam = left + s_left * (right - left) / (s_left - s_right)
    return _clip(b + lam * c, lo, hi)


def _solve_general(J: np.ndarray, lo: np.ndarray, hi: np.ndarray, settings: SolverSettings) -> np.ndarray:
    """Primal active-set method on  min t + |d|^2 / 2  s.t.  J d <= t, lo <= d <= hi.

    The working set holds objective rows S and coordinates fixed at a bound.
    Fixed coordinates are eliminated, so each step solves a (|S|+1)-square
    KKT system. The row multipliers sum to one, so S never empties and the
    reduced Hessian stays positive definite.
    """
    m, n = J.shape
    pinned = lo >= hi
    d = np.zeros(n)
    Jd = np.zeros(m)
    t = 0.0
    rows = [0]
    side = np.zeros(n, dtype=int)  # +1 fixed at hi, -1 fixed at lo
    limit = settings.max_iters or 10 * (m + n) + 50
    at_min = False
    for _ in range(limit):
        free = (side == 0) & ~pinned
        JS = J[np.ix_(rows, free)]
        k = len(rows)
        K = np.zeros((k + 1, k + 1))
        K[:k, :k] = JS @ JS.T
        K[:k, k] = 1.0
        K[k, :k] = 1.0
        rhs = np.append(-(JS @ d[free]), 1.0)
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        mu, pt = sol[:k], float(sol[k])
        p = np.zeros(n)
        p[free] = -d[free] - JS.T @ mu
        # p is formed by cancellation, so judge it against the terms involved
        noise = 1e-12 * (1.0 + np.abs(d).max() + (np.abs(JS).T @ np.abs(mu)).max(initial=0.0))
        if at_min or np.abs(p).max(initial=0.0) <= noise:
            at_min = False
            g = d + J[rows].T @ mu
            nu = np.where(side == 1, -g, np.where(side == -1, g, np.inf))
            i_mu, i_nu = int(np.argmin(mu)), int(np.argmin(nu))
            tol = 1e-12 * (1.0 + np.abs(J).max() * (1.0 + np.abs(d).max()))
            if min(mu[i_mu], nu[i_nu]) >= -tol:
                return d
            if mu[i_mu] <= nu[i_nu]:
                rows.pop(i_mu)
            else:
                side[i_nu] = 0
            continue
        # ratio test; a row dependent on the working set has zero rate up to rounding
        alpha, block = 1.0, None
        Jp = J @ p
        p_size = np.abs(p).sum()
        for j in range(m):
            rate = Jp[j] - pt
            if j not in rows and rate > 1e-12 * (np.abs(J[j]).max() * p_size + abs(pt)):
                step = (t - Jd[j]) / rate
                if step < alpha:
                    alpha, block = max(step, 0.0), (0, j)
        for sign, bound, moving in ((1, hi, free & (p > 0)), (-1, lo, free & (p < 0))):
            if moving.any():
                steps = (bound[moving] - d[moving]) / p[moving]
                i = int(np.argmin(steps))
                if steps[i] < alpha:
                    alpha, block = max(float(steps[i]), 0.0), (sign, int(np.flatnonzero(moving)[i]))
        d = d + alpha * p
        t += alpha * pt
        at_min = block is None
        if block is not None:
            sign, i = block
            if sign == 0:
                rows.append(i)
            else:
                side[i] = sign
                d[i] = hi[i] if sign == 1 else lo[i]
        d = np.minimum(np.maximum(d, lo), hi)
        Jd = J @ d
    raise DirectionSolverError(f"active-set method did not finish in {limit} iterations")


def _solve(J: np.ndarray, lo: np.ndarray, hi: np.ndarray, settings: SolverSettings) -> np.ndarray:
    m = J.shape[0]
    if m == 1:
        return _solve_single(J[0], lo, hi)
    if m == 2:
        return _solve_pair(J[0], J[1], lo, hi)
    return _solve_general(J, lo, hi, settings)


def _outcome(J_full: np.ndarray, rows: Sequence[int], v: np.ndarray) -> DirectionOutcome:
    Jv = J_full @ v
    value = float(Jv[list(rows)].max() + 0.5 * v @ v)
    if value >= 0.0:
        # d = 0 is feasible with value 0, so it is at least as good as an
        # inexact dual answer left with a tiny positive value
        v = np.zeros_like(v)
        return DirectionOutcome(v=v, theta=0.0, d_value=0.0, subset=tuple(rows))
    return DirectionOutcome(v=v, theta=min(value, 0.0), d_value=float(Jv.max()), subset=tuple(rows))


def common_direction(
    x: np.ndarray | DecisionPoint,
    jac: np.ndarray,
    bounds: BoxBounds,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> DirectionOutcome:
    """Projected common descent direction v(x) and its value theta(x)."""
    return partial_direction(x, jac, range(np.shape(jac)[0]), bounds, settings)


def partial_direction(
    x: np.ndarray | DecisionPoint,
    jac: np.ndarray,
    subset: Sequence[int],
    bounds: BoxBounds,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> DirectionOutcome:
    """Projected partial descent direction for the objectives in ``subset``.

    ``d_value`` is always measured over all objectives.
    """
    if isinstance(x, DecisionPoint):
        x = x.x
    rows = sorted(set(int(i) for i in subset))
    if not rows:
        raise ValueError("objective subset must be nonempty")
    J = np.asarray(jac, dtype=float)
    if rows[0] < 0 or rows[-1] >= J.shape[0]:
        raise ValueError(f"subset {rows} out of range for {J.shape[0]} objectives")
    lo, hi = _step_box(np.asarray(x, dtype=float), bounds)
    v = _solve(J[rows], lo, hi, settings)
    return _outcome(J, rows, v)


def proper_subsets(m: int) -> list[tuple[int, ...]]:
    """Nonempty proper subsets of range(m), ordered by bitmask."""
    return [
        tuple(i for i in range(m) if mask >> i & 1) for mask in range(1, (1 << m) - 1)
    ]


def proper_subsets_with_descent(
    z: np.ndarray | DecisionPoint,
    jac: np.ndarray,
    bounds: BoxBounds,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> list[tuple[tuple[int, ...], DirectionOutcome]]:
    """All proper objective subsets I with theta^I(z) < -dual_tolerance."""
    m = np.shape(jac)[0]
    if m > 8:
        raise ValueError("subset enumeration is limited to m <= 8")
    found = []
    for subset in proper_subsets(m):
        out = partial_direction(z, jac, subset, bounds, settings)
        if out.theta < -settings.dual_tolerance:
            found.append((subset, out))
    return found


def point_direction(
    point: DecisionPoint, problem: Problem, settings: SolverSettings = DEFAULT_SETTINGS
) -> DirectionOutcome:
    """Common direction at ``point``, computed once and cached on the point."""
    if point.direction is None:
        if point.jac is None:
            point.jac = problem.jacobian(point.x)
        point.direction = common_direction(point.x, point.jac, problem.bounds, settings)
    return point.direction


def big_theta(
    front: FrontSet | Sequence[DecisionPoint],
    problem: Problem,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> tuple[float, DecisionPoint]:
    """Theta(X) = min over X of theta(x), with the first minimizing point."""
    points = list(front)
    if not points:
        raise ValueError("big_theta of an empty set")
    thetas = [point_direction(p, problem, settings).theta for p in points]
    i = int(np.argmin(thetas))
    return thetas[i], points[i]

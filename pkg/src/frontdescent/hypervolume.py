"""Exact hypervolume of the region dominated by a point set and bounded by
a reference point, for one, two or three objectives."""

from __future__ import annotations

import bisect
import math
from typing import Iterable

import numpy as np

from frontdescent.pareto import DecisionPoint, FrontSet


class ReferenceTracker:
    """Running componentwise maximum of every objective vector fed to it."""

    def __init__(self, zeta: np.ndarray | None = None) -> None:
        self.zeta = None if zeta is None else np.array(zeta, dtype=float)

    def __repr__(self) -> str:
        return f"ReferenceTracker(zeta={self.zeta})"

    def update(self, points: Iterable[np.ndarray]) -> "ReferenceTracker":
        for f in points:
            f = np.asarray(f, dtype=float)
            self.zeta = f.copy() if self.zeta is None else np.maximum(self.zeta, f)
        return self

    def frozen(self) -> np.ndarray:
        if self.zeta is None:
            raise ValueError("reference point is undefined before any update")
        return self.zeta.copy()


def update_reference(tracker: ReferenceTracker, new_points: Iterable[np.ndarray]) -> ReferenceTracker:
    return tracker.update(new_points)


def _as_array(front) -> np.ndarray:
    if isinstance(front, FrontSet):
        return front.fx if len(front) else np.zeros((0, 0))
    pts = list(front)
    if not pts:
        return np.zeros((0, 0))
    if isinstance(pts[0], DecisionPoint):
        return np.vstack([p.fx for p in pts])
    return np.atleast_2d(np.asarray(pts, dtype=float))


def _staircase_area(xs, ys, r0: float, r1: float) -> float:
    """Area dominated by a 2-D staircase (f1 ascending, f2 strictly
    descending), summed in horizontal slabs with exact rounding."""
    if not len(xs):
        return 0.0
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    ceiling = np.empty_like(y)
    ceiling[0] = r1
    ceiling[1:] = y[:-1]
    return math.fsum(((r0 - x) * (ceiling - y)).tolist())


def _hv2(pts: np.ndarray, ref: np.ndarray) -> float:
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    f = pts[order]
    best = np.minimum.accumulate(f[:, 1])
    step = np.empty(len(f), dtype=bool)
    step[0] = f[0, 1] < ref[1]
    step[1:] = f[1:, 1] < best[:-1]
    return _staircase_area(f[step, 0], f[step, 1], ref[0], ref[1])


def _hv3(pts: np.ndarray, ref: np.ndarray) -> float:
    # sweep f3 upwards, growing the 2-D staircase of the points seen so far
    order = np.argsort(pts[:, 2], kind="stable")
    z = pts[order, 2].tolist() + [float(ref[2])]
    rows = pts[order, :2].tolist()
    r0, r1 = float(ref[0]), float(ref[1])
    xs: list[float] = []
    ys: list[float] = []
    area = 0.0
    volume = 0.0
    for i, (a, b) in enumerate(rows):
        last = bisect.bisect_right(xs, a) - 1
        if b < r1 and not (last >= 0 and ys[last] <= b):
            pos = bisect.bisect_left(xs, a)
            end = pos
            while end < len(ys) and ys[end] >= b:
                end += 1
            xs[pos:end] = [a]
            ys[pos:end] = [b]
            area = _staircase_area(xs, ys, r0, r1)
        height = z[i + 1] - z[i]
        if height > 0:
            volume += height * area
    return volume


def hypervolume(front, zeta: np.ndarray) -> float:
    """Lebesgue measure of {y : some point p has p <= y <= zeta}.

    ``front`` may be a FrontSet, a list of DecisionPoints or an array of
    objective vectors. Points exceeding ``zeta`` in any component add
    nothing.
    """
    ref = np.asarray(zeta, dtype=float)
    m = ref.shape[0]
    if m > 3:
        raise ValueError("exact hypervolume is implemented for m <= 3 only")
    pts = _as_array(front)
    if pts.size == 0:
        return 0.0
    if pts.shape[1] != m:
        raise ValueError(f"points have {pts.shape[1]} objectives, reference has {m}")
    pts = pts[np.all(pts <= ref, axis=1)]
    if pts.shape[0] == 0:
        return 0.0
    if m == 1:
        return float(ref[0] - pts[:, 0].min())
    if m == 2:
        return float(_hv2(pts, ref))
    return float(_hv3(pts, ref))


def replacement_gain_bound(
    front: FrontSet, replaced: DecisionPoint, mu: DecisionPoint, zeta: np.ndarray
) -> float:
    """Lower bound prod_j (f_j(replaced) - f_j(mu)) on the hypervolume gained
    by swapping ``replaced`` for a point ``mu`` that strictly improves it."""
    zeta = np.asarray(zeta, dtype=float)
    if not np.all(mu.fx < replaced.fx):
        raise ValueError("mu must be strictly better than the replaced point in every objective")
    if not any(p is replaced for p in front):
        raise ValueError("replaced point is not a member of the front")
    fx = front.fx
    le = np.all(fx[:, None, :] <= fx[None, :, :], axis=2)
    np.fill_diagonal(le, False)
    if le.any():
        raise ValueError("front is not a stable set")
    # only the replaced point must sit below zeta for the bound to hold
    if not np.all(replaced.fx <= zeta):
        raise ValueError("the replaced point must lie below the reference point")
    return float(np.prod(replaced.fx - mu.fx))

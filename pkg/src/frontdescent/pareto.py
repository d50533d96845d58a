"""Pareto ordering, nondominated filtering and crowding-distance pruning."""

from __future__ import annotations

import enum
import heapq
import itertools
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Sequence

import operator

import numpy as np

_ids = itertools.count()


def rows_all(op, fy: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Row mask of ``op(fy[:, j], f[j])`` holding in every column.

    Column by column is several times faster than ``.all(axis=1)`` when
    rows have only two or three entries.
    """
    out = op(fy[:, 0], f[0])
    for j in range(1, fy.shape[1]):
        out &= op(fy[:, j], f[j])
    return out


def rows_any(op, fy: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Row mask of ``op(fy[:, j], f[j])`` holding in some column."""
    out = op(fy[:, 0], f[0])
    for j in range(1, fy.shape[1]):
        out |= op(fy[:, j], f[j])
    return out


@dataclass(eq=False)
class DecisionPoint:
    """A feasible decision vector with its cached objective vector.

    ``jac`` and ``direction`` are lazily filled caches (Jacobian and common
    descent direction at ``x``); they depend only on ``x``.
    """

    x: np.ndarray
    fx: np.ndarray
    id: int = field(default_factory=lambda: next(_ids))
    jac: np.ndarray | None = field(default=None, repr=False)
    direction: Any = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)
        self.fx = np.asarray(self.fx, dtype=float)


class Relation(enum.Enum):
    """How objective vector ``a`` relates to ``b`` under the Pareto order."""

    STRICTLY_LESS = "<"  # a < b componentwise (implies a dominates b)
    DOMINATES = "<="  # a <= b, a != b, not strictly in every component
    EQUAL = "=="
    DOMINATED = ">="  # b dominates a
    INCOMPARABLE = "||"

    @property
    def leq(self) -> bool:
        return self in (Relation.STRICTLY_LESS, Relation.DOMINATES, Relation.EQUAL)

    @property
    def lneq(self) -> bool:
        return self in (Relation.STRICTLY_LESS, Relation.DOMINATES)

    @property
    def lt(self) -> bool:
        return self is Relation.STRICTLY_LESS


def compare(a: np.ndarray, b: np.ndarray) -> Relation:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"cannot compare vectors of shapes {a.shape} and {b.shape}")
    if np.array_equal(a, b):
        return Relation.EQUAL
    if (a < b).all():
        return Relation.STRICTLY_LESS
    if (a <= b).all():
        return Relation.DOMINATES
    if (b <= a).all():
        return Relation.DOMINATED
    return Relation.INCOMPARABLE


def leq(a: np.ndarray, b: np.ndarray) -> bool:
    return bool((np.asarray(a) <= np.asarray(b)).all())


def dominates(a: np.ndarray, b: np.ndarray) -> bool:
    """a ⪇ b: a <= b componentwise and a != b."""
    a, b = np.asarray(a), np.asarray(b)
    return bool((a <= b).all() and (a < b).any())


class FrontSet:
    """An ordered collection of mutually nondominated points.

    The class does not re-check nondominance on construction; use
    :func:`filter_nondominated` to build one from arbitrary points.
    """

    __slots__ = ("points", "_fx")

    def __init__(self, points: Iterable[DecisionPoint] = (), fx: np.ndarray | None = None) -> None:
        self.points: list[DecisionPoint] = list(points)
        # ``fx`` lets callers hand over an already stacked objective array.
        self._fx: np.ndarray | None = fx

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[DecisionPoint]:
        return iter(self.points)

    def __getitem__(self, i: int) -> DecisionPoint:
        return self.points[i]

    def __repr__(self) -> str:
        return f"FrontSet({len(self.points)} points)"

    @property
    def fx(self) -> np.ndarray:
        """Objective vectors stacked as a (len, m) array."""
        if self._fx is None:
            if self.points:
                self._fx = np.vstack([p.fx for p in self.points])
            else:
                self._fx = np.zeros((0, 0))
        return self._fx

    @property
    def ids(self) -> list[int]:
        return [p.id for p in self.points]

    def contains_value(self, fx: np.ndarray) -> bool:
        """True if some member has exactly the objective vector ``fx``."""
        if not self.points:
            return False
        return bool(rows_all(operator.eq, self.fx, fx).any())

    def find_value(self, fx: np.ndarray) -> DecisionPoint | None:
        for p in self.points:
            if np.array_equal(p.fx, fx):
                return p
        return None


def is_dominated(front: FrontSet | Sequence[DecisionPoint], x: DecisionPoint) -> bool:
    """True iff some y in ``front`` has F(y) ⪇ F(x)."""
    if not isinstance(front, FrontSet):
        front = FrontSet(front)
    if not len(front):
        return False
    fy = front.fx
    return bool((rows_all(operator.le, fy, x.fx) & rows_any(operator.lt, fy, x.fx)).any())


def filter_nondominated(points: Iterable[DecisionPoint]) -> FrontSet:
    """Keep the points not dominated by any other; equal vectors keep the
    earliest id."""
    pts = list(points)
    if not pts:
        return FrontSet()
    fx = np.vstack([p.fx for p in pts])
    ids = np.array([p.id for p in pts])
    pos = np.arange(len(pts))
    if fx.shape[1] == 2:
        keep = _sweep_2d(fx, ids, pos)
    else:
        keep = _pairwise_keep(fx, ids, pos)
    return FrontSet([p for p, k in zip(pts, keep) if k], fx[keep])


def _pairwise_keep(fx: np.ndarray, ids: np.ndarray, pos: np.ndarray) -> np.ndarray:
    # le[i, j]: fx_i <= fx_j componentwise
    le = (fx[:, None, :] <= fx[None, :, :]).all(axis=2)
    equal = le & le.T
    dominated = (le & ~equal).any(axis=0)
    # among equal vectors only the smallest id survives; a point listed
    # twice keeps its first position
    earlier = (ids[None, :] < ids[:, None]) | ((ids[None, :] == ids[:, None]) & (pos[None, :] < pos[:, None]))
    shadowed = (equal & earlier).any(axis=1)
    return ~dominated & ~shadowed


def _sweep_2d(fx: np.ndarray, ids: np.ndarray, pos: np.ndarray) -> np.ndarray:
    # Sorted by (f1, f2, id, position), a point survives iff its f2 is
    # strictly below every f2 seen before it.
    order = np.lexsort((pos, ids, fx[:, 1], fx[:, 0]))
    f2 = fx[order, 1]
    best = np.minimum.accumulate(f2)
    survive = np.ones(len(order), dtype=bool)
    survive[1:] = f2[1:] < best[:-1]
    keep = np.zeros(len(order), dtype=bool)
    keep[order] = survive
    return keep


def insert_and_filter(front: FrontSet, z: DecisionPoint) -> FrontSet:
    """Add ``z`` and drop every member it dominates.

    If a member already has F(z), the set is returned unchanged. The caller
    is responsible for ``z`` not being dominated (true at every insertion
    site of the descent drivers).
    """
    if not len(front):
        return FrontSet([z])
    fy = front.fx
    no_worse = rows_all(operator.ge, fy, z.fx)
    if not no_worse.any():
        return FrontSet(front.points + [z], np.concatenate([fy, z.fx[None, :]]))
    if rows_all(operator.eq, fy[no_worse], z.fx).any():
        return front
    # no member equals F(z), so every no-worse member is dominated by z
    keep = ~no_worse
    kept = list(itertools.compress(front.points, keep.tolist()))
    kept.append(z)
    return FrontSet(kept, np.concatenate([fy[keep], z.fx[None, :]]))


def crowding_distance(fx: np.ndarray) -> np.ndarray:
    """NSGA-II crowding distance; boundary points get ``inf``."""
    count, m = fx.shape
    dist = np.zeros(count)
    if count <= 2:
        dist[:] = np.inf
        return dist
    for j in range(m):
        order = np.argsort(fx[:, j], kind="stable")
        col = fx[order, j]
        span = col[-1] - col[0]
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        if span > 0:
            dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


def crowding_prune(front: FrontSet, cap: int) -> FrontSet:
    """Reduce ``front`` to ``cap`` points by repeatedly dropping the most
    crowded one, with distances recomputed after every removal.

    Per-objective extremes have infinite distance and always survive. Ties
    drop the earliest point in set order. Only the neighbours of a removed
    point change their distance, so the removal loop updates those alone
    and gives the same result as recomputing from scratch.
    """
    if cap < 2:
        raise ValueError("crowding cap must be at least 2")
    if len(front) <= cap:
        return front
    fx = front.fx
    alive = np.ones(len(front), dtype=bool)
    while True:
        idx = np.flatnonzero(alive)
        removed = _prune_until_extreme(fx[idx], cap)
        alive[idx[removed]] = False
        if alive.sum() <= cap:
            break
    return FrontSet([p for p, a in zip(front.points, alive) if a], fx[alive])


def _prune_until_extreme(fx: np.ndarray, cap: int) -> list[int]:
    """Remove points (positions into ``fx``) by crowding order until the set
    has ``cap`` points or an extreme point is removed, after which spans
    change and the caller restarts from fresh distances."""
    count, m = fx.shape
    orders = [np.argsort(fx[:, j], kind="stable") for j in range(m)]
    prev = np.full((m, count), -1)
    nxt = np.full((m, count), -1)
    spans = np.empty(m)
    for j, order in enumerate(orders):
        prev[j, order[1:]] = order[:-1]
        nxt[j, order[:-1]] = order[1:]
        spans[j] = fx[order[-1], j] - fx[order[0], j]
    ends = {int(o[0]) for o in orders} | {int(o[-1]) for o in orders}
    current = crowding_distance(fx).tolist()
    # plain lists: scalar access to numpy arrays dominates this loop otherwise
    cols = [fx[:, j].tolist() for j in range(m)]
    prev_l, nxt_l, span_l = prev.tolist(), nxt.tolist(), spans.tolist()
    contrib = [[0.0] * count for _ in range(m)]
    for j in range(m):
        p, q, col, span = prev_l[j], nxt_l[j], cols[j], span_l[j]
        if span > 0:
            cj = contrib[j]
            for t in range(count):
                if p[t] >= 0 and q[t] >= 0:
                    cj[t] = (col[q[t]] - col[p[t]]) / span
    heap = [(d, i) for i, d in enumerate(current)]
    heapq.heapify(heap)
    dead = [False] * count
    removed: list[int] = []
    size = count
    inf = float("inf")
    while size > cap and heap:
        d, i = heapq.heappop(heap)
        if dead[i] or d != current[i]:
            continue
        dead[i] = True
        removed.append(i)
        size -= 1
        if i in ends:
            break
        touched = set()
        for j in range(m):
            p, q, col, span = prev_l[j], nxt_l[j], cols[j], span_l[j]
            a, b = p[i], q[i]
            q[a] = b
            p[b] = a
            for t in (a, b):
                if p[t] >= 0 and q[t] >= 0 and span > 0:
                    contrib[j][t] = (col[q[t]] - col[p[t]]) / span
                touched.add(t)
        for t in touched:
            if current[t] == inf:
                continue
            total = 0.0
            for j in range(m):
                total += contrib[j][t]
            current[t] = total
            heapq.heappush(heap, (total, t))
    return removed

"""Box-constrained multiobjective benchmark problems.

Every problem exposes ``evaluate`` (F(x), counted) and ``jacobian`` (analytic
J_F(x), counted separately) behind the :class:`Problem` interface. Problems
are addressable by name through :func:`get_problem`.

Formula sources:

* ZDT_1, ZDT_3: "Comparison of multiobjective evolutionary algorithms:
  empirical results" (2000).
* JOS_1: "Dynamic weighted aggregation for evolutionary multi-objective
  optimization" (2001), f1 = mean(x^2), f2 = mean((x - 2)^2), box [0, 100]^n.
* MAN: "A memetic procedure for global multi-objective optimization" (2022),
  problem MAN_1, f1 = sum((x_i - i)^2) / n^2, f2 = sum(exp(-x_i) + x_i),
  unbounded.
* CEC09_1 .. CEC09_10: UF1-UF10 of "Multiobjective optimization test
  instances for the CEC 2009 special session and competition" (technical
  report CES-487), including the per-instance boxes listed there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

# Floor used when differentiating x1**p with p < 1 at x1 = 0; the objective
# itself is evaluated exactly.
_ROOT_FLOOR = 1e-12


class ProblemError(ValueError):
    """Invalid problem input (dimension, feasibility or finiteness)."""


@dataclass(frozen=True)
class BoxBounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ProblemError("lower and upper must be 1-D arrays of equal length")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise ProblemError("bounds must not contain NaN")
        if np.any(lower > upper):
            raise ProblemError("lower bound exceeds upper bound")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    def contains(self, x: np.ndarray) -> bool:
        return bool((x >= self.lower).all() and (x <= self.upper).all())

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.minimum(np.maximum(x, self.lower), self.upper)

    @classmethod
    def uniform(cls, n: int, lower: float, upper: float) -> "BoxBounds":
        return cls(np.full(n, float(lower)), np.full(n, float(upper)))


@dataclass
class EvalCounter:
    """Evaluation counts for one run. Not thread-safe; one counter per run."""

    objective_evals: int = 0
    jacobian_evals: int = 0

    def reset(self) -> None:
        self.objective_evals = 0
        self.jacobian_evals = 0


class Problem:
    """Base class for a box-constrained problem min F(x), x in [l, u].

    Subclasses implement ``_objectives`` and ``_jacobian``; the public
    methods validate input and count evaluations.
    """

    name: str = "problem"
    m: int = 2

    def __init__(self, n: int, bounds: BoxBounds) -> None:
        if bounds.n != n:
            raise ProblemError(f"bounds have length {bounds.n}, expected {n}")
        self.n = n
        self.bounds = bounds
        self.counter = EvalCounter()

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name!r}, n={self.n}, m={self.m})"

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ProblemError(f"{self.name}: expected x of shape ({self.n},), got {x.shape}")
        if not np.isfinite(x).all():
            raise ProblemError(f"{self.name}: non-finite component in x")
        if not self.bounds.contains(x):
            raise ProblemError(f"{self.name}: x lies outside the box")
        return x

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x)
        self.counter.objective_evals += 1
        return self._objectives(x)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x)
        self.counter.jacobian_evals += 1
        return self._jacobian(x)

    def initial_points(self) -> list[np.ndarray]:
        """Starting points: the box midpoint, or the origin clipped into the box."""
        lo, hi = self.bounds.lower, self.bounds.upper
        mid = np.where(np.isfinite(lo) & np.isfinite(hi), 0.5 * (lo + hi), 0.0)
        return [self.bounds.clip(mid)]

    def _objectives(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _jacobian(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def diagonal_points(bounds: BoxBounds, count: int) -> list[np.ndarray]:
    """``count`` points l + t (u - l), t evenly spaced on [0, 1]."""
    if not bounds.finite:
        raise ProblemError("diagonal sampling needs a finite box")
    if count == 1:
        return [0.5 * (bounds.lower + bounds.upper)]
    span = bounds.upper - bounds.lower
    return [bounds.lower + (i / (count - 1)) * span for i in range(count)]


# ---------------------------------------------------------------------------
# ZDT, JOS, MAN


class ZDT1(Problem):
    name = "ZDT_1"
    m = 2

    def __init__(self, n: int = 30) -> None:
        if n < 2:
            raise ProblemError("ZDT problems need n >= 2")
        super().__init__(n, BoxBounds.uniform(n, 0.0, 1.0))
        self._scale = 9.0 / (n - 1)

    def initial_points(self) -> list[np.ndarray]:
        return [np.full(self.n, 0.5)]

    def _g(self, x: np.ndarray) -> float:
        return 1.0 + self._scale * float(np.sum(x[1:]))

    def _shape(self, f1: float, g: float) -> tuple[float, float, float]:
        # h-part of f2 = g - sqrt(f1 g) and its partials w.r.t. f1 and g
        root = math.sqrt(f1 * g)
        r = math.sqrt(max(f1, _ROOT_FLOOR))
        return g - root, -0.5 * math.sqrt(g) / r, 1.0 - 0.5 * math.sqrt(f1 / g)

    def _objectives(self, x: np.ndarray) -> np.ndarray:
        g = self._g(x)
        f2, _, _ = self._shape(x[0], g)
        return np.array([x[0], f2])

    def _jacobian(self, x: np.ndarray) -> np.ndarray:
        g = self._g(x)
        _, d_f1, d_g = self._shape(x[0], g)
        jac = np.zeros((2, self.n))
        jac[0, 0] = 1.0
        jac[1, 0] = d_f1
        jac[1, 1:] = d_g * self._scale
        return jac


class ZDT3(ZDT1):
    name = "ZDT_3"

    def _shape(self, f1: float, g: float) -> tuple[float, float, float]:
        base, d_f1, d_g = super()._shape(f1, g)
        w = 10.0 * math.pi
        base -= f1 * math.sin(w * f1)
        d_f1 -= math.sin(w * f1) + w * f1 * math.cos(w * f1)
        return base, d_f1, d_g


class JOS1(Problem):
    name = "JOS_1"
    m = 2

    def __init__(self, n: int = 10) -> None:
        super().__init__(n, BoxBounds.uniform(n, 0.0, 100.0))

    def initial_points(self) -> list[np.ndarray]:
        return [np.full(self.n, 50.0)]

    def _objectives(self, x: np.ndarray) -> np.ndarray:
        return np.array([np.mean(x**2), np.mean((x - 2.0) ** 2)])

    def _jacobian(self, x: np.ndarray) -> np.ndarray:
        return np.vstack([2.0 * x, 2.0 * (x - 2.0)]) / self.n


class MAN1(Problem):
    name = "MAN"
    m = 2

    def __init__(self, n: int = 10) -> None:
        super().__init__(n, BoxBounds.uniform(n, -np.inf, np.inf))
        self._targets = np.arange(1, n + 1, dtype=float)

    def initial_points(self) -> list[np.ndarray]:
        return [np.full(self.n, -10.0)]

    def _objectives(self, x: np.ndarray) -> np.ndarray:
        f1 = np.sum((x - self._targets) ** 2) / self.n**2
        f2 = np.sum(np.exp(-x) + x)
        return np.array([f1, f2])

    def _jacobian(self, x: np.ndarray) -> np.ndarray:
        return np.vstack([2.0 * (x - self._targets) / self.n**2, 1.0 - np.exp(-x)])


# ---------------------------------------------------------------------------
# CEC09 (UF1-UF10)
#
# All instances share the shape f_i = base_i(x1[, x2]) + (2/|J_i|) S_i(y_J_i)
# with y_j = x_j - s_j(x1[, x2]). Subclasses supply the base terms, the shift
# s_j with its partials, and the aggregate S with its gradient in y.


def _sum_sq(y: np.ndarray, idx: np.ndarray, grad: bool = True):
    return float(y @ y), (2.0 * y if grad else None)


def _uf4_h(y: np.ndarray, idx: np.ndarray, grad: bool = True):
    a = np.abs(y)
    e = np.exp(-2.0 * a)  # 1/(1+e^{2a}) = e/(1+e), overflow-safe
    h = a * e / (1.0 + e)
    if not grad:
        return float(h.sum()), None
    dh_da = e / (1.0 + e) - 2.0 * a * e / (1.0 + e) ** 2
    return float(np.sum(h)), np.sign(y) * dh_da


def _uf5_h(y: np.ndarray, idx: np.ndarray, grad: bool = True):
    h = 2.0 * y**2 - np.cos(4.0 * np.pi * y) + 1.0
    if not grad:
        return float(h.sum()), None
    return float(h.sum()), 4.0 * y + 4.0 * np.pi * np.sin(4.0 * np.pi * y)


def _uf10_h(y: np.ndarray, idx: np.ndarray, grad: bool = True):
    h = 4.0 * y**2 - np.cos(8.0 * np.pi * y) + 1.0
    if not grad:
        return float(h.sum()), None
    return float(h.sum()), 8.0 * y + 8.0 * np.pi * np.sin(8.0 * np.pi * y)


def _sum_prod_cos(y: np.ndarray, idx: np.ndarray, grad: bool = True):
    # 4 sum y^2 - 2 prod cos(20 pi y_j / sqrt(j)) + 2
    w = 20.0 * np.pi / np.sqrt(idx)
    c = np.cos(w * y)
    value = 4.0 * float(y @ y) - 2.0 * float(c.prod()) + 2.0
    if not grad:
        return value, None
    if y.size == 0:
        return value, y.copy()
    # products leaving one factor out, without dividing by cos
    left = np.concatenate(([1.0], np.cumprod(c)[:-1]))
    right = np.concatenate((np.cumprod(c[::-1])[:-1][::-1], [1.0]))
    grad = 8.0 * y + 2.0 * w * np.sin(w * y) * left * right
    return value, grad


class _UF(Problem):
    """Shared evaluation for the CEC09 UF family."""

    m = 2
    aggregate: Callable[..., tuple[float, np.ndarray | None]] = staticmethod(_sum_sq)
    min_n = 2

    def __init__(self, n: int, bounds: BoxBounds) -> None:
        if n < self.min_n:
            raise ProblemError(f"{self.name} needs n >= {self.min_n}")
        super().__init__(n, bounds)
        j = np.arange(1, n + 1)
        first = 2 if self.m == 2 else 3
        groups = []
        for i in range(self.m):
            if self.m == 2:
                mask = (j >= first) & (j % 2 == (1 if i == 0 else 0))
            else:
                mask = (j >= first) & ((j - (i + 1)) % 3 == 0)
            groups.append(np.flatnonzero(mask))  # 0-based positions
        self._groups = groups
        self._jidx = j.astype(float)  # 1-based variable indices
        self._phase = j * np.pi / n

    def initial_points(self) -> list[np.ndarray]:
        return diagonal_points(self.bounds, self.n)

    # subclass hooks -------------------------------------------------------
    def _shift(self, x: np.ndarray, grad: bool = True) -> tuple[np.ndarray, np.ndarray | None]:
        """Return s (length n, entries used only for j in groups) and ds/dx
        as an (n, k) array, k = number of leading variables (None unless
        ``grad``)."""
        raise NotImplementedError

    def _base(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return base values (m,) and their gradient (m, k)."""
        raise NotImplementedError

    # ---------------------------------------------------------------------
    def _parts(self, x: np.ndarray, grad: bool = True):
        s, ds = self._shift(x, grad)
        y = x - s
        base, dbase = self._base(x)
        return y, ds, base, dbase

    def _objectives(self, x: np.ndarray) -> np.ndarray:
        y, _, base, _ = self._parts(x, False)
        out = base.copy()
        for i, pos in enumerate(self._groups):
            if pos.size:
                value, _ = self.aggregate(y[pos], self._jidx[pos], False)
                out[i] += 2.0 * value / pos.size
        return out

    def _jacobian(self, x: np.ndarray) -> np.ndarray:
        y, ds, _, dbase = self._parts(x)
        k = dbase.shape[1]
        jac = np.zeros((self.m, self.n))
        jac[:, :k] = dbase
        for i, pos in enumerate(self._groups):
            if not pos.size:
                continue
            _, grad_y = self.aggregate(y[pos], self._jidx[pos])
            scale = 2.0 / pos.size
            jac[i, pos] += scale * grad_y
            # y_j = x_j - s_j(lead) => dy_j/dlead = -ds_j/dlead
            jac[i, :k] -= scale * grad_y @ ds[pos]
        return jac


def _sin_shift(x: np.ndarray, phase: np.ndarray, grad: bool):
    arg = 6.0 * np.pi * x[0] + phase
    return np.sin(arg), (6.0 * np.pi * np.cos(arg))[:, None] if grad else None


def _sqrt_base(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x1 = x[0]
    d = 0.5 / math.sqrt(max(x1, _ROOT_FLOOR))
    return np.array([x1, 1.0 - math.sqrt(x1)]), np.array([[1.0], [-d]])


def _bounds_lead(n: int, lead: int, rest: float) -> BoxBounds:
    lower = np.full(n, -rest)
    upper = np.full(n, rest)
    lower[:lead] = 0.0
    upper[:lead] = 1.0
    return BoxBounds(lower, upper)


class UF1(_UF):
    name = "CEC09_1"

    def __init__(self, n: int = 30) -> None:
        super().__init__(n, _bounds_lead(n, 1, 1.0))

    def _shift(self, x, grad=True):
        return _sin_shift(x, self._phase, grad)

    def _base(self, x):
        return _sqrt_base(x)


class UF2(UF1):
    name = "CEC09_2"

    def __init__(self, n: int = 30) -> None:
        super().__init__(n)
        j = np.arange(1, n + 1)
        self._odd = j % 2 == 1
        self._phase4 = 4.0 * j * np.pi / n

    def _shift(self, x, grad=True):
        x1 = x[0]
        inner = 24.0 * np.pi * x1 + self._phase4
        cos_inner = np.cos(inner)
        amp = 0.3 * x1**2 * cos_inner + 0.6 * x1
        arg = 6.0 * np.pi * x1 + self._phase
        cos_arg, sin_arg = np.cos(arg), np.sin(arg)
        odd = self._odd
        trig = np.where(odd, cos_arg, sin_arg)
        if not grad:
            return amp * trig, None
        d_amp = 0.6 * x1 * cos_inner - 7.2 * np.pi * x1**2 * np.sin(inner) + 0.6
        d_trig = np.where(odd, -sin_arg, cos_arg) * 6.0 * np.pi
        return amp * trig, (d_amp * trig + amp * d_trig)[:, None]


class UF3(UF1):
    name = "CEC09_3"
    aggregate = staticmethod(_sum_prod_cos)
    min_n = 3  # the exponent divides by n - 2

    def __init__(self, n: int = 30) -> None:
        _UF.__init__(self, n, BoxBounds.uniform(n, 0.0, 1.0))
        j = np.arange(1, n + 1)
        self._expo = 0.5 * (1.0 + 3.0 * (j - 2) / (n - 2))
        self._expo[0] = 1.0  # j = 1 is never shifted; avoid 0**negative

    def _shift(self, x, grad=True):
        x1 = x[0]
        s = x1**self._expo
        if not grad:
            return s, None
        ds = self._expo * max(x1, _ROOT_FLOOR) ** (self._expo - 1.0)
        return s, ds[:, None]


class UF4(UF1):
    name = "CEC09_4"
    aggregate = staticmethod(_uf4_h)

    def __init__(self, n: int = 30) -> None:
        _UF.__init__(self, n, _bounds_lead(n, 1, 2.0))

    def _base(self, x):
        x1 = x[0]
        return np.array([x1, 1.0 - x1**2]), np.array([[1.0], [-2.0 * x1]])


def _wave_base(x1: float, n_wave: int, eps: float, positive_part: bool):
    # x1 + wave, 1 - x1 + wave, with wave = c|sin| (UF5) or max(0, 2c sin) (UF6)
    c = 1.0 / (2 * n_wave) + eps
    w = 2.0 * n_wave * math.pi
    s, ds = math.sin(w * x1), w * math.cos(w * x1)
    if positive_part:
        wave, d_wave = (2.0 * c * s, 2.0 * c * ds) if s > 0 else (0.0, 0.0)
    else:
        wave, d_wave = c * abs(s), c * math.copysign(1.0, s) * ds if s != 0 else 0.0
    if x1 == 0.0:
        # kink on the lower face: use the slope into the box
        d_wave = 2.0 * c * max(ds, 0.0) if positive_part else c * abs(ds)
    return (
        np.array([x1 + wave, 1.0 - x1 + wave]),
        np.array([[1.0 + d_wave], [-1.0 + d_wave]]),
    )


class UF5(UF1):
    name = "CEC09_5"
    aggregate = staticmethod(_uf5_h)

    def _base(self, x):
        return _wave_base(x[0], 10, 0.1, positive_part=False)


class UF6(UF1):
    name = "CEC09_6"
    aggregate = staticmethod(_sum_prod_cos)

    def _base(self, x):
        return _wave_base(x[0], 2, 0.1, positive_part=True)


class UF7(UF1):
    name = "CEC09_7"

    def _base(self, x):
        x1 = x[0]
        r = x1**0.2
        d = 0.2 * max(x1, _ROOT_FLOOR) ** -0.8
        return np.array([r, 1.0 - r]), np.array([[d], [-d]])


class UF8(_UF):
    name = "CEC09_8"
    m = 3
    min_n = 3

    def __init__(self, n: int = 30) -> None:
        super().__init__(n, _bounds_lead(n, 2, 2.0))

    def _shift(self, x, grad=True):
        arg = 2.0 * np.pi * x[0] + self._phase
        s = 2.0 * x[1] * np.sin(arg)
        if not grad:
            return s, None
        ds = np.column_stack([4.0 * np.pi * x[1] * np.cos(arg), 2.0 * np.sin(arg)])
        return s, ds

    def _base(self, x):
        a, b = 0.5 * np.pi * x[0], 0.5 * np.pi * x[1]
        ca, sa, cb, sb = math.cos(a), math.sin(a), math.cos(b), math.sin(b)
        h = 0.5 * np.pi
        values = np.array([ca * cb, ca * sb, sa])
        grad = np.array(
            [
                [-h * sa * cb, -h * ca * sb],
                [-h * sa * sb, h * ca * cb],
                [h * ca, 0.0],
            ]
        )
        return values, grad


class UF9(UF8):
    name = "CEC09_9"

    def _base(self, x):
        x1, x2 = x[0], x[1]
        eps = 0.1
        q = (1.0 + eps) * (1.0 - 4.0 * (2.0 * x1 - 1.0) ** 2)
        p, dp = (q, -16.0 * (1.0 + eps) * (2.0 * x1 - 1.0)) if q > 0 else (0.0, 0.0)
        values = np.array(
            [0.5 * (p + 2.0 * x1) * x2, 0.5 * (p - 2.0 * x1 + 2.0) * x2, 1.0 - x2]
        )
        grad = np.array(
            [
                [0.5 * (dp + 2.0) * x2, 0.5 * (p + 2.0 * x1)],
                [0.5 * (dp - 2.0) * x2, 0.5 * (p - 2.0 * x1 + 2.0)],
                [0.0, -1.0],
            ]
        )
        return values, grad


class UF10(UF8):
    name = "CEC09_10"
    aggregate = staticmethod(_uf10_h)


# ---------------------------------------------------------------------------
# user-supplied problems


class FunctionProblem(Problem):
    """Problem built from plain callables.

    If ``jac`` is omitted, the Jacobian is approximated by central finite
    differences on the raw callable, so it never touches the objective
    counter.

    Example:
        >>> p = FunctionProblem("quad", lambda x: np.array([0.5 * x @ x]),
        ...                     BoxBounds.uniform(1, -5, 5))
    """

    def __init__(
        self,
        name: str,
        fun: Callable[[np.ndarray], np.ndarray],
        bounds: BoxBounds,
        jac: Callable[[np.ndarray], np.ndarray] | None = None,
        initial_points: Sequence[np.ndarray] | None = None,
        fd_step: float = 1e-6,
    ) -> None:
        super().__init__(bounds.n, bounds)
        self.name = name
        self._fun = fun
        self._jac_fun = jac
        self._fd_step = fd_step
        probe = np.atleast_1d(np.asarray(fun(self._probe_point()), dtype=float))
        self.m = probe.shape[0]
        self._initial = None if initial_points is None else [np.asarray(p, float) for p in initial_points]

    def _probe_point(self) -> np.ndarray:
        return super().initial_points()[0]

    def initial_points(self) -> list[np.ndarray]:
        if self._initial is not None:
            return [p.copy() for p in self._initial]
        return super().initial_points()

    def _objectives(self, x: np.ndarray) -> np.ndarray:
        return np.atleast_1d(np.asarray(self._fun(x), dtype=float))

    def _jacobian(self, x: np.ndarray) -> np.ndarray:
        if self._jac_fun is not None:
            return np.asarray(self._jac_fun(x), dtype=float).reshape(self.m, self.n)
        return finite_difference_jacobian(self._objectives, x, self.bounds, self._fd_step)


def finite_difference_jacobian(
    fun: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    bounds: BoxBounds,
    step: float = 1e-6,
) -> np.ndarray:
    """Central differences, falling back to one-sided steps at the box faces."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        hi = x.copy()
        lo = x.copy()
        hi[i] = min(x[i] + step, bounds.upper[i])
        lo[i] = max(x[i] - step, bounds.lower[i])
        cols.append((fun(hi) - fun(lo)) / (hi[i] - lo[i]))
    return np.column_stack(cols)


# ---------------------------------------------------------------------------
# registry

_REGISTRY: dict[str, Callable[[int], Problem]] = {
    "ZDT_1": ZDT1,
    "ZDT_3": ZDT3,
    "JOS_1": JOS1,
    "MAN": MAN1,
    "CEC09_1": UF1,
    "CEC09_2": UF2,
    "CEC09_3": UF3,
    "CEC09_4": UF4,
    "CEC09_5": UF5,
    "CEC09_6": UF6,
    "CEC09_7": UF7,
    "CEC09_8": UF8,
    "CEC09_9": UF9,
    "CEC09_10": UF10,
}


def register_problem(name: str, factory: Callable[[int], Problem]) -> None:
    """Make ``factory(n)`` available to :func:`get_problem` under ``name``."""
    _REGISTRY[name] = factory


def list_problems() -> list[str]:
    return list(_REGISTRY)


def get_problem(name: str, n: int) -> Problem:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; known: {', '.join(_REGISTRY)}") from None
    return factory(n)

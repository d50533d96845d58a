"""Independent reference computations shared by the unit and acceptance tests."""

import itertools
import math

import numpy as np

from frontdescent.problems import BoxBounds

INV_PHI = (math.sqrt(5) - 1) / 2


# --- primal oracle -----------------------------------------------------------
# phi(d) = max_j g_j.d + |d|^2 / 2 over lo <= d <= hi is convex, so partial
# minimisation over trailing coordinates stays convex and nested golden
# sections converge. The innermost coordinate is minimised exactly.


def _inner_exact(a, b, lo, hi):
    # min over t in [lo, hi] of max_j(a_j + b_j t) + t^2 / 2
    cands = [lo, hi] + [-bj for bj in b]
    for i in range(len(b)):
        for j in range(i + 1, len(b)):
            if b[i] != b[j]:
                cands.append((a[j] - a[i]) / (b[i] - b[j]))
    best = math.inf
    for t in cands:
        t = min(max(t, lo), hi)
        best = min(best, max(ai + bi * t for ai, bi in zip(a, b)) + 0.5 * t * t)
    return best


def _golden(fun, lo, hi, tol=1e-10):
    a, b = lo, hi
    c, d = b - INV_PHI * (b - a), a + INV_PHI * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol * max(1.0, abs(a) + abs(b)):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = fun(d)
    return min(fc, fd, fun(lo), fun(hi))


def oracle_theta(J, lo, hi):
    J = np.asarray(J, float)
    n = J.shape[1]

    def level(prefix, k):
        base = J[:, :k] @ np.array(prefix) if k else np.zeros(J.shape[0])
        quad = 0.5 * sum(p * p for p in prefix)
        if k == n - 1:
            return quad + _inner_exact(list(base), list(J[:, k]), lo[k], hi[k])
        return _golden(lambda t: level(prefix + [t], k + 1), lo[k], hi[k])

    return min(level([], 0), 0.0)


def enumerated_theta(J, lo, hi):
    """Exact optimum by enumerating every KKT system (small n only).

    Each coordinate is free or fixed at a bound, and each row subset S is
    taken as the set of maximising rows, with d_F = -J_SF^T mu and sum mu = 1.
    Every box-feasible candidate is an upper bound, and the unique optimum
    solves one of the nonsingular systems, so the minimum is exact.
    """
    m, n = J.shape
    best = 0.0
    for pattern in itertools.product((-1, 0, 1), repeat=n):
        pattern = np.array(pattern)
        free = pattern == 0
        fixed = np.where(pattern == 1, hi, lo) * ~free
        for size in range(1, m + 1):
            for rows in itertools.combinations(range(m), size):
                A = J[np.ix_(rows, free)]
                K = np.zeros((size + 1, size + 1))
                K[:size, :size] = A @ A.T
                K[:size, size] = 1.0
                K[size, :size] = 1.0
                rhs = np.append(J[list(rows)] @ fixed, 1.0)
                sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
                d = fixed.copy()
                d[free] = -A.T @ sol[:size]
                if (d < lo).any() or (d > hi).any():
                    continue
                best = min(best, float((J @ d).max() + 0.5 * d @ d))
    return best


def finite_box(g, lo, hi):
    # a bound that can never be active: |v_i| <= max_j |g_ji|
    r = np.abs(g).max(axis=0) + 1.0
    return np.maximum(lo, -r), np.minimum(hi, r)


def random_instance(rng, m, n):
    J = rng.normal(size=(m, n)) * rng.choice([0.3, 1.0, 3.0])
    lower = -rng.random(n) * 3
    upper = rng.random(n) * 3
    x = lower + rng.random(n) * (upper - lower)
    # sometimes put x on a face
    face = rng.random(n)
    x = np.where(face < 0.15, lower, np.where(face > 0.85, upper, x))
    return J, x, BoxBounds(lower, upper)


def inclusion_exclusion(points, zeta):
    """Union of boxes [p, zeta] by inclusion-exclusion."""
    zeta = np.asarray(zeta, float)
    pts = [p for p in np.asarray(points, float) if (p <= zeta).all()]
    total = 0.0
    for r in range(1, len(pts) + 1):
        for group in itertools.combinations(pts, r):
            corner = np.max(group, axis=0)
            total += (-1) ** (r + 1) * np.prod(np.maximum(zeta - corner, 0.0))
    return total


def monte_carlo_hv2(fx, zeta, samples, rng):
    """Hit-or-miss estimate of a 2-D hypervolume and its standard error."""
    fx = np.asarray(fx, float)
    lo = fx.min(axis=0)
    box = float(np.prod(zeta - lo))
    y = lo + rng.random((samples, 2)) * (zeta - lo)
    order = np.argsort(fx[:, 0], kind="stable")
    f1 = fx[order, 0]
    best_f2 = np.minimum.accumulate(fx[order, 1])
    # a sample is dominated iff some point with f1 <= y1 also has f2 <= y2
    pos = np.searchsorted(f1, y[:, 0], side="right") - 1
    hit = (pos >= 0) & (y[:, 1] >= best_f2[np.maximum(pos, 0)])
    p = hit.mean()
    return box * p, box * math.sqrt(p * (1 - p) / samples)


def zdt1_front(count):
    """Analytic ZDT_1 Pareto front sampled uniformly in f1."""
    f1 = np.linspace(0.0, 1.0, count)
    return np.column_stack([f1, 1.0 - np.sqrt(f1)])

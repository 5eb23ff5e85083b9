"""Picard iteration with a-priori and Cauchy-tail convergence bounds.

For a convex contraction of order ``m`` with coefficient sum ``alpha``, the
successive displacements obey ``d(x_n, x_{n+1}) <= alpha**(n // m) * mu``
where ``mu`` is the sum of the first ``m`` displacements, and in a
suprametric space with constant ``rho`` any partial sum ``sigma`` of
displacements controls ``d(x_n, x_{n+p}) <= (exp(rho*sigma) - 1) / rho``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .maps import SelfMap
from .space import DomainError

RHO_BRANCH = 1e-12


@dataclass(frozen=True)
class StoppingCriteria:
    max_iters: int = 1000
    displacement_tol: float = 0.0
    tail_bound_tol: float = 0.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")
        if self.displacement_tol < 0 or self.tail_bound_tol < 0:
            raise ValueError("tolerances must be nonnegative")


@dataclass(frozen=True)
class OrbitTrace:
    points: list
    displacements: np.ndarray
    cum_tail: np.ndarray
    converged: bool
    residual: float
    stop_reason: str = ""
    bounds: np.ndarray | None = None

    @property
    def steps(self) -> int:
        return len(self.displacements)

    @property
    def final(self):
        return self.points[-1]


def suffix_sums(values) -> np.ndarray:
    """``out[n] = sum(values[n:])``, accumulated from the end."""
    v = np.asarray(values, dtype=float)
    return np.cumsum(v[::-1])[::-1].copy() if len(v) else np.zeros(0)


def make_trace(points, displacements, converged, residual, stop_reason="", bounds=None) -> OrbitTrace:
    disp = np.asarray(displacements, dtype=float)
    return OrbitTrace(list(points), disp, suffix_sums(disp), converged, float(residual),
                      stop_reason, None if bounds is None else np.asarray(bounds, dtype=float))


def tail_sum(n: int, m: int, alpha: float, mu: float) -> float:
    """Closed form of ``sum_{k >= n} alpha**(k // m) * mu``.

    Indices ``n .. (q+1)m - 1`` share the exponent ``q = n // m``; every later
    block of ``m`` terms is geometric in ``alpha``.
    """
    if alpha >= 1:
        return math.inf
    q, r = divmod(n, m)
    head = (m - r) * alpha**q
    rest = m * alpha ** (q + 1) / (1.0 - alpha)
    return mu * (head + rest)


def iterate(T: SelfMap, x0, stop: StoppingCriteria = StoppingCriteria(),
            bound: tuple[int, float] | None = None, rho: float | None = None,
            thin: int = 1) -> OrbitTrace:
    """Run the Picard orbit ``x_{n+1} = T x_n`` from ``x0``.

    Halts on ``max_iters``, on a displacement at most ``displacement_tol``,
    or (when ``bound=(m, alpha)`` is given) once the Cauchy-tail estimate of
    the remaining distance drops below ``tail_bound_tol``.  ``converged`` is
    true iff one of the two tolerance criteria fired.  ``thin`` keeps every
    ``thin``-th point; displacements are always stored in full.
    """
    space = T.space
    if not space.contains(x0):
        raise DomainError(f"start point {x0!r} is outside the space", x0)
    rho = space.rho if rho is None else rho
    points = [x0]
    disps: list[float] = []
    x = x0
    converged = False
    reason = "max_iters"
    for n in range(stop.max_iters):
        nxt = T.apply_checked(x)
        step = float(space.distance(x, nxt))
        disps.append(step)
        x = nxt
        if thin <= 1 or (n + 1) % thin == 0:
            points.append(x)
        if step <= stop.displacement_tol:
            converged, reason = True, "displacement_tol"
            break
        if bound is not None and stop.tail_bound_tol > 0 and len(disps) >= bound[0]:
            m, alpha = bound
            mu = sum(disps[:m])
            if cauchy_tail_bound(tail_sum(len(disps), m, alpha, mu), rho) < stop.tail_bound_tol:
                converged, reason = True, "tail_bound_tol"
                break
    if points[-1] is not x:
        points.append(x)
    residual = float(T.displacement(x))
    bounds = None
    if bound is not None and len(disps) >= bound[0]:
        m, alpha = bound
        mu = float(sum(disps[:m]))
        bounds = [apriori_step_bound(k, m, alpha, mu) if k >= m else math.nan for k in range(len(disps))]
    return make_trace(points, disps, converged, residual, reason, bounds)


def _displacements_padded(trace: OrbitTrace, length: int) -> np.ndarray:
    disp = np.asarray(trace.displacements, dtype=float)
    if len(disp) >= length:
        return disp
    stationary = len(disp) > 0 and disp[-1] == 0.0 or (len(disp) == 0 and trace.residual == 0.0)
    if not stationary:
        raise ValueError(f"trace has {len(disp) + 1} points; need at least {length + 1}")
    return np.concatenate([disp, np.zeros(length - len(disp))])


def mu_initial(trace: OrbitTrace, m: int) -> float:
    """Sum of the first ``m`` displacements.

    A trace that ended on an exact fixed point is treated as continuing with
    zero displacements.
    """
    if m < 1:
        raise ValueError("m must be a positive integer")
    return float(math.fsum(_displacements_padded(trace, m)[:m]))


def apriori_step_bound(n: int, m: int, alpha: float, mu: float) -> float:
    """``alpha**(n // m) * mu``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    return alpha ** (n // m) * mu


def cauchy_tail_bound(sigma: float, rho: float) -> float:
    """``(exp(rho * sigma) - 1) / rho``, and ``sigma`` itself as ``rho -> 0``."""
    if rho < RHO_BRANCH:
        return float(sigma)
    try:
        return math.expm1(rho * sigma) / rho
    except OverflowError:
        return math.inf


def iterations_for_tolerance(eps: float, alpha: float, mu: float, m: int, rho: float) -> int:
    """Smallest ``N`` whose certified remaining distance is below ``eps``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")

    def ok(n: int) -> bool:
        return cauchy_tail_bound(tail_sum(n, m, alpha, mu), rho) < eps

    if ok(0):
        return 0
    hi = 1
    while not ok(hi):
        hi *= 2
        if hi > 1 << 62:
            raise ArithmeticError("tolerance is not reachable in floating point")
    lo = hi // 2  # ok(lo) is False
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class BoundReport:
    m: int
    alpha: float
    mu: float
    checked: int
    violations: list = field(default_factory=list)  # [(n, displacement, bound)]

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_trace_bounds(trace: OrbitTrace, m: int, alpha: float, tol: float = 1e-9) -> BoundReport:
    """Check ``d(x_n, x_{n+1}) <= alpha**(n // m) * mu`` for every ``n >= m``."""
    mu = mu_initial(trace, m)
    disp = np.asarray(trace.displacements, dtype=float)
    violations = []
    for n in range(m, len(disp)):
        b = apriori_step_bound(n, m, alpha, mu)
        if disp[n] > b + tol:
            violations.append((n, float(disp[n]), b))
    return BoundReport(m, alpha, mu, max(0, len(disp) - m), violations)


def ciric_orbit_bound(c0: float, rho: float, lam: float) -> float:
    """Orbit diameter bound ``C0 (1 + rho C0) / (1 - lam)``."""
    if not 0 <= lam < 1:
        raise ValueError("lambda must lie in [0, 1)")
    return c0 * (1.0 + rho * c0) / (1.0 - lam)


def transformed_factor(lam: float, rho: float, c: float) -> float:
    """Contraction factor ``lam (1 + rho C) / (1 + rho lam C)`` for the bounded distance d / (1 + rho d)."""
    if not 0 <= lam < 1:
        raise ValueError("lambda must lie in [0, 1)")
    if rho < 0 or c < 0:
        raise ValueError("rho and C must be nonnegative")
    return lam * (1.0 + rho * c) / (1.0 + rho * lam * c)


def initial_orbit_constant(T: SelfMap, x0, n_map) -> tuple[float, int]:
    """``(C0, m)``: ``m`` is the largest ``n(z)`` over ``z`` in the first ``m`` iterates
    and ``C0`` the largest ``d(z, T^j z)``, ``0 <= j <= m``, over those ``z``.

    ``m`` is found by growing the initial segment until it is self-consistent.
    """
    from .contraction import resolve_n

    m = 1
    while True:
        seg = T.orbit(x0, m - 1)
        ns = resolve_n(n_map, T.space, np.asarray(seg))
        m_new = max(int(ns.max()), m)
        if m_new == m:
            break
        m = m_new
    c0 = 0.0
    for z in T.orbit(x0, m - 1):
        for w in T.orbit(z, m):
            c0 = max(c0, float(T.space.distance(z, w)))
    return c0, m


def trace_rows(trace: OrbitTrace, describe=repr) -> list[list[str]]:
    """Rows ``n, point, displacement, bound, tail``; bound blank where not defined."""
    rows = []
    for n, disp in enumerate(trace.displacements):
        b = ""
        if trace.bounds is not None and n < len(trace.bounds) and not math.isnan(trace.bounds[n]):
            b = repr(float(trace.bounds[n]))
        point = describe(trace.points[n]) if n < len(trace.points) else ""
        rows.append([str(n), point, repr(float(disp)), b, repr(float(trace.cum_tail[n]))])
    return rows


def trace_csv(trace: OrbitTrace, describe=repr) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "point", "displacement", "bound", "tail"])
    writer.writerows(trace_rows(trace, describe))
    return buf.getvalue()

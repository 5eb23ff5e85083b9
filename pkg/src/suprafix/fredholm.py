"""Picard solver for f = g + integral_a^b K(x, t) f(t) dt on a quadrature grid.

Distances between iterates use the suprametric
``d(f, g) = u (u + lambda_supra)`` with ``u = max |f - g|`` on the grid,
whose constant is ``rho = 2 / lambda_supra`` for ``lambda_supra >= 1``
(``2 / lambda_supra**2`` below that).  When ``L = M (b - a) < 1``
(``M`` bounds ``|K|``) the operator is a convex contraction of order 2 with
coefficients ``(L**2, 0)``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate

from . import kexpr
from .maps import SelfMap
from .picard import OrbitTrace, StoppingCriteria, make_trace
from .space import poly_rho


class FredholmError(ValueError):
    """Invalid problem definition or grid mismatch."""


class CertificateError(RuntimeError):
    """Refusal to solve because ``L = M (b - a) >= 1``."""

    def __init__(self, certificate: "Certificate"):
        self.certificate = certificate
        super().__init__(f"contraction constant L = {certificate.L:.6g} >= 1; solve refused")


class DivergenceError(RuntimeError):
    """Residual kept growing across the detection window."""

    def __init__(self, message: str, trace: OrbitTrace):
        self.trace = trace
        super().__init__(message)


def quadrature_weights(nodes: np.ndarray, rule: str = "trapezoid") -> np.ndarray:
    """Composite trapezoid or Simpson weights on a uniform grid."""
    n = len(nodes)
    if n < 2:
        raise FredholmError("need at least two nodes")
    h = (nodes[-1] - nodes[0]) / (n - 1)
    if rule == "trapezoid":
        w = np.full(n, h)
        w[0] = w[-1] = h / 2
        return w
    if rule == "simpson":
        if n % 2 == 0:
            raise FredholmError(f"Simpson's rule needs an odd number of nodes, got {n}")
        w = np.empty(n)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w[0] = w[-1] = 1.0
        return w * h / 3
    raise FredholmError(f"unknown quadrature rule {rule!r}")


@dataclass(frozen=True)
class GridFunction:
    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.shape != values.shape[-1:]:
            raise FredholmError(f"{len(nodes)} nodes but values of shape {values.shape}")
        if np.any(np.diff(nodes) <= 0):
            raise FredholmError("nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __call__(self, x):
        """Piecewise-linear interpolation between nodes."""
        return np.interp(x, self.nodes, self.values)


@dataclass(frozen=True)
class FredholmProblem:
    """``f(x) = g(x) + int_a^b K(x, t) f(t) dt``; ``g`` absent means homogeneous.

    ``kernel`` is a callable ``K(x, t)`` (numpy-broadcasting) or an
    ``(grid_n, grid_n)`` array sampled at the nodes.
    """

    a: float
    b: float
    kernel: object
    g: Callable | None = None
    grid_n: int = 101
    rule: str = "trapezoid"
    lambda_supra: float = 1.0
    kernel_source: str | None = field(default=None, compare=False)
    g_source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.a < self.b:
            raise FredholmError(f"need a < b, got [{self.a}, {self.b}]")
        if self.grid_n < 2:
            raise FredholmError("grid_n must be at least 2")
        if self.rule not in ("trapezoid", "simpson"):
            raise FredholmError(f"unknown quadrature rule {self.rule!r}")
        if self.rule == "simpson" and self.grid_n % 2 == 0:
            raise FredholmError("Simpson's rule needs an odd grid_n")
        if not self.lambda_supra > 0:
            raise FredholmError("lambda_supra must be positive")
        if not callable(self.kernel):
            k = np.asarray(self.kernel, dtype=float)
            if k.shape != (self.grid_n, self.grid_n):
                raise FredholmError(f"kernel grid has shape {k.shape}, expected ({self.grid_n}, {self.grid_n})")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.grid_n)

    @property
    def rho(self) -> float:
        return poly_rho(self.lambda_supra)

    def kernel_matrix(self) -> np.ndarray:
        if not callable(self.kernel):
            return np.asarray(self.kernel, dtype=float)
        x = self.nodes
        return np.broadcast_to(self.kernel(x[:, None], x[None, :]), (self.grid_n, self.grid_n)).astype(float)

    def g_values(self) -> np.ndarray:
        if self.g is None:
            return np.zeros(self.grid_n)
        return np.broadcast_to(self.g(self.nodes), (self.grid_n,)).astype(float)


@dataclass(frozen=True)
class Certificate:
    M: float
    L: float
    a0: float
    a1: float
    valid: bool
    note: str = "M is the maximum of |K| over the quadrature tensor grid"


def kernel_bound(problem: FredholmProblem) -> float:
    return float(np.max(np.abs(problem.kernel_matrix())))


def certify(problem: FredholmProblem) -> Certificate:
    m = kernel_bound(problem)
    lip = m * (problem.b - problem.a)
    return Certificate(M=m, L=lip, a0=lip**2, a1=0.0, valid=lip < 1)


def supra_distance(f, g, lambda_supra: float = 1.0):
    """``u (u + lambda_supra)`` with ``u`` the grid sup-norm of ``f - g``.

    Accepts :class:`GridFunction` or arrays; batches reduce over the last axis.
    """
    fv = f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)
    gv = g.values if isinstance(g, GridFunction) else np.asarray(g, dtype=float)
    u = np.max(np.abs(fv - gv), axis=-1)
    out = u * (u + lambda_supra)
    return float(out) if np.ndim(out) == 0 else out


class _Discretized:
    """Quadrature-discretized operator; cached per problem."""

    def __init__(self, problem: FredholmProblem):
        self.problem = problem
        self.nodes = problem.nodes
        self.weights = quadrature_weights(self.nodes, problem.rule)
        self.matrix = problem.kernel_matrix() * self.weights[None, :]
        self.g = problem.g_values()

    def apply(self, values: np.ndarray) -> np.ndarray:
        return values @ self.matrix.T + self.g


def apply_operator(problem: FredholmProblem, f: GridFunction, _disc: _Discretized | None = None) -> GridFunction:
    """``(Tf)(x_i) = g(x_i) + sum_j w_j K(x_i, t_j) f(t_j)``."""
    disc = _disc or _Discretized(problem)
    if not isinstance(f, GridFunction):
        raise FredholmError("f must be a GridFunction")
    if len(f.nodes) != len(disc.nodes) or not np.allclose(f.nodes, disc.nodes, rtol=0, atol=1e-12):
        raise FredholmError("f is not sampled on the problem grid")
    return GridFunction(disc.nodes, disc.apply(f.values))


class FunctionSpace:
    """Grid functions with the sup-norm suprametric; points are value arrays."""

    def __init__(self, nodes: np.ndarray, lambda_supra: float):
        self.nodes = nodes
        self.lambda_supra = lambda_supra
        self.rho = poly_rho(lambda_supra)

    def distance(self, p, q):
        return supra_distance(p, q, self.lambda_supra)

    def contains(self, p) -> bool:
        arr = np.asarray(p)
        return arr.shape[-1:] == self.nodes.shape and bool(np.all(np.isfinite(arr)))

    def describe(self, p) -> str:
        return f"<grid function, sup {float(np.max(np.abs(p))):.6g}>"


def operator_map(problem: FredholmProblem) -> SelfMap:
    """The discretized operator as a :class:`SelfMap` on value arrays."""
    disc = _Discretized(problem)
    space = FunctionSpace(disc.nodes, problem.lambda_supra)
    return SelfMap(space, disc.apply, "T")


@dataclass(frozen=True)
class Solution:
    solution: GridFunction
    trace: OrbitTrace
    certificate: Certificate
    residual_sup: float
    sup_steps: np.ndarray  # ||f_{n+1} - f_n|| per iteration


def solve(problem: FredholmProblem, stop: StoppingCriteria = StoppingCriteria(200, 1e-13),
          f0=None, allow_invalid: bool = False, divergence_window: int = 10) -> Solution:
    """Picard iteration ``f_{n+1} = T f_n`` from ``f0`` (default zero).

    Stops once the sup-norm step ``||f_{n+1} - f_n||`` is at most
    ``stop.displacement_tol``.  Trace distances are suprametric.
    """
    cert = certify(problem)
    if not cert.valid and not allow_invalid:
        raise CertificateError(cert)
    disc = _Discretized(problem)
    lam = problem.lambda_supra
    f = np.zeros(problem.grid_n) if f0 is None else _values_of(f0, disc.nodes)
    points = [f]
    disps = []
    steps = []
    converged = False
    reason = "max_iters"
    for _ in range(stop.max_iters):
        nxt = disc.apply(f)
        step = float(np.max(np.abs(nxt - f)))
        if not np.isfinite(step):
            raise DivergenceError("iterate became non-finite", make_trace(points, disps, False, np.inf, "diverged"))
        steps.append(step)
        disps.append(step * (step + lam))
        points.append(nxt)
        f = nxt
        if step <= stop.displacement_tol:
            converged, reason = True, "displacement_tol"
            break
        w = divergence_window
        if len(steps) > w and all(steps[-i] > steps[-i - 1] for i in range(1, w + 1)) and steps[-1] > 1e3 * steps[-w - 1]:
            trace = make_trace(points, disps, False, supra_distance(disc.apply(f), f, lam), "diverged")
            raise DivergenceError(f"sup-norm step grew for {w} consecutive iterations", trace)
    tf = disc.apply(f)
    residual_sup = float(np.max(np.abs(tf - f)))
    trace = make_trace(points, disps, converged, residual_sup * (residual_sup + lam), reason)
    return Solution(GridFunction(disc.nodes, f), trace, cert, residual_sup, np.asarray(steps))


def _values_of(f0, nodes) -> np.ndarray:
    if isinstance(f0, GridFunction):
        return np.asarray(f0.values, dtype=float)
    if callable(f0):
        return np.broadcast_to(np.asarray(f0(nodes), dtype=float), nodes.shape).copy()
    arr = np.asarray(f0, dtype=float)
    if arr.ndim == 0:
        return np.full(nodes.shape, float(arr))
    if arr.shape != nodes.shape:
        raise FredholmError("initial iterate is not sampled on the problem grid")
    return arr.copy()


def separable_oracle(phi: Callable, psi: Callable, g: Callable | None, problem: FredholmProblem,
                     nodes=None) -> GridFunction:
    """Closed-form solution for ``K(x, t) = phi(x) psi(t)``.

    ``f(x) = g(x) + c phi(x)`` with ``c = int psi g / (1 - int psi phi)``;
    both integrals by adaptive Gauss-Kronrod quadrature.
    """
    g = g or (lambda x: 0.0 * x)
    a, b = problem.a, problem.b
    opts = dict(epsabs=1e-14, epsrel=1e-13, limit=200)
    psi_phi, _ = integrate.quad(lambda t: float(psi(t) * phi(t)), a, b, **opts)
    psi_g, _ = integrate.quad(lambda t: float(psi(t) * g(t)), a, b, **opts)
    denom = 1.0 - psi_phi
    if abs(denom) < 1e-9:
        raise FredholmError(f"resonant kernel: 1 - int psi phi = {denom:.3g}")
    c = psi_g / denom
    x = problem.nodes if nodes is None else np.asarray(nodes, dtype=float)
    values = np.broadcast_to(g(x) + c * phi(x), x.shape).astype(float)
    return GridFunction(x, values)


# ---------------------------------------------------------------------------
# File formats


def problem_from_dict(data: dict) -> FredholmProblem:
    """``a``, ``b``, ``kernel_expr`` or ``kernel_grid``, optional ``g_expr``,
    ``grid_n``, ``rule``, ``lambda_supra``."""
    if not isinstance(data, dict):
        raise FredholmError("problem file must hold a JSON object")
    try:
        a, b = float(data["a"]), float(data["b"])
    except KeyError as exc:
        raise FredholmError(f"problem file is missing {exc.args[0]!r}") from None
    grid_n = int(data.get("grid_n", 101))
    if "kernel_expr" in data:
        src = data["kernel_expr"]
        tree = kexpr.parse(src)
        kernel = lambda x, t, _tree=tree: kexpr.evaluate(_tree, x, t)  # noqa: E731
    elif "kernel_grid" in data:
        src = None
        kernel = np.asarray(data["kernel_grid"], dtype=float)
    else:
        raise FredholmError("problem file needs 'kernel_expr' or 'kernel_grid'")
    g = None
    g_src = data.get("g_expr")
    if g_src is not None:
        g_tree = kexpr.parse(g_src)
        if kexpr.variables(g_tree) - {"x"}:
            raise FredholmError("g_expr may only use x")
        g = lambda x, _tree=g_tree: kexpr.evaluate(_tree, x)  # noqa: E731
    return FredholmProblem(a, b, kernel, g, grid_n, data.get("rule", "trapezoid"),
                           float(data.get("lambda_supra", 1.0)), src, g_src)


def load_problem(path: str | Path) -> FredholmProblem:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FredholmError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    return problem_from_dict(data)


def solution_csv(f: GridFunction) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x", "f"])
    for x, v in zip(f.nodes, f.values):
        writer.writerow([repr(float(x)), repr(float(v))])
    return buf.getvalue()

"""Suprametric spaces: finite distance matrices and distances on an interval.

A suprametric satisfies the relaxed triangle inequality

    d(x, y) <= d(x, z) + d(z, y) + rho * d(x, z) * d(z, y)

for a fixed ``rho >= 0``; ``rho = 0`` is an ordinary metric.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

DEFAULT_TOL = 1e-9


class SpaceError(ValueError):
    """Malformed space data (shape, sign, identity or symmetry)."""


class DomainError(ValueError):
    """A point falls outside the space; ``point`` holds the offender."""

    def __init__(self, message: str, point=None):
        self.point = point
        super().__init__(message)


@dataclass(frozen=True)
class FiniteSpace:
    """Finite suprametric space; points are integer indices into ``labels``."""

    labels: tuple[str, ...]
    dist: np.ndarray
    rho: float = 0.0

    def __post_init__(self):
        d = np.array(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise SpaceError(f"distance matrix must be square, got shape {d.shape}")
        if d.shape[0] != len(self.labels):
            raise SpaceError(f"{len(self.labels)} labels for a {d.shape[0]}x{d.shape[0]} matrix")
        if len(set(self.labels)) != len(self.labels):
            raise SpaceError("point labels must be unique")
        if np.any(d < 0):
            i, j = np.argwhere(d < 0)[0]
            raise SpaceError(f"negative distance d[{i}][{j}] = {d[i, j]}")
        if not np.all(np.isfinite(d)):
            raise SpaceError("distances must be finite")
        if self.rho < 0 or not math.isfinite(self.rho):
            raise SpaceError(f"rho must be a finite nonnegative number, got {self.rho}")
        d.setflags(write=False)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "dist", d)
        object.__setattr__(self, "rho", float(self.rho))

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise DomainError(f"unknown point {label!r}", label) from None

    def distance(self, p, q):
        return self.dist[p, q]

    def contains(self, p) -> bool:
        p = np.asarray(p)
        return bool(np.all((p >= 0) & (p < self.size) & (p == np.round(p))))

    def points(self) -> np.ndarray:
        return np.arange(self.size)

    def describe(self, p) -> str:
        return self.labels[int(p)]

    def with_rho(self, rho: float) -> "FiniteSpace":
        return replace(self, rho=rho)


@dataclass(frozen=True)
class IntervalSpace:
    """The interval ``[a, b]`` with a distance of one of three forms.

    ``absolute``: ``|x - y|``; ``poly``: ``|x - y| (|x - y| + param)``;
    ``exponential``: ``param * (exp(|x - y|) - 1)``.
    """

    a: float
    b: float
    form: str = "absolute"
    param: float | None = None
    rho: float = 0.0
    slack: float = field(default=1e-12, repr=False)

    def __post_init__(self):
        if not self.a < self.b:
            raise SpaceError(f"need a < b, got [{self.a}, {self.b}]")
        if self.form not in ("absolute", "poly", "exponential"):
            raise SpaceError(f"unknown distance form {self.form!r}")
        if self.form != "absolute" and (self.param is None or self.param <= 0):
            raise SpaceError(f"{self.form} form needs a positive parameter")
        if self.rho < 0:
            raise SpaceError(f"rho must be nonnegative, got {self.rho}")

    def distance(self, p, q):
        u = np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))
        if self.form == "poly":
            out = u * (u + self.param)
        elif self.form == "exponential":
            out = self.param * np.expm1(u)
        else:
            out = u
        return float(out) if np.ndim(out) == 0 else out

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all((p >= self.a - self.slack) & (p <= self.b + self.slack)))

    def grid(self, n: int) -> np.ndarray:
        return np.linspace(self.a, self.b, n)

    def describe(self, p) -> str:
        return repr(float(p))


@dataclass(frozen=True)
class AxiomReport:
    identity_ok: bool
    symmetry_ok: bool
    supra_ok: bool
    violations: list = field(default_factory=list)  # [((i, k, j), defect)]
    minimal_rho: float = 0.0

    @property
    def ok(self) -> bool:
        return self.identity_ok and self.symmetry_ok and self.supra_ok


def _identity_symmetry(d: np.ndarray) -> tuple[bool, bool]:
    n = d.shape[0]
    off = ~np.eye(n, dtype=bool)
    identity = bool(np.all(np.diag(d) == 0) and np.all(d[off] > 0))
    symmetry = bool(np.array_equal(d, d.T))
    return identity, symmetry


def _defects(d: np.ndarray, rho: float) -> np.ndarray:
    """defect[i, k, j] = d[i,j] - d[i,k] - d[k,j] - rho d[i,k] d[k,j]."""
    dik = d[:, :, None]
    dkj = d[None, :, :]
    return d[:, None, :] - dik - dkj - rho * dik * dkj


def check_axioms(space: FiniteSpace, tol: float = DEFAULT_TOL) -> AxiomReport:
    """Exhaustively check identity, symmetry and the suprametric inequality.

    Every triple ``(i, k, j)`` whose defect exceeds ``tol`` is reported as a
    violation, in lexicographic index order.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    d = space.dist
    identity, symmetry = _identity_symmetry(d)
    defects = _defects(d, space.rho)
    bad = np.argwhere(defects > tol)
    violations = [((int(i), int(k), int(j)), float(defects[i, k, j])) for i, k, j in bad]
    rho_star = _minimal_rho(d) if symmetry else float("nan")
    return AxiomReport(identity, symmetry, not violations, violations, rho_star)


def _minimal_rho(d: np.ndarray) -> float:
    dik = d[:, :, None]
    dkj = d[None, :, :]
    prod = dik * dkj
    excess = d[:, None, :] - dik - dkj
    mask = prod > 0
    if not np.any(mask):
        return 0.0
    return max(0.0, float(np.max(excess[mask] / prod[mask])))


def minimal_rho(space: FiniteSpace | np.ndarray) -> float:
    """Smallest ``rho`` for which the distance matrix is a suprametric.

    The maximum over triples with ``d[i,k] d[k,j] > 0`` of
    ``(d[i,j] - d[i,k] - d[k,j]) / (d[i,k] d[k,j])``, clamped at zero.
    """
    d = space.dist if isinstance(space, FiniteSpace) else np.asarray(space, dtype=float)
    identity, symmetry = _identity_symmetry(d)
    if not identity:
        raise SpaceError("identity axiom fails: need zero diagonal and positive off-diagonal")
    if not symmetry:
        raise SpaceError("distance matrix is not symmetric")
    return _minimal_rho(d)


def binding_triple(space: FiniteSpace) -> tuple[int, int, int] | None:
    """Lexicographically smallest triple attaining :func:`minimal_rho`, if any is positive."""
    d = space.dist
    prod = d[:, :, None] * d[None, :, :]
    excess = d[:, None, :] - d[:, :, None] - d[None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(prod > 0, excess / prod, -np.inf)
    best = ratio.max()
    if not best > 0:
        return None
    i, k, j = np.argwhere(ratio == best)[0]
    return int(i), int(k), int(j)


def _assert_metric(space, tol: float) -> None:
    if isinstance(space, FiniteSpace):
        report = check_axioms(space.with_rho(0.0), tol)
        if not report.ok:
            raise SpaceError("input is not a metric space (check_axioms with rho = 0 fails)")
    elif space.form != "absolute":
        raise SpaceError("interval input must use the absolute distance")


def poly_rho(lambda_supra: float) -> float:
    """Suprametric constant of ``d1 (d1 + lambda_supra)`` over a metric ``d1``.

    With ``a = d1(x,z)``, ``b = d1(z,y)`` the inequality needs
    ``2ab <= rho * a(a + lam) * b(b + lam)``, i.e. ``rho >= 2 / ((a + lam)(b + lam))``,
    whose supremum over ``a, b > 0`` is ``2 / lam**2``.  ``2 / lam`` suffices
    only when ``lam >= 1``.
    """
    if not lambda_supra > 0:
        raise ValueError(f"lambda_supra must be positive, got {lambda_supra}")
    return max(2.0 / lambda_supra, 2.0 / lambda_supra**2)


def from_metric_poly(metric, lambda_supra: float, tol: float = DEFAULT_TOL):
    """Map a metric ``d1`` to ``d1 (d1 + lambda_supra)``.

    The output carries ``rho = max(2 / lambda_supra, 2 / lambda_supra**2)``
    (see :func:`poly_rho`), which is ``2 / lambda_supra`` for ``lambda_supra >= 1``.
    """
    rho = poly_rho(lambda_supra)
    _assert_metric(metric, tol)
    if isinstance(metric, IntervalSpace):
        return IntervalSpace(metric.a, metric.b, "poly", lambda_supra, rho)
    d1 = metric.dist
    return FiniteSpace(metric.labels, d1 * (d1 + lambda_supra), rho)


def from_metric_exp(metric: FiniteSpace, alpha_exp: float, tol: float = DEFAULT_TOL) -> FiniteSpace:
    """Map a metric ``d1`` to ``alpha_exp * (exp(d1) - 1)``.

    The resulting ``rho`` is the computed minimal constant for the new matrix.
    """
    if not alpha_exp > 0:
        raise ValueError(f"alpha_exp must be positive, got {alpha_exp}")
    _assert_metric(metric, tol)
    d = alpha_exp * np.expm1(metric.dist)
    return FiniteSpace(metric.labels, d, _minimal_rho(d))


def d_transform(d_value, rho: float):
    """``d / (1 + rho d)``: a bounded distance Lipschitz-equivalent to ``d`` on bounded sets."""
    return d_value / (1.0 + rho * d_value)


def sample_triple_defects(space: IntervalSpace, n: int, rng: np.random.Generator) -> np.ndarray:
    """Suprametric defects of ``n`` uniform random triples in an interval space."""
    x, y, z = rng.uniform(space.a, space.b, size=(3, n))
    dxz = space.distance(x, z)
    dzy = space.distance(z, y)
    return space.distance(x, y) - dxz - dzy - space.rho * dxz * dzy


# ---------------------------------------------------------------------------
# File format


def space_to_dict(space) -> dict:
    if isinstance(space, FiniteSpace):
        return {"points": list(space.labels), "rho": space.rho, "d": space.dist.tolist()}
    out = {"interval": [space.a, space.b], "form": space.form, "rho": space.rho}
    if space.param is not None:
        out["param"] = space.param
    return out


def space_from_dict(data: dict):
    """Build a space from its JSON form.

    Finite: ``{"points": [...], "rho": r, "d": [[...]]}``.
    Interval: ``{"interval": [a, b], "form": ..., "param": ..., "rho": r}``.
    """
    if not isinstance(data, dict):
        raise SpaceError("space file must hold a JSON object")
    try:
        if "points" in data:
            return FiniteSpace(tuple(str(p) for p in data["points"]), data["d"], float(data.get("rho", 0.0)))
        if "interval" in data:
            a, b = data["interval"]
            return IntervalSpace(float(a), float(b), data.get("form", "absolute"),
                                 data.get("param"), float(data.get("rho", 0.0)))
    except (KeyError, TypeError) as exc:
        raise SpaceError(f"malformed space file: {exc}") from exc
    raise SpaceError("space file needs either 'points' and 'd', or 'interval'")


def load_space(path: str | Path):
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SpaceError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    return space_from_dict(data)

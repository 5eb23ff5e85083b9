"""Contraction hypotheses, their verifiers, and continuity-type diagnostics.

Every verifier evaluates an inequality ``lhs <= rate * rhs`` over an explicit
set of ordered pairs and returns a :class:`VerificationReport`.  On
continuous domains a "satisfied" verdict only covers the tested pairs.

Pairs are given as ``(xs, ys)``: two equal-length batches of points.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .maps import SelfMap
from .space import FiniteSpace

DEFAULT_TOL = 1e-9

KINDS = ("banach", "convex_m", "ciric", "sehgal", "ciric_variant", "fisher")


class SpecError(ValueError):
    """A contraction specification with out-of-range parameters."""


@dataclass(frozen=True)
class ContractionSpec:
    """One contraction hypothesis.

    ``params`` keys by kind: banach ``alpha``; convex_m ``coeffs``;
    ciric/sehgal ``lambda`` plus ``n_map``; ciric_variant ``lambda``, ``n``;
    fisher ``lambda``, ``p``, ``q``.  ``n_map`` is an int (constant), a
    mapping from point label to int, or a callable.
    """

    kind: str
    params: Mapping = field(default_factory=dict)
    n_map: object = None

    def __post_init__(self):
        validate_spec(self)

    @property
    def rate(self) -> float:
        if self.kind == "banach":
            return float(self.params["alpha"])
        if self.kind == "convex_m":
            return float(sum(self.params["coeffs"]))
        return float(self.params["lambda"])


def _rate_ok(name: str, value) -> None:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise SpecError(f"{name} must be a number, got {value!r}") from None
    if not (0.0 <= v < 1.0):
        raise SpecError(f"{name} must lie in [0, 1), got {v}")


def _positive_int(name: str, value) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
        raise SpecError(f"{name} must be a positive integer, got {value!r}")


def validate_spec(spec: ContractionSpec) -> None:
    p = spec.params
    try:
        if spec.kind == "banach":
            _rate_ok("alpha", p["alpha"])
        elif spec.kind == "convex_m":
            coeffs = list(p["coeffs"])
            if not coeffs:
                raise SpecError("convex_m needs at least one coefficient")
            if any(float(a) < 0 for a in coeffs):
                raise SpecError("convex_m coefficients must be nonnegative")
            _rate_ok("sum of coeffs", sum(float(a) for a in coeffs))
        elif spec.kind in ("ciric", "sehgal"):
            _rate_ok("lambda", p["lambda"])
            if spec.n_map is None:
                raise SpecError(f"{spec.kind} needs an n_map")
            if isinstance(spec.n_map, (int, np.integer)):
                _positive_int("n", spec.n_map)
            elif isinstance(spec.n_map, Mapping):
                for label, n in spec.n_map.items():
                    _positive_int(f"n({label})", n)
        elif spec.kind == "ciric_variant":
            _rate_ok("lambda", p["lambda"])
            _positive_int("n", p["n"])
        elif spec.kind == "fisher":
            _rate_ok("lambda", p["lambda"])
            _positive_int("p", p["p"])
            _positive_int("q", p["q"])
        else:
            raise SpecError(f"unknown contraction kind {spec.kind!r}; expected one of {KINDS}")
    except KeyError as exc:
        raise SpecError(f"{spec.kind} spec is missing parameter {exc.args[0]!r}") from None


@dataclass(frozen=True)
class Witness:
    x: object
    y: object
    lhs: float
    rhs_max: float
    ratio: float


@dataclass(frozen=True)
class VerificationReport:
    condition: str
    verdict: str  # "satisfied" | "violated"
    pairs_tested: int
    worst_ratio: float
    rate: float
    tol: float
    witnesses: list = field(default_factory=list)
    worst_pair: tuple | None = None

    @property
    def satisfied(self) -> bool:
        return self.verdict == "satisfied"


# ---------------------------------------------------------------------------
# Helpers


def cartesian(points_x, points_y) -> tuple[np.ndarray, np.ndarray]:
    """All ordered pairs, x-major: ``(x0,y0), (x0,y1), ...``."""
    px = np.asarray(points_x)
    py = np.asarray(points_y)
    xs = np.repeat(px, len(py), axis=0)
    ys = np.tile(py, (len(px),) + (1,) * (py.ndim - 1))
    return xs, ys


def all_pairs(space: FiniteSpace) -> tuple[np.ndarray, np.ndarray]:
    pts = space.points()
    return cartesian(pts, pts)


def sample_pairs(a: float, b: float, n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """``n`` uniform random ordered pairs in ``[a, b]`` from a seeded generator."""
    rng = np.random.default_rng(seed)
    xs, ys = rng.uniform(a, b, size=(2, n))
    return xs, ys


def _as_pairs(test_pairs) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(test_pairs, tuple) and len(test_pairs) == 2:
        xs, ys = (np.asarray(v) for v in test_pairs)
    else:
        seq = list(test_pairs)
        if not seq:
            raise ValueError("empty test set")
        xs = np.asarray([p[0] for p in seq])
        ys = np.asarray([p[1] for p in seq])
    if len(xs) == 0:
        raise ValueError("empty test set")
    if len(xs) != len(ys):
        raise ValueError(f"pair batches differ in length: {len(xs)} vs {len(ys)}")
    return xs, ys


def _dist(space, p, q) -> np.ndarray:
    return np.asarray(space.distance(p, q), dtype=float)


def _ratios(lhs: np.ndarray, bound: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(bound > 0, lhs / np.where(bound > 0, bound, 1.0), np.where(lhs > 0, np.inf, 0.0))
    return r


def _point_value(p):
    arr = np.asarray(p)
    if arr.ndim == 0:
        return arr.item()
    return arr.copy()


def _build_report(condition, xs, ys, lhs, rhs, rate, tol) -> VerificationReport:
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    bound = rate * rhs
    ratio = _ratios(lhs, bound)
    bad = np.flatnonzero(lhs > bound + tol)
    witnesses = [
        Witness(_point_value(xs[i]), _point_value(ys[i]), float(lhs[i]), float(rhs[i]), float(ratio[i]))
        for i in bad
    ]
    worst_idx = int(np.argmax(ratio))  # first maximum: smallest pair index
    return VerificationReport(
        condition=condition,
        verdict="violated" if witnesses else "satisfied",
        pairs_tested=len(lhs),
        worst_ratio=float(ratio[worst_idx]),
        rate=float(rate),
        tol=tol,
        witnesses=witnesses,
        worst_pair=(_point_value(xs[worst_idx]), _point_value(ys[worst_idx])),
    )


def _check_rate(name: str, value: float) -> None:
    try:
        _rate_ok(name, value)
    except SpecError as exc:
        raise ValueError(str(exc)) from None


def resolve_n(n_map, space, points) -> np.ndarray:
    """Per-point iterate counts for a batch of points."""
    count = len(points)
    if isinstance(n_map, (int, np.integer)) and not isinstance(n_map, bool):
        return np.full(count, int(n_map))
    if isinstance(n_map, Mapping):
        out = np.empty(count, dtype=int)
        for i, p in enumerate(points):
            key = space.labels[int(p)] if isinstance(space, FiniteSpace) else float(p)
            if key not in n_map:
                raise KeyError(f"n_map has no entry for point {key!r}")
            out[i] = n_map[key]
        return out
    if callable(n_map):
        return np.array([int(n_map(_point_value(p))) for p in points], dtype=int)
    raise TypeError(f"unsupported n_map {n_map!r}")


def _iterates(T: SelfMap, p, n: int) -> list:
    return T.orbit(p, n)


# ---------------------------------------------------------------------------
# Quantities


def m_value(T: SelfMap, x, y, n: int) -> float:
    """Largest of ``d(x, T^i y)`` and ``d(x, T^j x)`` for ``0 <= i, j <= n``."""
    space = T.space
    oy = _iterates(T, y, n)
    ox = _iterates(T, x, n)
    terms = [_dist(space, x, q) for q in oy] + [_dist(space, x, q) for q in ox]
    return float(np.max(terms))


def _m_batch(T: SelfMap, xs, ys, n: int, include_j0: bool = True):
    space = T.space
    ox = _iterates(T, xs, n)
    oy = _iterates(T, ys, n)
    terms = [_dist(space, xs, q) for q in oy]
    terms += [_dist(space, xs, q) for q in ox[(0 if include_j0 else 1):]]
    return np.max(np.stack(terms), axis=0), ox[n], oy[n]


# ---------------------------------------------------------------------------
# Verifiers


def verify_banach(T: SelfMap, test_pairs, alpha: float, tol: float = DEFAULT_TOL) -> VerificationReport:
    """``d(Tx, Ty) <= alpha d(x, y)`` on every tested pair."""
    _check_rate("alpha", alpha)
    xs, ys = _as_pairs(test_pairs)
    space = T.space
    lhs = _dist(space, T.apply_checked(xs), T.apply_checked(ys))
    rhs = _dist(space, xs, ys)
    return _build_report("banach", xs, ys, lhs, rhs, alpha, tol)


def verify_convex_m(T: SelfMap, test_pairs, coeffs, tol: float = DEFAULT_TOL) -> VerificationReport:
    """Convex contraction of order ``m = len(coeffs)``:
    ``d(T^m x, T^m y) <= sum_i a_i d(T^i x, T^i y)``.

    The report's ``rate`` is 1 and ``rhs_max`` is the weighted sum.
    """
    coeffs = [float(a) for a in coeffs]
    if not coeffs:
        raise ValueError("coeffs must be nonempty")
    if any(a < 0 for a in coeffs):
        raise ValueError("coeffs must be nonnegative")
    _check_rate("sum of coeffs", sum(coeffs))
    xs, ys = _as_pairs(test_pairs)
    m = len(coeffs)
    space = T.space
    ox = _iterates(T, xs, m)
    oy = _iterates(T, ys, m)
    rhs = sum(a * _dist(space, ox[i], oy[i]) for i, a in enumerate(coeffs))
    lhs = _dist(space, ox[m], oy[m])
    return _build_report("convex_m", xs, ys, lhs, np.broadcast_to(rhs, lhs.shape), 1.0, tol)


def _grouped(xs, ns, evaluate: Callable[[np.ndarray, int], tuple]):
    lhs = np.empty(len(xs))
    rhs = np.empty(len(xs))
    for n in np.unique(ns):
        idx = np.flatnonzero(ns == n)
        lo, hi = evaluate(idx, int(n))
        lhs[idx] = lo
        rhs[idx] = hi
    return lhs, rhs


def verify_ciric(T: SelfMap, test_points_x, test_points_y, lam: float, n_map,
                 tol: float = DEFAULT_TOL) -> VerificationReport:
    """Quasi-contraction with point-dependent iterate count ``n(x)``:
    ``d(T^n x, T^n y) <= lam * M(x, y)`` where ``M`` is :func:`m_value` at ``n = n(x)``.

    All ordered pairs of ``test_points_x`` x ``test_points_y`` are checked.
    """
    _check_rate("lambda", lam)
    xs, ys = cartesian(test_points_x, test_points_y)
    return _ciric_pairs(T, xs, ys, lam, n_map, tol)


def _ciric_pairs(T: SelfMap, xs, ys, lam, n_map, tol) -> VerificationReport:
    if len(xs) == 0:
        raise ValueError("empty test set")
    ns = resolve_n(n_map, T.space, xs)

    def evaluate(idx, n):
        m, txn, tyn = _m_batch(T, xs[idx], ys[idx], n)
        return _dist(T.space, txn, tyn), m

    lhs, rhs = _grouped(xs, ns, evaluate)
    return _build_report("ciric", xs, ys, lhs, rhs, lam, tol)


def verify_sehgal(T: SelfMap, test_pairs, lam: float, n_map, tol: float = DEFAULT_TOL) -> VerificationReport:
    """``d(T^{n(x)} y, T^{n(x)} x) <= lam d(y, x)``."""
    _check_rate("lambda", lam)
    xs, ys = _as_pairs(test_pairs)
    ns = resolve_n(n_map, T.space, xs)
    space = T.space

    def evaluate(idx, n):
        return _dist(space, T.power(ys[idx], n), T.power(xs[idx], n)), _dist(space, ys[idx], xs[idx])

    lhs, rhs = _grouped(xs, ns, evaluate)
    return _build_report("sehgal", xs, ys, lhs, rhs, lam, tol)


def verify_ciric_variant(T: SelfMap, test_pairs, lam: float, n: int,
                         tol: float = DEFAULT_TOL) -> VerificationReport:
    """Fixed-``n`` quasi-contraction: ``d(T^n x, T^n y) <= lam * max`` of
    ``d(x, y)``, ``d(x, T^i y)`` (1 <= i <= n) and ``d(x, T^j x)`` (1 <= j <= n)."""
    _check_rate("lambda", lam)
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    xs, ys = _as_pairs(test_pairs)
    m, txn, tyn = _m_batch(T, xs, ys, int(n), include_j0=False)
    lhs = _dist(T.space, txn, tyn)
    return _build_report("ciric_variant", xs, ys, lhs, m, lam, tol)


def verify_fisher(T: SelfMap, test_pairs, lam: float, p: int, q: int,
                  tol: float = DEFAULT_TOL) -> VerificationReport:
    """``d(T^p x, T^q y) <= lam * max`` over ``d(T^i x, T^j y)``, ``d(T^i x, T^i' x)``,
    ``d(T^j y, T^j' y)`` for ``0 <= i, i' <= p`` and ``0 <= j, j' <= q``."""
    _check_rate("lambda", lam)
    for name, v in (("p", p), ("q", q)):
        if isinstance(v, bool) or int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v!r}")
    xs, ys = _as_pairs(test_pairs)
    space = T.space
    ox = _iterates(T, xs, p)
    oy = _iterates(T, ys, q)
    terms = [_dist(space, a, b) for a in ox for b in oy]
    terms += [_dist(space, ox[i], ox[k]) for i in range(p + 1) for k in range(i + 1, p + 1)]
    terms += [_dist(space, oy[j], oy[k]) for j in range(q + 1) for k in range(j + 1, q + 1)]
    rhs = np.max(np.stack(terms), axis=0)
    lhs = _dist(space, ox[p], oy[q])
    return _build_report("fisher", xs, ys, lhs, rhs, lam, tol)


def verify(spec: ContractionSpec, T: SelfMap, test_pairs, tol: float = DEFAULT_TOL) -> VerificationReport:
    """Dispatch on ``spec.kind``; every kind is checked on exactly the given pairs."""
    p = spec.params
    if spec.kind == "banach":
        return verify_banach(T, test_pairs, p["alpha"], tol)
    if spec.kind == "convex_m":
        return verify_convex_m(T, test_pairs, p["coeffs"], tol)
    if spec.kind == "ciric":
        _check_rate("lambda", p["lambda"])
        xs, ys = _as_pairs(test_pairs)
        return _ciric_pairs(T, xs, ys, p["lambda"], spec.n_map, tol)
    if spec.kind == "sehgal":
        return verify_sehgal(T, test_pairs, p["lambda"], spec.n_map, tol)
    if spec.kind == "ciric_variant":
        return verify_ciric_variant(T, test_pairs, p["lambda"], p["n"], tol)
    return verify_fisher(T, test_pairs, p["lambda"], p["p"], p["q"], tol)


# ---------------------------------------------------------------------------
# Diagnostics


@dataclass(frozen=True)
class Diagnostic:
    holds: bool
    premise: bool
    measured: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.holds


def trailing_window(count: int, fraction: float = 0.2, minimum: int = 5) -> slice:
    """Last ``fraction`` of a sequence, at least ``minimum`` entries (or all of it)."""
    size = max(minimum, math.ceil(fraction * count))
    return slice(max(0, count - size), count)


def _orbit_points(orbit) -> list:
    return list(orbit.points) if hasattr(orbit, "points") else list(orbit)


def check_k_continuity(T: SelfMap, sequence, limit_z, k: int, tol: float = DEFAULT_TOL,
                       window: slice | None = None) -> Diagnostic:
    """If ``T^{k-1} x_n -> z`` on the tail, test whether ``T^k x_n -> Tz``.

    Returns vacuous truth (``premise=False``) when the tail does not approach ``z``.
    """
    seq = list(sequence)
    if not seq:
        raise ValueError("sequence must be nonempty")
    if k < 1:
        raise ValueError("k must be a positive integer")
    space = T.space
    tail = np.asarray(seq[window or trailing_window(len(seq))])
    before = T.power(tail, k - 1, check=False)
    after = T(before)
    tz = T(np.asarray(limit_z))
    gap_premise = float(np.max(_dist(space, before, np.broadcast_to(limit_z, np.shape(before)))))
    gap_image = float(np.max(_dist(space, after, np.broadcast_to(tz, np.shape(after)))))
    premise = gap_premise <= tol
    holds = (gap_image <= tol) if premise else True
    return Diagnostic(holds, premise, {"premise_gap": gap_premise, "image_gap": gap_image, "k": k})


def check_orbital_lsc(T: SelfMap, orbit, limit_z, tol: float = DEFAULT_TOL,
                      window: slice | None = None) -> Diagnostic:
    """``D(z) <= min over the trailing window of D(x_n)`` with ``D(x) = d(x, Tx)``."""
    pts = _orbit_points(orbit)
    if not pts:
        raise ValueError("orbit must be nonempty")
    tail = np.asarray(pts[window or trailing_window(len(pts))])
    disp_tail = np.asarray(T.displacement(tail), dtype=float)
    dz = float(T.displacement(np.asarray(limit_z)))
    liminf = float(np.min(disp_tail))
    return Diagnostic(dz <= liminf + tol, True, {"displacement_at_limit": dz, "tail_min": liminf})


def check_condition_C(T: SelfMap, orbit, limit_z, k: float, tol: float = DEFAULT_TOL,
                      window: slice | None = None) -> Diagnostic:
    """``D(z) <= k * max over the trailing window of D(x_n)``."""
    pts = _orbit_points(orbit)
    if not pts:
        raise ValueError("orbit must be nonempty")
    if k < 0:
        raise ValueError("k must be nonnegative")
    tail = np.asarray(pts[window or trailing_window(len(pts))])
    disp_tail = np.asarray(T.displacement(tail), dtype=float)
    dz = float(T.displacement(np.asarray(limit_z)))
    limsup = float(np.max(disp_tail))
    return Diagnostic(dz <= k * limsup + tol, True,
                      {"displacement_at_limit": dz, "tail_max": limsup, "k": k})


# ---------------------------------------------------------------------------
# File format


def spec_from_dict(data: dict) -> ContractionSpec:
    """``{"kind": ..., "params": {...}, "n_map": int | {label: int}}``."""
    if not isinstance(data, dict) or "kind" not in data:
        raise SpecError("contraction spec needs a 'kind'")
    params = dict(data.get("params", {}))
    n_map = data.get("n_map")
    if isinstance(n_map, dict):
        n_map = dict(n_map)
    return ContractionSpec(data["kind"], params, n_map)


def spec_to_dict(spec: ContractionSpec) -> dict:
    out = {"kind": spec.kind, "params": dict(spec.params)}
    if spec.n_map is not None and not callable(spec.n_map):
        out["n_map"] = dict(spec.n_map) if isinstance(spec.n_map, Mapping) else int(spec.n_map)
    return out


def load_spec(path: str | Path) -> ContractionSpec:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    return spec_from_dict(data)


__all__ = [
    "ContractionSpec", "SpecError", "VerificationReport", "Witness", "Diagnostic",
    "cartesian", "all_pairs", "sample_pairs", "m_value",
    "verify", "verify_banach", "verify_convex_m", "verify_ciric", "verify_sehgal",
    "verify_ciric_variant", "verify_fisher",
    "check_k_continuity", "check_orbital_lsc", "check_condition_C", "trailing_window",
    "spec_from_dict", "spec_to_dict", "load_spec",
]

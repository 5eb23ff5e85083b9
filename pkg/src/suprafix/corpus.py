"""Worked examples as executable fixtures.

Each fixture bundles a space, a self-map, a contraction hypothesis and a list
of expected facts.  A fact is a named check returning ``(passed, detail)``.
Facts of kind ``discrepancy`` encode behaviour that contradicts a stated
claim; they pass when the measured behaviour (the counter-witness) is
reproduced.  Facts of kind ``finding`` only report a measurement.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import contraction as cx
from . import picard
from .maps import SelfMap, fixed_points_on, map_to_dict
from .space import (FiniteSpace, IntervalSpace, check_axioms, from_metric_exp, minimal_rho,
                    space_to_dict)

LN2, LN3, LN4 = math.log(2), math.log(3), math.log(4)


@dataclass(frozen=True)
class Fact:
    name: str
    kind: str  # "check" | "discrepancy" | "finding"
    check: Callable[[], tuple[bool, str]]


@dataclass(frozen=True)
class FactResult:
    name: str
    kind: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class Fixture:
    name: str
    space: object
    map: SelfMap
    spec: cx.ContractionSpec | None
    expected: list = field(default_factory=list)
    start: object = None
    description: str = ""

    def run(self) -> list[FactResult]:
        out = []
        for fact in self.expected:
            try:
                passed, detail = fact.check()
            except Exception as exc:  # a crashing fact is a failing fact
                passed, detail = False, f"{type(exc).__name__}: {exc}"
            out.append(FactResult(fact.name, fact.kind, bool(passed), detail))
        return out

    def passed(self) -> bool:
        return all(r.passed for r in self.run())


def _close(a: float, b: float, tol: float = 1e-12) -> bool:
    return abs(a - b) <= tol


# ---------------------------------------------------------------------------
# Five-point space with an exponential transform


def five_point_metric() -> FiniteSpace:
    labels = ("x", "y", "z", "w", "t")
    idx = {p: i for i, p in enumerate(labels)}
    d = np.zeros((5, 5))

    def put(p, q, v):
        d[idx[p], idx[q]] = d[idx[q], idx[p]] = v

    for q in "yzwt":
        put("x", q, LN2)
    put("w", "t", LN2)
    for q in "wt":
        put(q, "z", LN3)
    for q in "zwt":
        put(q, "y", LN4)
    return FiniteSpace(labels, d, 0.0)


def example_5pt(alpha_exp: float = 1.0) -> Fixture:
    metric = five_point_metric()
    space = from_metric_exp(metric, alpha_exp)
    T = SelfMap.finite(space, {"x": "y", "y": "z", "z": "w", "w": "w", "t": "y"})
    coeffs = (0.3, 0.3, 0.3)
    spec = cx.ContractionSpec("convex_m", {"coeffs": list(coeffs)})
    w = space.index("w")

    def metric_ok():
        r = check_axioms(metric)
        return r.ok, f"d1 with rho = 0: {len(r.violations)} violations"

    def cube_constant():
        images = T.power(space.points(), 3)
        return bool(np.all(images == w)), f"T^3 images: {[space.labels[i] for i in images]}"

    def convex():
        rep = cx.verify_convex_m(T, cx.all_pairs(space), coeffs)
        return rep.satisfied and rep.worst_ratio == 0.0, f"{rep.verdict}, worst ratio {rep.worst_ratio}"

    def fixed_w():
        tr = picard.iterate(T, space.index("t"), picard.StoppingCriteria(20, 0.0))
        unique = [space.labels[i] for i in fixed_points_on(T, space.points())]
        return tr.converged and tr.final == w and unique == ["w"], f"orbit from t ends at {space.labels[tr.final]}; fixed points {unique}"

    def transformed():
        r = check_axioms(space)
        values = sorted({float(v) for v in np.round(space.dist[np.triu_indices(5, 1)], 12)})
        return r.ok and values == [1.0, 2.0, 3.0], f"distances {values}, rho = {space.rho:.12g}"

    return Fixture(
        "example_5pt", space, T, spec,
        [
            Fact("d1 is a metric", "check", metric_ok),
            Fact("exponential transform is a suprametric with distances {1,2,3}", "check", transformed),
            Fact("T^3 is constant at w", "check", cube_constant),
            Fact("convex contraction of order 3 with coeffs (0.3,0.3,0.3)", "check", convex),
            Fact("w is the unique fixed point and the orbit from t reaches it", "check", fixed_w),
        ],
        start="t",
        description="five points, exponential transform of a log-valued metric",
    )


# ---------------------------------------------------------------------------
# Four-point quasi-contraction


def four_point_space(rho: float = 1.0) -> FiniteSpace:
    d = np.ones((4, 4)) - np.eye(4)
    d[0, 1] = d[1, 0] = 3.0
    return FiniteSpace(("x", "y", "z", "w"), d, rho)


FOUR_POINT_N = {"x": 2, "y": 2, "z": 3, "w": 3}


def example_4pt_ciric() -> Fixture:
    space = four_point_space(1.0)
    T = SelfMap.finite(space, {"x": "y", "y": "z", "z": "z", "w": "x"})
    spec = cx.ContractionSpec("ciric", {"lambda": 1 / 3}, dict(FOUR_POINT_N))
    pts = space.points()

    def supra():
        return check_axioms(space, 0.0).ok, "rho = 1"

    def not_metric():
        r = check_axioms(space.with_rho(0.0), 0.0)
        triples = [tuple(space.labels[i] for i in t) for t, _ in r.violations]
        return (not r.supra_ok) and ("x", "z", "y") in triples, f"metric witnesses {triples}"

    def rho_star():
        v = minimal_rho(space)
        return v == 1.0, f"minimal rho = {v}"

    def ciric():
        rep = cx.verify_ciric(T, pts, pts, 1 / 3, FOUR_POINT_N, tol=1e-12)
        return rep.satisfied and _close(rep.worst_ratio, 1.0), f"{rep.verdict}, worst ratio {rep.worst_ratio!r}"

    def reaches_z():
        z = space.index("z")
        ends = {}
        for p in pts:
            tr = picard.iterate(T, p, picard.StoppingCriteria(10, 0.0))
            first = next(i for i, q in enumerate(tr.points) if q == z)
            ends[space.labels[p]] = first
        return all(v <= 3 for v in ends.values()), f"steps to z: {ends}"

    return Fixture(
        "example_4pt_ciric", space, T, spec,
        [
            Fact("suprametric with rho = 1", "check", supra),
            Fact("not a metric, witness (x, z, y)", "check", not_metric),
            Fact("minimal rho is 1", "check", rho_star),
            Fact("quasi-contraction with lambda = 1/3 holds, worst ratio 1", "check", ciric),
            Fact("every orbit reaches z within 3 steps", "check", reaches_z),
        ],
        start="w",
        description="four points, d(x,y) = 3, others 1",
    )


# ---------------------------------------------------------------------------
# Tx = x/3 on [0, 2] with the polynomial suprametric

INTERVAL_T3_LAMBDA = 29 / 729


def interval_t3_space() -> IntervalSpace:
    return IntervalSpace(0.0, 2.0, "poly", 1.0, 2.0)


def example_interval_T3(grid: int = 50) -> Fixture:
    space = interval_t3_space()
    T = SelfMap.from_expr(space, "x/3")
    spec = cx.ContractionSpec("ciric", {"lambda": INTERVAL_T3_LAMBDA}, 3)
    pts = space.grid(grid)

    def ciric():
        rep = cx.verify_ciric(T, pts, pts, INTERVAL_T3_LAMBDA, 3, tol=1e-12)
        return rep.satisfied, f"{rep.verdict} on {rep.pairs_tested} pairs, worst ratio {rep.worst_ratio:.6g}"

    def displayed():
        v = space.distance(2.0, T.power(2.0, 3))
        return _close(v, 52 * 79 / 729), f"d(2, T^3 2) = {v!r}"

    def converges():
        tr = picard.iterate(T, 2.0, picard.StoppingCriteria(40, 0.0))
        hit = next((n for n, p in enumerate(tr.points) if T.displacement(p) < 1e-12), None)
        return hit is not None and hit <= 40, f"residual < 1e-12 after {hit} steps"

    def fixed_zero():
        return T(0.0) == 0.0 and T.displacement(0.0) == 0.0, "T(0) = 0"

    return Fixture(
        "example_interval_T3", space, T, spec,
        [
            Fact(f"quasi-contraction with n = 3, lambda = 29/729 on a {grid}x{grid} grid", "check", ciric),
            Fact("d(2, T^3 2) = 52*79/729", "check", displayed),
            Fact("orbit from 2 reaches residual < 1e-12 within 40 steps", "check", converges),
            Fact("0 is a fixed point", "check", fixed_zero),
        ],
        start=2.0,
        description="Tx = x/3 on [0, 2], d = |x-y|(|x-y|+1), rho = 2",
    )


# ---------------------------------------------------------------------------
# Map without a fixed point


def no_fixed_point_space() -> IntervalSpace:
    return IntervalSpace(0.0, 2.0, "absolute", None, 0.5)


def no_fixed_point_map(space: IntervalSpace | None = None) -> SelfMap:
    return SelfMap.from_expr(space or no_fixed_point_space(), "x/2", {0.0: 2.0})


def halving_orbit(T: SelfMap, x0: float = 1.0, steps: int = 60) -> picard.OrbitTrace:
    return picard.iterate(T, x0, picard.StoppingCriteria(steps, 0.0))


def example_no_fixed_point() -> Fixture:
    space = no_fixed_point_space()
    T = no_fixed_point_map(space)
    spec = cx.ContractionSpec("ciric_variant", {"lambda": 0.5, "n": 2})

    def no_fp():
        grid = space.grid(10_000)
        found = fixed_points_on(T, grid, 1e-12)
        return len(found) == 0, f"{len(found)} fixed points on a 10^4 grid"

    def not_k_continuous():
        seq = [2.0 / 2**n for n in range(60)]
        results = {k: cx.check_k_continuity(T, seq, 0.0, k, tol=1e-9) for k in (1, 2, 3)}
        return all(r.premise and not r.holds for r in results.values()), \
            ", ".join(f"k={k}: {r.holds}" for k, r in results.items())

    def not_lsc():
        d = cx.check_orbital_lsc(T, halving_orbit(T), 0.0)
        return (not d.holds) and d.measured["displacement_at_limit"] == 2.0, f"D(0) = {d.measured['displacement_at_limit']}"

    def not_condition_c():
        orbit = halving_orbit(T)
        results = {k: cx.check_condition_C(T, orbit, 0.0, k) for k in (1, 10, 10**6)}
        return all(not r.holds for r in results.values()), ", ".join(f"k={k}: {r.holds}" for k, r in results.items())

    def variant_witness():
        rep = cx.verify_ciric_variant(T, (np.array([0.1]), np.array([0.0])), 0.5, 2)
        if rep.satisfied:
            return False, "no witness at (0.1, 0)"
        wit = rep.witnesses[0]
        margin = wit.lhs - 0.5 * wit.rhs_max
        return margin >= 0.02, f"lhs {wit.lhs:.6g} vs bound {0.5 * wit.rhs_max:.6g} (margin {margin:.6g})"

    def variant_region():
        xs = np.linspace(0.0, 0.2, 41)[1:-1]
        rep = cx.verify_ciric_variant(T, (xs, np.zeros_like(xs)), 0.5, 2)
        return not rep.satisfied, f"{len(rep.witnesses)} of {rep.pairs_tested} pairs (x, 0), 0 < x < 0.2, violate"

    return Fixture(
        "example_no_fixed_point", space, T, spec,
        [
            Fact("no fixed point on a 10^4 grid", "check", no_fp),
            Fact("not k-continuous for k = 1, 2, 3", "check", not_k_continuous),
            Fact("displacement not orbitally lower semicontinuous, D(0) = 2", "check", not_lsc),
            Fact("condition (C;k) fails for k = 1, 10, 10^6", "check", not_condition_c),
            Fact("fixed-n quasi-contraction (lambda 1/2, n 2) violated at (0.1, 0)", "discrepancy", variant_witness),
            Fact("violations throughout the region x in (0, 0.2), y = 0", "discrepancy", variant_region),
        ],
        start=1.0,
        description="Tx = x/2 for x != 0, T0 = 2 on [0, 2], rho = 1/2",
    )


# ---------------------------------------------------------------------------
# Order-2 convex contraction on [0, 1]


def istratescu_map(space: IntervalSpace | None = None) -> SelfMap:
    return SelfMap.from_expr(space or IntervalSpace(0.0, 1.0), "(x^2 + 1/2)^2")


def istratescu_subdomain_end() -> float:
    """Largest x in [0, 1] with T(x) and T(T(x)) both in [0, 1]."""
    return math.sqrt(math.sqrt(math.sqrt(0.5)) - 0.5)


def example_istratescu(coeffs=(0.5, 0.4)) -> Fixture:
    space = IntervalSpace(0.0, 1.0, "absolute", None, 0.0)
    T = istratescu_map(space)
    spec = cx.ContractionSpec("convex_m", {"coeffs": list(coeffs)})

    def values():
        a, b = T(0.0), T(0.25)
        return _close(a, 0.25) and _close(b, 0.31640625), f"T(0) = {a}, T(0.25) = {b}"

    def self_map_fails():
        grid = space.grid(1001)
        images = T(grid)
        outside = grid[images > space.b]
        return len(outside) > 0 and T(1.0) == 2.25, f"T(1) = {T(1.0)}; {len(outside)} grid points map outside [0, 1], first at x = {outside[0]:.4f}"

    def fixed_point_scan():
        grid = space.grid(10_001)
        gap = T(grid) - grid
        return True, f"min of T(x) - x on the grid: {gap.min():.6g} at x = {grid[gap.argmin()]:.4f} ({'no' if gap.min() > 0 else 'a'} fixed point found)"

    def convex_on_subdomain():
        end = istratescu_subdomain_end()
        pts = np.linspace(0.0, end, 60)
        rep = cx.verify_convex_m(T, cx.cartesian(pts, pts), coeffs)
        return True, f"coeffs {tuple(coeffs)} on [0, {end:.4f}]: {rep.verdict}, worst ratio {rep.worst_ratio:.4g}"

    def displayed_identity():
        pts = np.linspace(0.0, istratescu_subdomain_end(), 40)
        xs, ys = cx.cartesian(pts, pts)
        lhs = np.abs(T(T(xs)) - T(T(ys)))
        rhs = (xs**2 + ys**2) / 4 * np.abs(T(xs) - T(ys)) + (xs + ys) / 8 * np.abs(xs - ys)
        return True, f"max |lhs - rhs| of the displayed identity: {np.max(np.abs(lhs - rhs)):.4g}"

    return Fixture(
        "example_istratescu", space, T, spec,
        [
            Fact("T(0) = 0.25 and T(0.25) = 0.31640625", "check", values),
            Fact("T is not a self-map of [0, 1] (T(1) = 2.25)", "discrepancy", self_map_fails),
            Fact("grid scan for fixed points", "finding", fixed_point_scan),
            Fact("order-2 convex contraction on the invariant sub-domain", "finding", convex_on_subdomain),
            Fact("claimed identity for |T^2 x - T^2 y|", "finding", displayed_identity),
        ],
        start=0.0,
        description="T(x) = (x^2 + 1/2)^2 on [0, 1]",
    )


FIXTURES = {
    "example_5pt": example_5pt,
    "example_4pt_ciric": example_4pt_ciric,
    "example_interval_T3": example_interval_T3,
    "example_no_fixed_point": example_no_fixed_point,
    "example_istratescu": example_istratescu,
}


def get(name: str) -> Fixture:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; available: {', '.join(FIXTURES)}") from None


def all_fixtures() -> list[Fixture]:
    return [factory() for factory in FIXTURES.values()]


def export_fixture(fixture: Fixture, directory: str | Path) -> dict[str, Path]:
    """Write ``space.json``, ``map.json`` and ``spec.json`` (and ``start.txt``) for CLI replay."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "space": (out / "space.json", space_to_dict(fixture.space)),
        "map": (out / "map.json", map_to_dict(fixture.map)),
    }
    if fixture.spec is not None:
        files["spec"] = (out / "spec.json", cx.spec_to_dict(fixture.spec))
    written = {}
    for key, (path, data) in files.items():
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
        written[key] = path
    if fixture.start is not None:
        path = out / "start.txt"
        path.write_text(f"{fixture.start}\n")
        written["start"] = path
    return written

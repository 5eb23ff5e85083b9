"""Command-line front end.

Exit codes: 0 success, 1 verification failure (witnesses printed),
2 input or validation error, 3 non-convergence, 4 certificate refusal.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import contraction as cx
from . import corpus, fredholm, kexpr, picard
from .maps import load_map
from .space import DomainError, FiniteSpace, SpaceError, check_axioms, load_space

EXIT_OK = 0
EXIT_VIOLATED = 1
EXIT_INPUT = 2
EXIT_NONCONVERGENT = 3
EXIT_REFUSED = 4

MAX_WITNESSES = 10

INPUT_ERRORS = (SpaceError, cx.SpecError, fredholm.FredholmError, kexpr.ExprSyntaxError,
                DomainError, FileNotFoundError, IsADirectoryError, json.JSONDecodeError)


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def _describe(space, p) -> str:
    if isinstance(space, FiniteSpace):
        return space.labels[int(p)]
    return _fmt(float(p))


# ---------------------------------------------------------------------------
# verify-space


def cmd_verify_space(args) -> int:
    space = load_space(args.space_file)
    if not isinstance(space, FiniteSpace):
        print("verify-space needs a finite space file (points, rho, d)", file=sys.stderr)
        return EXIT_INPUT
    report = check_axioms(space, args.tol)
    print(f"points: {space.size}, rho = {_fmt(space.rho)}")
    print(f"identity: {'ok' if report.identity_ok else 'FAILED'}")
    print(f"symmetry: {'ok' if report.symmetry_ok else 'FAILED'}")
    print(f"suprametric inequality: {'ok' if report.supra_ok else 'FAILED'}")
    if report.symmetry_ok:
        print(f"minimal rho = {_fmt(report.minimal_rho)}")
    for (i, k, j), defect in report.violations[:MAX_WITNESSES]:
        a, b, c = (space.labels[v] for v in (i, k, j))
        print(f"  witness ({a}, {b}, {c}): d({a},{c}) exceeds the bound by {_fmt(defect)}")
    if len(report.violations) > MAX_WITNESSES:
        print(f"  ... {len(report.violations) - MAX_WITNESSES} more")
    return EXIT_OK if report.ok else EXIT_VIOLATED


# ---------------------------------------------------------------------------
# verify-contraction


def _test_points(space, grid: int, samples: int, seed: int) -> np.ndarray:
    if isinstance(space, FiniteSpace):
        return space.points()
    pts = space.grid(grid)
    if samples:
        rng = np.random.default_rng(seed)
        pts = np.concatenate([pts, rng.uniform(space.a, space.b, samples)])
    return pts


def cmd_verify_contraction(args) -> int:
    space = load_space(args.space_file)
    T = load_map(space, args.map_file)
    spec = cx.load_spec(args.spec_file)
    if args.grid < 2 or args.samples < 0:
        raise cx.SpecError("--grid must be at least 2 and --samples nonnegative")
    pts = _test_points(space, args.grid, args.samples, args.seed)
    pairs = cx.cartesian(pts, pts)
    report = cx.verify(spec, T, pairs, args.tol)
    print(f"condition: {spec.kind}")
    print(f"pairs tested: {report.pairs_tested}")
    print(f"verdict: {report.verdict}")
    print(f"worst ratio = {report.worst_ratio!r}")
    wx, wy = report.worst_pair
    print(f"worst pair: ({_describe(space, wx)}, {_describe(space, wy)})")
    for w in report.witnesses[:MAX_WITNESSES]:
        print(f"  witness ({_describe(space, w.x)}, {_describe(space, w.y)}): "
              f"lhs = {_fmt(w.lhs)}, rate*max = {_fmt(report.rate * w.rhs_max)}, ratio = {_fmt(w.ratio)}")
    if len(report.witnesses) > MAX_WITNESSES:
        print(f"  ... {len(report.witnesses) - MAX_WITNESSES} more")
    return EXIT_OK if report.satisfied else EXIT_VIOLATED


# ---------------------------------------------------------------------------
# orbit


def _parse_start(space, text: str):
    if isinstance(space, FiniteSpace):
        return space.index(text)
    try:
        x0 = float(text)
    except ValueError:
        raise DomainError(f"start {text!r} is not a number", text) from None
    if not space.contains(x0):
        raise DomainError(f"start {x0} lies outside [{space.a}, {space.b}]", x0)
    return x0


def _parse_bounds(text: str | None):
    if text is None:
        return None
    try:
        m_text, alpha_text = text.split(",")
        m, alpha = int(m_text), float(alpha_text)
    except ValueError:
        raise cx.SpecError(f"--bounds expects 'm,alpha', got {text!r}") from None
    if m < 1 or not 0 <= alpha < 1:
        raise cx.SpecError("--bounds needs m >= 1 and alpha in [0, 1)")
    return m, alpha


def limit_residual(T, space, final, tol: float) -> float:
    """Displacement at the limit candidate snapped to a grid of spacing ``sqrt(tol)``.

    Finite spaces use the final point as is.
    """
    if isinstance(space, FiniteSpace) or tol <= 0:
        return float(T.displacement(final))
    h = math.sqrt(tol)
    z = min(max(round(float(final) / h) * h, space.a), space.b)
    return float(T.displacement(z))


def cmd_orbit(args) -> int:
    space = load_space(args.space_file)
    T = load_map(space, args.map_file)
    if args.start is None:
        print("orbit needs --start", file=sys.stderr)
        return EXIT_INPUT
    x0 = _parse_start(space, args.start)
    bounds = _parse_bounds(args.bounds)
    stop = picard.StoppingCriteria(args.max_iters, args.tol)
    trace = picard.iterate(T, x0, stop, bound=bounds)
    describe = lambda p: _describe(space, p)  # noqa: E731
    if args.out:
        Path(args.out).write_text(picard.trace_csv(trace, describe))
    print(f"steps: {trace.steps}, stop: {trace.stop_reason}")
    print(f"final point: {describe(trace.final)}")
    print(f"residual d(x, Tx) = {_fmt(trace.residual)}")
    code = EXIT_OK
    if bounds is not None:
        m, alpha = bounds
        rep = picard.verify_trace_bounds(trace, m, alpha)
        print(f"a-priori bound (m = {m}, alpha = {_fmt(alpha)}, mu = {_fmt(rep.mu)}): "
              f"{len(rep.violations)} violations over {rep.checked} steps")
        for n, disp, b in rep.violations[:MAX_WITNESSES]:
            print(f"  step {n}: displacement {_fmt(disp)} > bound {_fmt(b)}")
        if rep.violations:
            code = EXIT_VIOLATED
    if not trace.converged:
        print("did not converge within --max-iters")
        return EXIT_NONCONVERGENT
    at_limit = limit_residual(T, space, trace.final, args.tol)
    if isinstance(space, FiniteSpace):
        fixed = at_limit == 0.0
    else:
        fixed = at_limit <= 10 * math.sqrt(args.tol)
    if not fixed:
        print(f"limit is not a fixed point: d(z, Tz) = {_fmt(at_limit)} at the limit candidate")
        return EXIT_NONCONVERGENT
    return code


# ---------------------------------------------------------------------------
# solve-fredholm


def cmd_solve_fredholm(args) -> int:
    problem = fredholm.load_problem(args.problem_file)
    cert = fredholm.certify(problem)
    print(f"certificate: M = {_fmt(cert.M)}, L = {_fmt(cert.L)}, a0 = {_fmt(cert.a0)}, a1 = {_fmt(cert.a1)}, "
          f"{'valid' if cert.valid else 'INVALID'}")
    stop = picard.StoppingCriteria(args.max_iters, args.tol)
    try:
        sol = fredholm.solve(problem, stop, allow_invalid=args.allow_invalid_certificate)
    except fredholm.CertificateError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except fredholm.DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENT
    if args.out:
        Path(args.out).write_text(fredholm.solution_csv(sol.solution))
    if args.trace:
        describe = lambda f: _fmt(float(np.max(np.abs(f))))  # noqa: E731
        Path(args.trace).write_text(picard.trace_csv(sol.trace, describe))
    print(f"iterations: {sol.trace.steps}")
    print(f"residual sup|Tf - f| = {_fmt(sol.residual_sup)}")
    print(f"solution sup-norm = {_fmt(sol.solution.sup_norm())}")
    if not cert.valid:
        print("warning: certificate invalid (L >= 1); convergence is not guaranteed")
    return EXIT_OK if sol.residual_sup <= args.tol else EXIT_NONCONVERGENT


# ---------------------------------------------------------------------------
# corpus


def cmd_corpus(args) -> int:
    if args.list:
        for name, factory in corpus.FIXTURES.items():
            print(f"{name}: {factory().description}")
        return EXIT_OK
    if args.export:
        name, directory = args.export
        written = corpus.export_fixture(corpus.get(name), directory)
        for key, path in written.items():
            print(f"{key}: {path}")
        return EXIT_OK
    names = list(corpus.FIXTURES) if args.run_all else [args.run]
    failed = 0
    for name in names:
        fixture = corpus.get(name)
        results = fixture.run()
        ok = all(r.passed for r in results)
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        for r in results:
            tag = {"check": "", "discrepancy": " [discrepancy reproduced]", "finding": " [finding]"}[r.kind]
            if r.kind == "discrepancy" and not r.passed:
                tag = " [discrepancy NOT reproduced]"
            print(f"    {'ok ' if r.passed else 'BAD'} {r.name}{tag}: {r.detail}")
    if len(names) > 1:
        print(f"{len(names) - failed}/{len(names)} fixtures passed")
    return EXIT_OK if failed == 0 else EXIT_VIOLATED


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="suprafix", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-space", help="check suprametric axioms of a finite space file")
    p.add_argument("space_file")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_verify_space)

    p = sub.add_parser("verify-contraction", help="check a contraction hypothesis on a test set")
    p.add_argument("space_file")
    p.add_argument("map_file")
    p.add_argument("spec_file")
    p.add_argument("--grid", type=int, default=50, help="uniform grid size on interval spaces")
    p.add_argument("--samples", type=int, default=0, help="extra uniform random points")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_verify_contraction)

    p = sub.add_parser("orbit", help="run Picard iteration and export the trace")
    p.add_argument("space_file")
    p.add_argument("map_file")
    p.add_argument("--start")
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-12, help="displacement tolerance")
    p.add_argument("--bounds", help="m,alpha for the a-priori step bound")
    p.add_argument("--out", help="trace CSV path")
    p.set_defaults(func=cmd_orbit)

    p = sub.add_parser("solve-fredholm", help="solve a Fredholm equation of the second kind")
    p.add_argument("problem_file")
    p.add_argument("--out", help="solution CSV path")
    p.add_argument("--trace", help="trace CSV path")
    p.add_argument("--allow-invalid-certificate", action="store_true")
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-12, help="sup-norm step tolerance")
    p.set_defaults(func=cmd_solve_fredholm)

    p = sub.add_parser("corpus", help="run the worked-example fixtures")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--list", action="store_true")
    group.add_argument("--run", metavar="NAME")
    group.add_argument("--run-all", action="store_true")
    group.add_argument("--export", nargs=2, metavar=("NAME", "DIR"))
    p.set_defaults(func=cmd_corpus)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_INPUT
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

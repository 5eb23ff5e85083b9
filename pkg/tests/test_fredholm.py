import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from suprafix import fredholm as fh
from suprafix.fredholm import (CertificateError, DivergenceError, FredholmError, FredholmProblem, GridFunction,
                               apply_operator, certify, kernel_bound, quadrature_weights, separable_oracle, solve,
                               supra_distance)
from suprafix.picard import StoppingCriteria


def const_kernel(c):
    return lambda x, t: c + 0.0 * x * t


def sep_problem(n=201, rule="simpson"):
    return FredholmProblem(0.0, 1.0, lambda x, t: x * t / 2, lambda x: x, n, rule)


# --- quadrature ------------------------------------------------------------------


@pytest.mark.parametrize("rule, degree", [("trapezoid", 1), ("simpson", 3)])
def test_quadrature_exact_on_polynomials(rule, degree):
    nodes = np.linspace(-1.0, 2.0, 21)
    w = quadrature_weights(nodes, rule)
    for k in range(degree + 1):
        exact = (2.0 ** (k + 1) - (-1.0) ** (k + 1)) / (k + 1)
        assert w @ nodes**k == pytest.approx(exact, abs=1e-12)


def test_quadrature_errors():
    with pytest.raises(FredholmError):
        quadrature_weights(np.linspace(0, 1, 10), "simpson")
    with pytest.raises(FredholmError):
        quadrature_weights(np.linspace(0, 1, 10), "gauss")
    with pytest.raises(FredholmError):
        quadrature_weights(np.array([0.0]))


# --- problem and grid functions -----------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(a=1.0, b=0.0, kernel=const_kernel(0.1)),
        dict(a=0.0, b=1.0, kernel=const_kernel(0.1), grid_n=1),
        dict(a=0.0, b=1.0, kernel=const_kernel(0.1), grid_n=10, rule="simpson"),
        dict(a=0.0, b=1.0, kernel=np.zeros((3, 3)), grid_n=4),
        dict(a=0.0, b=1.0, kernel=const_kernel(0.1), lambda_supra=0.0),
    ],
)
def test_problem_validation(kwargs):
    with pytest.raises(FredholmError):
        FredholmProblem(**kwargs)


def test_grid_function_validation():
    with pytest.raises(FredholmError):
        GridFunction([0.0, 1.0], [1.0])
    with pytest.raises(FredholmError):
        GridFunction([0.0, 0.0], [1.0, 2.0])
    f = GridFunction([0.0, 1.0], [0.0, 2.0])
    assert f(0.25) == 0.5 and f.sup_norm() == 2.0


# --- certificate -----------------------------------------------------------------------


@pytest.mark.parametrize(
    "kernel, expected",
    [(const_kernel(0.4), 0.4), (lambda x, t: x * t / 2, 0.5), (const_kernel(0.0), 0.0), (lambda x, t: -x * t, 1.0)],
)
def test_kernel_bound(kernel, expected):
    assert kernel_bound(FredholmProblem(0.0, 1.0, kernel, grid_n=11)) == pytest.approx(expected, abs=1e-15)


def test_certificate_values():
    c = certify(FredholmProblem(0.0, 1.0, const_kernel(0.4)))
    assert c.L == pytest.approx(0.4) and c.a0 == pytest.approx(0.16) and c.a1 == 0.0 and c.valid
    c = certify(FredholmProblem(0.0, 1.0, lambda x, t: x * t))
    assert c.L == 1.0 and not c.valid
    c = certify(FredholmProblem(0.0, 0.5, const_kernel(1.0)))
    assert c.L == 0.5 and c.valid


def test_certificate_from_grid_kernel():
    grid = np.full((5, 5), 0.3)
    grid[2, 3] = -0.7
    c = certify(FredholmProblem(0.0, 1.0, grid, grid_n=5))
    assert c.M == 0.7 and c.L == 0.7


# --- operator ---------------------------------------------------------------------------


@pytest.mark.parametrize("rule", ["trapezoid", "simpson"])
def test_operator_constant(rule):
    p = FredholmProblem(0.0, 1.0, const_kernel(0.4), grid_n=11, rule=rule)
    tf = apply_operator(p, GridFunction(p.nodes, np.ones(11)))
    np.testing.assert_allclose(tf.values, 0.4, rtol=0, atol=1e-15)


def test_operator_at_zero_is_g():
    p = sep_problem(11)
    tf = apply_operator(p, GridFunction(p.nodes, np.zeros(11)))
    np.testing.assert_array_equal(tf.values, p.nodes)
    hom = FredholmProblem(0.0, 1.0, const_kernel(0.4), grid_n=11)
    assert apply_operator(hom, GridFunction(hom.nodes, np.zeros(11))).sup_norm() == 0.0


def test_operator_fixes_separable_solution():
    p = sep_problem(21)
    f = GridFunction(p.nodes, 1.2 * p.nodes)
    np.testing.assert_allclose(apply_operator(p, f).values, f.values, atol=1e-14)
    trap = sep_problem(21, "trapezoid")
    assert np.max(np.abs(apply_operator(trap, f).values - f.values)) < 1e-3


def test_operator_grid_mismatch():
    p = sep_problem(11)
    with pytest.raises(FredholmError):
        apply_operator(p, GridFunction(np.linspace(0, 1, 12), np.zeros(12)))


@pytest.mark.parametrize("u, lam, expected", [(0.0, 1.0, 0.0), (1.0, 1.0, 2.0), (0.5, 2.0, 1.25)])
def test_supra_distance(u, lam, expected):
    nodes = np.linspace(0, 1, 5)
    f = GridFunction(nodes, np.sin(nodes))
    g = GridFunction(nodes, np.sin(nodes) + np.array([0, -u, u / 2, 0, 0]))
    assert supra_distance(f, g, lam) == pytest.approx(expected)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_one_step_lipschitz(seed):
    p = FredholmProblem(0.0, 1.0, lambda x, t: np.cos(3 * x * t) * 0.45, lambda x: x**2, 41)
    rng = np.random.default_rng(seed)
    f, g = rng.normal(0, 3, size=(2, 41))
    tf = apply_operator(p, GridFunction(p.nodes, f))
    tg = apply_operator(p, GridFunction(p.nodes, g))
    L = certify(p).L
    assert np.max(np.abs(tf.values - tg.values)) <= L * np.max(np.abs(f - g)) + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([0.5, 1.0, 3.0]))
def test_two_step_convex_condition(seed, lam):
    p = FredholmProblem(0.0, 1.0, lambda x, t: 0.3 * np.sin(x + t), lambda x: 1 - x, 31, lambda_supra=lam)
    T = fh.operator_map(p)
    rng = np.random.default_rng(seed)
    f, g = rng.normal(0, 2, size=(2, 31))
    a0 = certify(p).a0
    assert supra_distance(T(T(f)), T(T(g)), lam) <= a0 * supra_distance(f, g, lam) + 1e-12


def test_function_space_rho():
    assert fh.FunctionSpace(np.linspace(0, 1, 3), 1.0).rho == 2.0
    assert FredholmProblem(0.0, 1.0, const_kernel(0.1), lambda_supra=4.0).rho == 0.5


# --- solve ------------------------------------------------------------------------------------


def test_solve_homogeneous_geometric_decay():
    p = FredholmProblem(0.0, 1.0, const_kernel(0.4), None, 101)
    sol = solve(p, StoppingCriteria(60, 0.0), f0=1.0)
    norms = np.array([np.max(np.abs(v)) for v in sol.trace.points])
    np.testing.assert_allclose(norms, 0.4 ** np.arange(61), rtol=0, atol=1e-12)
    assert sol.solution.sup_norm() < 1e-10


def test_solve_zero_kernel_returns_g():
    p = FredholmProblem(0.0, 2.0, const_kernel(0.0), lambda x: np.exp(x), 9)
    sol = solve(p)
    np.testing.assert_array_equal(sol.solution.values, np.exp(p.nodes))
    assert sol.trace.steps == 2 and sol.residual_sup == 0.0


def test_solve_separable_matches_oracle():
    p = sep_problem()
    sol = solve(p)
    oracle = separable_oracle(lambda x: x, lambda t: t / 2, lambda x: x, p)
    assert np.max(np.abs(sol.solution.values - oracle.values)) < 1e-8
    np.testing.assert_allclose(oracle.values, 1.2 * p.nodes, atol=1e-13)
    assert sol.trace.converged


def test_solve_rate_matches_certificate():
    p = FredholmProblem(0.0, 1.0, const_kernel(0.4), lambda x: np.cos(x), 101)
    sol = solve(p, StoppingCriteria(200, 1e-13))
    ratios = sol.sup_steps[-10:] / sol.sup_steps[-11:-1]
    assert np.all(ratios <= 0.4 * 1.05)


def test_solve_trace_uses_suprametric():
    p = sep_problem(21)
    sol = solve(p, StoppingCriteria(5, 0.0))
    u = sol.sup_steps
    np.testing.assert_allclose(sol.trace.displacements, u * (u + 1.0))


def test_solve_refuses_invalid_certificate():
    p = FredholmProblem(0.0, 1.0, lambda x, t: x * t)
    with pytest.raises(CertificateError) as info:
        solve(p)
    assert info.value.certificate.L == 1.0


def test_solve_divergence_detected():
    p = FredholmProblem(0.0, 1.0, const_kernel(2.0), lambda x: 1 + 0 * x, 11)
    with pytest.raises(DivergenceError) as info:
        solve(p, StoppingCriteria(500, 1e-12), allow_invalid=True)
    assert info.value.trace.stop_reason == "diverged"


def test_solve_invalid_certificate_override_can_converge():
    # M (b - a) = 1 but the true operator norm is 1/3
    p = FredholmProblem(0.0, 1.0, lambda x, t: x * t, lambda x: x, 21, "simpson")
    sol = solve(p, allow_invalid=True)
    assert sol.trace.converged and not sol.certificate.valid
    np.testing.assert_allclose(sol.solution.values, 1.5 * p.nodes, atol=1e-12)


@pytest.mark.parametrize("rule, order", [("trapezoid", 4.0), ("simpson", 16.0)])
def test_grid_refinement_order(rule, order):
    def K(x, t):
        return 0.5 * np.exp(-((x - t) ** 2))

    def g(x):
        return np.sin(np.pi * x) + x

    sols = [solve(FredholmProblem(0.0, 1.0, K, g, n, rule), StoppingCriteria(500, 1e-15)).solution.values
            for n in (21, 41, 81)]
    e1 = np.max(np.abs(sols[0] - sols[1][::2]))
    e2 = np.max(np.abs(sols[1] - sols[2][::2]))
    assert e1 / e2 == pytest.approx(order, rel=0.05)


# --- oracle ------------------------------------------------------------------------------------


def test_separable_oracle_cases():
    p = sep_problem(11)
    zero = separable_oracle(lambda x: x, lambda t: t / 2, lambda x: 0 * x, p)
    assert np.all(zero.values == 0)
    same = separable_oracle(lambda x: 0 * x, lambda t: t, lambda x: x**2, p)
    np.testing.assert_allclose(same.values, p.nodes**2)
    with pytest.raises(FredholmError):
        separable_oracle(lambda x: 1 + 0 * x, lambda t: 1 + 0 * t, lambda x: x, p)


# --- files --------------------------------------------------------------------------------------


def test_problem_file(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"a": 0, "b": 1, "kernel_expr": "x*t/2", "g_expr": "x", "grid_n": 201,
                                "rule": "simpson"}))
    p = fh.load_problem(path)
    sol = solve(p)
    assert np.max(np.abs(sol.solution.values - 1.2 * p.nodes)) < 1e-10


def test_problem_file_grid_kernel():
    p = fh.problem_from_dict({"a": 0, "b": 1, "kernel_grid": [[0.4] * 3] * 3, "grid_n": 3})
    assert certify(p).L == pytest.approx(0.4)


@pytest.mark.parametrize(
    "data",
    [{"a": 0, "kernel_expr": "x"}, {"a": 0, "b": 1}, {"a": 0, "b": 1, "kernel_expr": "x", "g_expr": "t"}, []],
)
def test_problem_file_errors(data):
    with pytest.raises(FredholmError):
        fh.problem_from_dict(data)


def test_solution_csv():
    text = fh.solution_csv(GridFunction([0.0, 0.5, 1.0], [0.0, 0.6, 1.2]))
    assert text.splitlines() == ["x,f", "0.0,0.0", "0.5,0.6", "1.0,1.2"]

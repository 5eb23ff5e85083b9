import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from suprafix import picard
from suprafix.corpus import example_4pt_ciric, example_5pt, interval_t3_space
from suprafix.maps import SelfMap
from suprafix.picard import (StoppingCriteria, apriori_step_bound, cauchy_tail_bound, ciric_orbit_bound,
                             iterate, iterations_for_tolerance, make_trace, mu_initial, tail_sum,
                             transformed_factor, verify_trace_bounds)
from suprafix.space import DomainError, IntervalSpace

from oracles import brute_iterations, summed_tails


@pytest.fixture
def t3():
    return SelfMap.from_expr(interval_t3_space(), "x/3")


# --- iterate ---------------------------------------------------------------------


def test_four_point_orbit_from_w():
    fx = example_4pt_ciric()
    space, T = fx.space, fx.map
    tr = iterate(T, space.index("w"), StoppingCriteria(20, 0.0))
    assert [space.labels[p] for p in tr.points] == ["w", "x", "y", "z", "z"]
    assert tr.converged and tr.residual == 0.0
    assert list(tr.displacements) == [1.0, 3.0, 1.0, 0.0]


def test_orbit_from_fixed_point():
    fx = example_4pt_ciric()
    z = fx.space.index("z")
    tr = iterate(fx.map, z, StoppingCriteria(20, 0.0))
    assert tr.converged and tr.steps == 1
    assert set(tr.points) == {z}


def test_interval_orbit(t3):
    tr = iterate(t3, 2.0, StoppingCriteria(60, 1e-15))
    assert tr.displacements[0] == pytest.approx(28 / 9, abs=1e-15)
    assert np.all(np.diff(tr.displacements) < 0)
    for n, p in enumerate(tr.points[:20]):
        assert p == pytest.approx(2 / 3**n, rel=1e-14)
    assert tr.final < 1e-14


def test_max_iters_not_converged(t3):
    tr = iterate(t3, 2.0, StoppingCriteria(5, 0.0))
    assert not tr.converged and tr.steps == 5 and tr.stop_reason == "max_iters"
    assert len(tr.points) == 6


def test_cum_tail_is_suffix_sum(t3):
    tr = iterate(t3, 2.0, StoppingCriteria(30, 0.0))
    for n in range(tr.steps):
        assert tr.cum_tail[n] == pytest.approx(math.fsum(tr.displacements[n:]), rel=1e-12)


def test_start_outside_space(t3):
    with pytest.raises(DomainError):
        iterate(t3, 3.0)


def test_orbit_leaving_space():
    T = SelfMap.from_expr(IntervalSpace(0.0, 1.0), "x + 0.4")
    with pytest.raises(DomainError):
        iterate(T, 0.0, StoppingCriteria(10))


def test_tail_bound_stopping(t3):
    stop = StoppingCriteria(200, 0.0, 1e-9)
    tr = iterate(t3, 2.0, stop, bound=(3, 29 / 729))
    assert tr.converged and tr.stop_reason == "tail_bound_tol"
    # the certified remaining distance really is small
    assert tr.final < 1e-9


def test_thinning_keeps_all_displacements(t3):
    tr = iterate(t3, 2.0, StoppingCriteria(20, 0.0), thin=5)
    assert tr.steps == 20 and len(tr.points) == 5


def test_stopping_criteria_validation():
    with pytest.raises(ValueError):
        StoppingCriteria(0)
    with pytest.raises(ValueError):
        StoppingCriteria(10, -1.0)


# --- mu and step bounds ------------------------------------------------------------


def test_mu_from_displacements():
    tr = make_trace([0, 1, 2, 3], [1.0, 0.5, 0.25], False, 0.1)
    assert mu_initial(tr, 2) == 1.5


def test_mu_at_fixed_point():
    fx = example_4pt_ciric()
    tr = iterate(fx.map, fx.space.index("z"), StoppingCriteria(5, 0.0))
    for m in (1, 2, 4):
        assert mu_initial(tr, m) == 0.0


def test_mu_interval(t3):
    tr = iterate(t3, 2.0, StoppingCriteria(10, 0.0))
    assert mu_initial(tr, 2) == pytest.approx(28 / 9 + (4 / 9) * (13 / 9), abs=1e-14)


def test_mu_needs_enough_steps(t3):
    tr = iterate(t3, 2.0, StoppingCriteria(1, 0.0))
    with pytest.raises(ValueError):
        mu_initial(tr, 3)


@pytest.mark.parametrize("n, m, alpha, mu, expected", [(4, 2, 0.5, 1.0, 0.25), (0, 3, 0.7, 2.5, 2.5), (5, 3, 0.3, 2.0, 0.6)])
def test_apriori_step_bound(n, m, alpha, mu, expected):
    assert apriori_step_bound(n, m, alpha, mu) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("sigma, rho, expected", [(0.3, 0.0, 0.3), (0.5, 2.0, (math.e - 1) / 2), (0.0, 3.0, 0.0)])
def test_cauchy_tail_bound(sigma, rho, expected):
    assert cauchy_tail_bound(sigma, rho) == pytest.approx(expected, abs=1e-12)


def test_cauchy_tail_overflow_is_infinite():
    assert cauchy_tail_bound(1000.0, 5.0) == math.inf


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-9, 50) | st.just(0.0), st.floats(1e-9, 50), st.floats(0, 5), st.floats(0, 5))
def test_cauchy_tail_monotone(s1, s2, r1, r2):
    lo_s, hi_s = sorted((s1, s2))
    lo_r, hi_r = sorted((r1, r2))
    assert cauchy_tail_bound(lo_s, lo_r) <= cauchy_tail_bound(hi_s, lo_r)
    assert cauchy_tail_bound(lo_s, lo_r) <= cauchy_tail_bound(lo_s, hi_r) * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-6, 100))
def test_cauchy_tail_small_rho_continuity(sigma):
    assert abs(cauchy_tail_bound(sigma, 1e-13) - sigma) <= 1e-12 * max(1.0, sigma)
    assert cauchy_tail_bound(sigma, 1e-9) >= sigma


def test_tail_sum_matches_summation():
    rng = np.random.default_rng(11)
    for _ in range(200):
        alpha = rng.uniform(0, 0.95)
        mu = rng.uniform(0.01, 10)
        m = int(rng.integers(1, 6))
        tails = summed_tails(alpha, mu, m)
        for n in rng.integers(0, 40, size=5):
            want = tails[n] if n < len(tails) else 0.0
            assert tail_sum(int(n), m, alpha, mu) == pytest.approx(want, rel=1e-10, abs=1e-18 * mu)


# --- iterations_for_tolerance -------------------------------------------------------


@pytest.mark.parametrize(
    "eps, alpha, mu, m, rho, expected",
    [(0.01, 0.5, 1.0, 1, 0.0, 8), (100.0, 0.5, 1.0, 1, 0.0, 0), (0.5, 0.0, 1.0, 1, 0.0, 1)],
)
def test_iterations_for_tolerance_examples(eps, alpha, mu, m, rho, expected):
    assert iterations_for_tolerance(eps, alpha, mu, m, rho) == expected


def test_iterations_for_tolerance_against_summation():
    rng = np.random.default_rng(5)
    for _ in range(300):
        args = (10 ** rng.uniform(-8, 1), rng.uniform(0, 0.95), rng.uniform(1e-6, 10), int(rng.integers(1, 6)),
                rng.uniform(0, 5))
        assert iterations_for_tolerance(*args) == brute_iterations(*args), args


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-6, 1), st.floats(0, 0.9), st.floats(0.01, 5), st.integers(1, 4), st.floats(0, 3))
def test_iterations_minimal(eps, alpha, mu, m, rho):
    n = iterations_for_tolerance(eps, alpha, mu, m, rho)
    assert cauchy_tail_bound(tail_sum(n, m, alpha, mu), rho) < eps
    if n > 0:
        assert cauchy_tail_bound(tail_sum(n - 1, m, alpha, mu), rho) >= eps


def test_iterations_bad_input():
    with pytest.raises(ValueError):
        iterations_for_tolerance(0.0, 0.5, 1.0, 1, 0.0)
    with pytest.raises(ValueError):
        iterations_for_tolerance(0.1, 1.0, 1.0, 1, 0.0)


# --- trace bounds --------------------------------------------------------------------


def test_trace_bounds_on_convex_corpus_maps(t3):
    fx = example_5pt()
    for p in fx.space.points():
        tr = iterate(fx.map, p, StoppingCriteria(20, 0.0))
        assert verify_trace_bounds(tr, 3, 0.9).ok
    tr = iterate(t3, 2.0, StoppingCriteria(40, 0.0))
    assert verify_trace_bounds(tr, 3, 29 / 729).ok


def test_trace_bounds_constant_orbit():
    fx = example_4pt_ciric()
    tr = iterate(fx.map, fx.space.index("z"), StoppingCriteria(5, 0.0))
    rep = verify_trace_bounds(tr, 2, 0.5)
    assert rep.ok and rep.mu == 0.0


def test_trace_bounds_spike_detected():
    disp = [1.0, 0.5, 0.25, 0.125, 0.9, 0.03]
    tr = make_trace(list(range(7)), disp, False, 0.01)
    rep = verify_trace_bounds(tr, 1, 0.5)
    assert [v[0] for v in rep.violations] == [4]


# --- Ciric orbit constants ----------------------------------------------------------


@pytest.mark.parametrize("c0, rho, lam, expected", [(1.0, 0.0, 0.5, 2.0), (0.0, 3.0, 0.4, 0.0), (2.0, 1.0, 1 / 3, 9.0)])
def test_ciric_orbit_bound(c0, rho, lam, expected):
    assert ciric_orbit_bound(c0, rho, lam) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("lam, rho, c, expected", [(0.4, 0.0, 5.0, 0.4), (0.0, 2.0, 3.0, 0.0), (1 / 3, 1.0, 2.0, 0.6)])
def test_transformed_factor(lam, rho, c, expected):
    assert transformed_factor(lam, rho, c) == pytest.approx(expected, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 0.99), st.floats(0, 10), st.floats(0, 100))
def test_transformed_factor_below_one(lam, rho, c):
    assert lam - 1e-15 <= transformed_factor(lam, rho, c) < 1


def test_initial_orbit_constant_four_point():
    fx = example_4pt_ciric()
    c0, m = picard.initial_orbit_constant(fx.map, fx.space.index("w"), {"x": 2, "y": 2, "z": 3, "w": 3})
    assert m == 3 and c0 == 3.0


# --- CSV -------------------------------------------------------------------------------


def test_trace_csv_columns(t3):
    tr = iterate(t3, 2.0, StoppingCriteria(6, 0.0), bound=(3, 29 / 729))
    text = picard.trace_csv(tr)
    lines = text.splitlines()
    assert lines[0] == "n,point,displacement,bound,tail"
    assert len(lines) == 7
    first = lines[1].split(",")
    assert first[0] == "0" and first[3] == ""
    assert lines[4].split(",")[3] != ""
    assert picard.trace_csv(tr) == text

import csv
import math

import numpy as np
import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from superosc.core import (DomainError, ParameterRangeError, SuperoscSpec, binomial_coefficients,
                           build_box_state, eval_f, eval_f_sum, eval_psi, exact_coefficients,
                           growth_report, local_wavenumber, psi_product_form, superosc_region_report,
                           write_mode_table)

orders = st.integers(1, 60)
alphas = st.sampled_from([0.5, 1.5, 2.0, 2.5, 3.0, 4.0])


def test_first_order_is_plain_exponential():
    spec = SuperoscSpec(1, 1.0)
    assert exact_coefficients(spec) == [0, 1]
    assert abs(eval_f(spec, math.pi / 2) - 1j) < 1e-15


def test_second_order_coefficients_are_exact():
    assert exact_coefficients(SuperoscSpec(2, 3.0)) == [1, -4, 4]


@settings(max_examples=40, deadline=None)
@given(orders, alphas)
def test_coefficients_sum_to_one(n, alpha):
    assert sum(exact_coefficients(SuperoscSpec(n, alpha))) == 1


@settings(max_examples=25, deadline=None)
@given(orders, alphas)
def test_log_route_matches_exact_coefficients(n, alpha):
    spec = SuperoscSpec(n, alpha)
    for mode, c in zip(binomial_coefficients(spec), exact_coefficients(spec)):
        if c == 0:
            assert mode.coefficient == 0
        else:
            assert mode.coefficient == pytest.approx(float(c), rel=1e-11)
            assert mode.sign == (1 if c > 0 else -1)
        assert mode.wavenumber == pytest.approx(2 * mode.index / n - 1)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 60), alphas, st.floats(-1, 1))
def test_product_and_sum_forms_agree(n, alpha, frac):
    spec = SuperoscSpec(n, alpha)
    x = frac * spec.half_length
    a, b = eval_f(spec, x), eval_f_sum(spec, np.array([x]))[0]
    assert abs(a - b) <= 1e-10 * max(abs(a), 1.0)


def test_second_order_expansion_near_center():
    spec = SuperoscSpec(100, 4.0)
    # |f(x)| ~ exp(beta x^2) with beta = (alpha^2 - 1) / (2N)
    assert abs(eval_f(spec, 1.0)) == pytest.approx(math.exp(15 / 200), rel=2e-3)
    assert abs(eval_f(spec, 0.0) - 1) < 1e-15


def test_region_report_default_and_large_order():
    rep = superosc_region_report(SuperoscSpec(100, 4.0), 1.0)
    assert rep.max_deviation <= 0.15
    assert rep.wavenumber_error <= 0.02
    assert superosc_region_report(SuperoscSpec(400, 4.0), 1.0).max_deviation <= 0.04
    assert superosc_region_report(SuperoscSpec(100, 4.0), 0.0).max_deviation == 0.0


@settings(max_examples=25, deadline=None)
@given(st.integers(16, 200), st.sampled_from([2.0, 3.0, 4.0]), st.floats(0.05, 0.25))
def test_deviation_stays_within_quadratic_bound(n, alpha, frac):
    spec = SuperoscSpec(n, alpha)
    rep = superosc_region_report(spec, frac * math.sqrt(n))
    assert rep.max_deviation <= rep.quadratic_bound


def test_local_wavenumber_matches_finite_difference():
    spec = SuperoscSpec(100, 4.0)
    rep = superosc_region_report(spec, 2.0, n_points=4001)
    exact = local_wavenumber(spec, np.array([0.0, 2.0]))
    assert rep.wavenumber_max == pytest.approx(exact[0], rel=1e-5)
    assert rep.wavenumber_min == pytest.approx(exact[1], rel=1e-5)


@pytest.mark.parametrize("n", [50, 100, 200])
def test_growth_is_exponential_in_order(n):
    spec = SuperoscSpec(n, 4.0)
    rep = growth_report(spec)
    assert rep["log_ratio"] >= 0.9 * n * math.log(2.5)
    assert rep["log_ratio"] == pytest.approx(n * math.log(4.0), rel=1e-6)


def test_range_guard_and_domain():
    with pytest.raises(ParameterRangeError):
        SuperoscSpec(1000, 4.0)
    with pytest.raises(ParameterRangeError):
        SuperoscSpec(10, -1.0)
    spec = SuperoscSpec(10, 2.0)
    with pytest.raises(DomainError):
        eval_f(spec, spec.half_length * 1.01)


def test_box_state_normalized_and_band_limited():
    state = build_box_state(SuperoscSpec(100, 4.0))
    assert state.norm_residual() < 1e-12
    assert np.all(state.wavenumbers <= 1.0 + 1e-15)
    assert np.allclose(state.wavenumbers * 100, np.round(state.wavenumbers * 100))


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 1))
def test_box_state_odd_and_vanishing_at_walls(frac):
    state = build_box_state(SuperoscSpec(40, 3.0))
    x = frac * state.spec.half_length
    a, b = eval_psi(state, np.array([x, -x]))
    assert abs(a + b) <= 1e-12 * max(abs(a), 1e-300) + 1e-300
    walls = eval_psi(state, np.array([0.0, state.spec.half_length]))
    assert np.all(np.abs(walls) < 1e-10 * np.exp(state.spec.log_peak - state.log_norm))


def test_box_state_routes_agree_near_center():
    state = build_box_state(SuperoscSpec(100, 4.0))
    x = np.linspace(-3, 3, 31)
    assert np.allclose(eval_psi(state, x), psi_product_form(state, x), rtol=1e-9, atol=1e-300)


def test_box_state_looks_like_sine_near_center():
    state = build_box_state(SuperoscSpec(100, 4.0))
    x = np.linspace(-1, 1, 201)
    psi = eval_psi(state, x)
    ref = np.sin(4 * x)
    scale = np.dot(psi, ref) / np.dot(ref, ref)
    assert np.max(np.abs(psi / scale - ref)) <= 0.2


def test_mode_table_columns(tmp_path):
    path = tmp_path / "modes.csv"
    write_mode_table(path, binomial_coefficients(SuperoscSpec(4, 2.0)))
    rows = list(csv.DictReader(open(path)))
    assert list(rows[0]) == ["n", "k_n", "c_n", "log_abs_c_n", "sign"]
    assert len(rows) == 5
    assert float(rows[0]["c_n"]) == pytest.approx(float(mpq(1, 16)))

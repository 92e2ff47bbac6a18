import math

import numpy as np
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from superosc.box import gauss_legendre
from superosc.core import SuperoscSpec, build_box_state, psi_product_form
from superosc.precision import ExactSineSeries, exact, working_bits


def test_exact_is_lossless():
    assert exact(0.1) == mpq(0.1)
    assert float(exact(0.1)) == 0.1
    assert exact(3) == 3


def test_working_bits_tracks_coefficient_size():
    assert working_bits([mpq(2) ** 200, -mpq(2) ** 200]) >= 201
    assert working_bits([mpq(2) ** 200], quadratic=True) >= 400


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 40), st.integers(0, 3),
                          st.floats(-2, 2, allow_nan=False)), min_size=1, max_size=8),
       st.floats(-30, 30), st.floats(0, 5))
def test_sample_matches_double_for_benign_coefficients(modes, x, t):
    ks = [mpq(m, 7) for m, _, _ in modes]
    series = ExactSineSeries(ks, [q for _, q, _ in modes], [c for _, _, c in modes])
    got = series.sample(np.array([x]), [t])[0, 0]
    ref = sum(c * np.exp(-0.5j * float(k) ** 2 * t) * math.sin(float(k) * x + q * math.pi / 2)
              for k, (_, q, c) in zip(ks, modes))
    assert abs(got - ref) <= 1e-12 * (1 + sum(abs(c) for _, _, c in modes))


def test_cancellation_survives_near_center():
    # psi at N=100 needs ~200 bits of cancellation; the product form is exact in double here
    state = build_box_state(SuperoscSpec(100, 4.0))
    x = np.array([0.3, 0.7, 2.1])
    got = state.series.sample(x, [0.0])[0].real * math.exp(-state.log_norm)
    ref = psi_product_form(state, x)
    assert np.allclose(got, ref, rtol=1e-10, atol=0)


def test_closed_form_window_mass_matches_quadrature():
    state = build_box_state(SuperoscSpec(30, 3.0))
    series = state.series
    w = 4.0
    x, wt = gauss_legendre(w, 120)
    times = [0.0, 1.3]
    quad = np.sum(wt * np.abs(series.sample(x, times)) ** 2, axis=1)
    closed = series.window_mass(w, times)
    assert np.allclose(quad, closed, rtol=1e-10)

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from superosc.box import (BoxEigenbasis, BoxState, ExtentError, GridWavefunction, RepresentationError,
                          ResolutionError, box_grid, central_fidelity, embed_box_state, evolve_box,
                          free_evolve, gauss_legendre, project_onto_box, sample_on_grid, sine_state,
                          spectral_mass_above)
from superosc.core import SuperoscSpec, build_box_state, eval_psi

SPEC = SuperoscSpec(100, 4.0)


@pytest.fixture(scope="module")
def psi():
    return embed_box_state(build_box_state(SPEC))


def test_eigenfunctions_orthonormal_and_vanish_at_walls():
    basis = BoxEigenbasis(6, 1.0, 20)
    x, w = gauss_legendre(basis.half_length, 200)
    phi = basis.eigenfunctions(x)
    assert np.allclose(phi.T @ (w[:, None] * phi), np.eye(20), atol=1e-12)
    walls = basis.eigenfunctions([-basis.half_length, basis.half_length])
    assert np.max(np.abs(walls)) < 1e-14


def test_embedded_state_is_normalized_and_band_limited(psi):
    assert psi.norm == pytest.approx(1.0, abs=1e-12)
    energies = psi.basis.mode_energies[psi.occupied - 1]
    assert energies.max() <= 0.5 + 1e-12


def test_embedding_reproduces_psi(psi):
    x = np.linspace(-2, 2, 9)
    direct = eval_psi(build_box_state(SPEC), x)
    assert np.allclose(psi.values(x)[0].real, direct, rtol=1e-10, atol=0)
    assert np.allclose(psi.values(x, high_precision=False)[0].real, direct, rtol=1e-6, atol=1e-12)


def test_sine_state_is_single_eigenmode():
    s = sine_state(SPEC)
    assert s.occupied.size == 1
    assert s.basis.mode_energies[s.occupied[0] - 1] == pytest.approx(8.0)
    x = np.linspace(-5, 5, 11)
    assert np.allclose(s.values(x)[0], np.sin(4 * x) / math.sqrt(SPEC.half_length), atol=1e-14)


def test_incommensurate_wavenumber_rejected():
    with pytest.raises(RepresentationError):
        sine_state(SPEC, 4.0001)


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 50))
def test_evolution_preserves_norm(t):
    s = evolve_box(embed_box_state(build_box_state(SuperoscSpec(20, 2.0))), t)
    assert s.norm == pytest.approx(1.0, abs=1e-10)


def test_zero_time_is_identity_and_eigenstate_gains_phase(psi):
    assert np.array_equal(evolve_box(psi, 0.0).amplitudes, psi.amplitudes)
    s = evolve_box(sine_state(SPEC), 1.7)
    m = s.occupied[0] - 1
    assert s.amplitudes[m] == pytest.approx(sine_state(SPEC).amplitudes[m] * np.exp(-8j * 1.7))


@pytest.mark.parametrize("t", [0.0, 1.0, 5.0])
def test_sine_state_fidelity_is_one(t):
    assert central_fidelity(sine_state(SPEC), t, 10.0) == pytest.approx(1.0, abs=1e-10)


def test_psi_matches_sine_initially(psi):
    assert central_fidelity(psi, 0.0, 1.0) >= 0.95


def test_oversized_window_warns_and_lowers_fidelity(psi):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        wide = central_fidelity(psi, 10.0, 20.0)
    assert any("superoscillation radius" in str(w.message) for w in caught)
    assert wide <= central_fidelity(psi, 10.0, 10.0)


def test_grid_sampling_and_projection_round_trip():
    state = embed_box_state(build_box_state(SuperoscSpec(20, 2.0)))
    grid = box_grid(state.basis, 0.5)
    wf = sample_on_grid(state, grid)
    assert wf.norm() == pytest.approx(1.0, rel=1e-9)
    back = project_onto_box(wf, state.basis)
    assert np.max(np.abs(back.amplitudes - state.amplitudes)) < 1e-8


def test_zero_state_samples_to_zero():
    basis = BoxEigenbasis(10, 1.0, 20)
    wf = sample_on_grid(BoxState(basis, np.zeros(20)), box_grid(basis, 0.5))
    assert np.all(wf.values == 0)


def test_coarse_grid_rejected(psi):
    with pytest.raises(ResolutionError):
        sample_on_grid(psi, box_grid(psi.basis, 1.0))


def test_spectral_mass_of_box_state():
    state = embed_box_state(build_box_state(SuperoscSpec(20, 2.0)))
    wf = sample_on_grid(state, box_grid(state.basis, 0.4))
    assert spectral_mass_above(wf, 1.0) < 1e-10


def test_grid_file_round_trip(tmp_path):
    wf = GridWavefunction(-3.0, 0.25, np.exp(1j * np.arange(25)))
    wf.save(tmp_path / "a.gwf")
    header = open(tmp_path / "a.gwf", "rb").readline().decode()
    assert header.startswith("GRIDWF 1 min=-3.0") and "count=25" in header
    back = GridWavefunction.load(tmp_path / "a.gwf")
    assert np.array_equal(back.values, wf.values) and back.dx == wf.dx and back.x_min == wf.x_min
    wf.to_csv(tmp_path / "a.csv")
    assert open(tmp_path / "a.csv").readline().strip() == "x,re,im"


def _gaussian(sigma, k0=0.0, dx=0.05, half=200.0):
    x = np.arange(-half, half, dx)
    v = np.exp(-x ** 2 / (4 * sigma ** 2) + 1j * k0 * x)
    wf = GridWavefunction.on(x, v)
    return GridWavefunction(wf.x_min, dx, v / math.sqrt(wf.norm()))


def _moments(wf):
    p = np.abs(wf.values) ** 2 * wf.dx
    mean = np.sum(p * wf.x)
    return mean, np.sum(p * (wf.x - mean) ** 2)


@pytest.mark.parametrize("t", [0.0, 2.0, 10.0])
def test_gaussian_spreads_as_expected(t):
    sigma = 1.5
    wf = free_evolve(_gaussian(sigma), t)
    assert wf.norm() == pytest.approx(1.0, abs=1e-10)
    assert _moments(wf)[1] == pytest.approx(sigma ** 2 + t ** 2 / (4 * sigma ** 2), rel=1e-8)


def test_moving_packet_travels_at_its_wavenumber():
    wf = free_evolve(_gaussian(4.0, k0=4.0), 20.0)
    assert _moments(wf)[0] / 20.0 == pytest.approx(4.0, rel=0.02)


def test_extent_check():
    with pytest.raises(ExtentError):
        free_evolve(_gaussian(1.0, k0=4.0, half=20.0), 10.0)

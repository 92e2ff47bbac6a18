import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from superosc.box import embed_box_state, evolve_box, sine_state
from superosc.core import SuperoscSpec, build_box_state
from superosc.energy import (EnergyDistribution, HeavyTailWarning, characteristic_function,
                             characteristic_overlap, convolve, default_energy_step, jacobian_density,
                             l1_distance, lattice_transform, moments, momentum_to_energy,
                             opener_autocorrelation, opener_characteristic, opener_energy_distribution,
                             photon_energy_distribution, total_energy_final, total_variation,
                             verify_conservation, branch_photon_characteristic)
from superosc.opener import OpenerPacket, ReleaseWindow, exact_joint_evolution, max_tau_step

SMALL = SuperoscSpec(6, 2.0)


def small_psi():
    return embed_box_state(build_box_state(SMALL))


def test_eigenstate_photon_distribution_is_point_mass():
    d = photon_energy_distribution(sine_state(SuperoscSpec(100, 4.0)))
    assert d.levels.tolist() == pytest.approx([8.0]) and d.weights.tolist() == pytest.approx([1.0])
    assert moments(d, 3).tolist() == pytest.approx([8.0, 64.0, 512.0])


def test_psi_photon_energies_below_half():
    d = photon_energy_distribution(embed_box_state(build_box_state(SuperoscSpec(100, 4.0))))
    assert d.mass == pytest.approx(1.0, abs=1e-12)
    assert d.levels.max() <= 0.5 + 1e-12
    assert moments(d, 1)[0] <= 0.5


def test_top_hat_opener_density_is_sinc_squared_near_center():
    T = 10.0
    pk = OpenerPacket.top_hat(T, 0.01)
    d = opener_energy_distribution(pk)
    assert d.mass == pytest.approx(1.0, abs=1e-10)
    p = np.linspace(-3, 3, 61)
    cont = T / (2 * math.pi) * np.sinc(p * T / (2 * math.pi)) ** 2
    assert np.allclose(d.density_at(p), cont, atol=1e-3 * cont.max())


def test_opener_density_translation_invariant():
    pk = OpenerPacket.smooth_bump(5.0, 0.02)
    a = opener_energy_distribution(pk)
    b = opener_energy_distribution(pk.translated(3.3))
    assert total_variation(a, b) < 1e-12


def test_initial_total_energy_direct_equals_convolution():
    # the joint-state route and the independent-product route must agree
    psi = small_psi()
    pk = OpenerPacket.top_hat(3.0, max_tau_step(2.0))
    b = exact_joint_evolution(psi, pk, 3.0, ReleaseWindow(2.0))
    grid = opener_energy_distribution(pk, de=default_energy_step(3.0, 2.0))
    direct = total_energy_final(b, grid, initial=True)
    conv = convolve(photon_energy_distribution(psi), grid)
    assert np.max(np.abs(direct.density - conv.density)) < 1e-12 * conv.density.max()
    assert l1_distance(direct, conv) < 1e-10


def test_strong_release_conserves_total_energy_up_to_truncation():
    psi = small_psi()
    pk = OpenerPacket.top_hat(3.0, max_tau_step(2.0))
    grid = opener_energy_distribution(pk, de=default_energy_step(3.0, 4.0))
    tails = []
    for k_max in (None, 40.0):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            b = exact_joint_evolution(psi, pk, 3.0, ReleaseWindow(4.0), k_max=k_max)
        assert b.p_down > 0.01
        scale = math.exp(2 * b.log_scale)
        tail = float(b.probs @ b.outside_mass) * scale + float(
            b.probs @ (b.state_norm - scale * b.window_mass - b.trapped_mode_mass))
        l1 = l1_distance(total_energy_final(b, grid, initial=True), total_energy_final(b, grid))
        assert l1 == pytest.approx(tail, abs=1e-10)
        tails.append(tail)
    assert tails[1] < tails[0]


def test_no_interaction_changes_nothing():
    psi = small_psi()
    pk = OpenerPacket.top_hat(3.0, max_tau_step(2.0))
    b = exact_joint_evolution(psi, pk, 3.0, ReleaseWindow(0.0))
    grid = opener_energy_distribution(pk, de=default_energy_step(3.0, 1.0))
    assert l1_distance(total_energy_final(b, grid, initial=True), total_energy_final(b, grid)) < 1e-12
    final = photon_energy_distribution(b, part="trapped")
    initial = photon_energy_distribution(psi)
    occ = final.weights > 0
    assert np.allclose(final.levels[occ], initial.levels, atol=1e-15)
    assert np.allclose(final.weights[occ], initial.weights, atol=1e-14)
    taus = np.linspace(-6, 6, 25)
    cf0 = characteristic_function(photon_energy_distribution(psi), taus)
    cf1 = branch_photon_characteristic(b, taus)
    assert np.max(np.abs(cf0.values - cf1.values)) < 1e-12
    assert total_variation(opener_energy_distribution(pk), opener_energy_distribution(b, part="all")) < 1e-12


def test_momentum_to_energy_conserves_mass_and_matches_jacobian():
    k = 0.01 * np.arange(-400, 401)
    rho = np.exp(-(np.abs(k) - 2.0) ** 2 / 0.1)
    rho /= rho.sum() * 0.01
    e0, dens = momentum_to_energy(k, rho, 0.05)
    assert dens.sum() * 0.05 == pytest.approx(1.0, abs=1e-12)
    e = e0 + 0.05 * np.arange(dens.size)
    sel = (e > 1.0) & (e < 3.0)
    assert np.allclose(dens[sel], jacobian_density(k, rho, e[sel]), rtol=2e-2, atol=1e-3)


def test_convolution_of_point_masses_and_densities():
    a = EnergyDistribution("a", [1.0, 2.0], [0.25, 0.75])
    b = EnergyDistribution("b", [0.5], [1.0])
    c = convolve(a, b)
    assert c.levels.tolist() == [1.5, 2.5] and c.weights.tolist() == [0.25, 0.75]
    d = EnergyDistribution("d", e0=0.0, de=0.01, density=np.full(100, 1.0))
    cd = convolve(d, d)
    assert cd.mass == pytest.approx(1.0, abs=1e-12)
    shifted = convolve(d, EnergyDistribution("s", [0.005], [1.0]))
    assert shifted.resampled


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 10), st.floats(0.01, 1)), min_size=1, max_size=6))
def test_characteristic_function_axioms(pairs):
    lv = np.array([p[0] for p in pairs])
    w = np.array([p[1] for p in pairs])
    d = EnergyDistribution("d", lv, w / w.sum())
    cf = characteristic_function(d, np.linspace(-5, 5, 21))
    ax = cf.check_axioms(tol=1e-12)
    assert ax["modulus_ok"] and ax["at_zero_ok"] and ax["hermitian_ok"]


def test_eigenstate_characteristic_is_pure_phase():
    cf = characteristic_function(photon_energy_distribution(sine_state(SMALL)), np.array([0.0, 1.0, 2.5]))
    assert np.allclose(cf.values, np.exp(2j * np.array([0.0, 1.0, 2.5])), atol=1e-14)


def test_characteristic_routes_agree_and_are_time_independent():
    psi = small_psi()
    taus = np.linspace(-4, 4, 17)
    ft = characteristic_function(photon_energy_distribution(psi), taus)
    ov0 = characteristic_overlap(psi, taus, t=0.0)
    ov3 = characteristic_overlap(psi, taus, t=3.0)
    assert np.max(np.abs(ft.values - ov0.values)) < 1e-8
    assert np.max(np.abs(ov0.values - ov3.values)) < 1e-10
    assert np.max(np.abs(characteristic_function(photon_energy_distribution(evolve_box(psi, 2.0)),
                                                 taus).values - ft.values)) < 1e-12


@pytest.mark.parametrize("shape", ["top_hat", "smooth_bump"])
def test_opener_autocorrelation_is_compact(shape):
    T = 4.0
    pk = OpenerPacket.build(shape, T, 0.01)
    assert opener_autocorrelation(pk, 0.0) == pytest.approx(1.0, abs=1e-12)
    far = opener_autocorrelation(pk, np.array([T, T + 0.3, 2 * T, -T - 1]))
    assert np.max(np.abs(far)) <= 1e-12
    cf = opener_characteristic(pk, np.linspace(-2 * T, 2 * T, 41))
    assert np.max(np.abs(cf.values[np.abs(cf.tau) >= T])) <= 1e-12


def test_top_hat_autocorrelation_is_triangle():
    pk = OpenerPacket.top_hat(4.0, 0.01)
    assert opener_autocorrelation(pk, 2.0) == pytest.approx(0.5, abs=1e-12)
    assert opener_autocorrelation(pk, 1.005) == pytest.approx(1 - 1.005 / 4, abs=1e-12)


def test_opener_characteristic_matches_density_transform():
    pk = OpenerPacket.smooth_bump(3.0, 0.02)
    d = opener_energy_distribution(pk, de=0.002)
    taus = np.linspace(-2.5, 2.5, 11)
    # lattice taus: the periodic band resolves integer multiples of dq exactly
    taus = np.round(taus / pk.dq) * pk.dq
    assert np.allclose(characteristic_function(d, taus).values, opener_characteristic(pk, taus).values,
                       atol=1e-6)


def test_lattice_transform_periodic():
    pk = OpenerPacket.top_hat(2.0, 0.1)
    p = np.array([0.3, 1.7])
    shifted = lattice_transform(pk, p + 2 * math.pi / pk.dq)
    assert np.allclose(np.abs(shifted), np.abs(lattice_transform(pk, p)), atol=1e-12)


def test_heavy_tail_warning():
    d = EnergyDistribution("d", e0=0.5, de=1.0, density=1.0 / (1 + np.arange(1000.0)) ** 2)
    with pytest.warns(HeavyTailWarning):
        moments(d.normalized(), 2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        moments(EnergyDistribution("p", [1.0, 2.0], [0.5, 0.5]), 3)


def test_conservation_report_format():
    d = EnergyDistribution("d", e0=0.0, de=0.1, density=np.full(10, 1.0))
    taus = np.linspace(-1, 1, 5)
    cf = characteristic_function(d, taus)
    rep = verify_conservation(d, d, cf, cf, cf)
    assert rep.passed
    text = rep.to_text()
    assert "total_energy_l1: 0.000000e+00" in text and text.rstrip().endswith("all.pass: true")


def test_distribution_csv_is_plain_numbers(tmp_path):
    d = EnergyDistribution("d", np.array([0.5]), np.array([0.25]), e0=0.0, de=0.5, density=np.full(3, 0.5))
    d.to_csv(tmp_path / "d.csv")
    rows = (tmp_path / "d.csv").read_text().splitlines()
    assert rows[0] == "part,energy,value" and rows[1] == "level,0.5,0.25"
    assert [float(r.split(",")[2]) for r in rows[2:]] == [0.5, 0.5, 0.5]

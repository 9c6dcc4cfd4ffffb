import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qphase.analysis import uncertainty_product
from qphase.core import HamiltonianModel, build_grid, inner, marginal_q, norm_squared
from qphase.dynamics import BoundaryLeakError, evolve
from qphase.scenarios import (
    SlitSpec,
    commensurate_grid,
    gaussian_packet,
    interference_pattern,
    plane_wave,
    two_slit_superpose,
)

G = build_grid(-10, 10, -6, 6, 160, 96)


def test_plane_wave_rejects_unresolved_wavelength():
    with pytest.raises(ValueError, match="wavelength"):
        plane_wave(30.0, build_grid(-10, 10, 25, 35, 64, 16))


def test_zero_momentum_plane_wave_is_stationary():
    g = commensurate_grid(-10, 10, 128, -8, 17, 1.0)
    psi = plane_wave(0.0, g)
    row = np.argmin(np.abs(g.p))
    assert np.ptp(np.abs(psi.values[:, row])) < 1e-14
    out = evolve(psi, HamiltonianModel.free(), 1.0, 0.1).final
    assert np.max(np.abs(out.values[:, row] - psi.values[:, row])) < 1e-12


def test_commensurate_grid_rows_are_periodic():
    g = commensurate_grid(-5, 5, 64, 3, 8, 1.0)
    k = g.p * (g.q_max - g.q_min) / (2 * np.pi)
    assert np.allclose(k, np.round(k))
    assert g.periodic_q


def test_plane_wave_beats():
    g = commensurate_grid(-10, 10, 512, 0, 8, 1.0)
    Q, P = g.mesh()
    p1, p2 = 1.0, 1.0 + 2 * np.pi / 5.0
    rho = np.abs(np.exp(1j * p1 * g.q) + np.exp(1j * p2 * g.q)) ** 2
    spec = np.abs(np.fft.rfft(rho - rho.mean()))
    k = np.argmax(spec)
    assert (g.q_max - g.q_min) / k == pytest.approx(2 * np.pi / abs(p2 - p1))


def test_packet_rejects_sub_heisenberg_widths():
    with pytest.raises(ValueError, match="below hbar/2"):
        gaussian_packet(0, 0, 0.5, 0.5, G)


def test_minimum_packet_saturates_bound():
    g = build_grid(-8, 8, -8, 8, 256, 256)
    u = uncertainty_product(gaussian_packet(0.3, -0.4, 0.8, 0.625, g))
    assert u.product == pytest.approx(0.5, abs=1e-6)


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2))
def test_packet_centroid_follows_q0(q0):
    psi = gaussian_packet(q0, 0.0, 1.0, 0.8, G)
    c = np.sum(G.q * marginal_q(psi) * G.q_weights())
    assert c == pytest.approx(q0, abs=1e-8)


def test_packet_without_momentum_stays_put():
    psi = gaussian_packet(0.0, 0.0, 1.0, 0.8, G)
    out = evolve(psi, HamiltonianModel.free(), 2.0, 0.1, leak_limit=1e-4).final
    c0 = np.sum(G.q * marginal_q(psi) * G.q_weights())
    c1 = np.sum(G.q * marginal_q(out) * G.q_weights())
    assert abs(c1 - c0) < 1e-8


def test_carrier_phase_option():
    psi = gaussian_packet(0.0, 1.0, 1.0, 0.8, G, phase="carrier")
    Q, _ = G.mesh()
    ratio = psi.values / np.abs(psi.values)
    assert np.allclose(ratio, np.exp(1j * Q))
    with pytest.raises(ValueError):
        gaussian_packet(0.0, 1.0, 1.0, 0.8, G, phase="other")


def test_slit_spec_validation():
    with pytest.raises(ValueError):
        SlitSpec(4.0, 1.0, 0.0, 3.0)
    with pytest.warns(RuntimeWarning, match="overlap"):
        SlitSpec(1.0, 1.0, 1.0, 3.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        SlitSpec(2.0, 1.0, 1.0, 3.0)


def test_two_slit_symmetry_and_overlap_identity():
    spec = SlitSpec(3.0, 1.0, 0.5, 3.0, sigma_p=1.0)
    s = two_slit_superpose(spec, G)
    cross = 2 * np.real(np.conj(s.psi1.values) * s.psi2.values)
    assert np.sum(G.weights() * cross) == pytest.approx(2 * inner(s.psi1, s.psi2).real, abs=1e-14)
    assert norm_squared(s.psi_sup) == pytest.approx(1.0)


def test_two_slit_density_symmetric_on_symmetric_grid():
    g = build_grid(-10, 10, -6, 6, 161, 97)
    s = two_slit_superpose(SlitSpec(3.0, 1.0, 0.5, 3.0, sigma_p=1.0), g)
    d = s.psi_sup.density
    assert np.max(np.abs(d - d[::-1, :])) <= 1e-10 * d.max()


def test_far_slits_stop_interfering():
    g = build_grid(-20, 20, -6, 6, 320, 96)
    s = two_slit_superpose(SlitSpec(16.0, 1.0, 0.5, 3.0, sigma_p=1.0), g)
    assert s.scale ** 2 == pytest.approx(2.0, abs=1e-10)


def test_interference_decomposition_and_linearity():
    g = build_grid(-30, 36, -8, 9, 512, 96)
    spec = SlitSpec(2.0, 1.0, 0.5, 1.0, sigma_p=2.0)
    pat = interference_pattern(two_slit_superpose(spec, g), HamiltonianModel.free(),
                               spec.screen_time(), dt=1.0)
    assert np.max(np.abs(pat.pattern - pat.envelope - pat.cross)) <= 1e-12 * pat.pattern.max()
    st = pat.states
    lin = st.psi_sup.values - (st.psi1.values + st.psi2.values) / st.scale
    assert np.max(np.abs(lin)) <= 1e-10


def test_single_slit_has_no_cross_term():
    g = build_grid(-30, 36, -8, 9, 256, 64)
    spec = SlitSpec(2.0, 1.0, 0.5, 1.0, sigma_p=2.0)
    s = two_slit_superpose(spec, g)
    lone = type(s)(s.psi1, 0 * s.psi2, s.psi1, 1.0)
    pat = interference_pattern(lone, HamiltonianModel.free(), 2.0, dt=1.0)
    assert np.max(np.abs(pat.cross)) == 0.0
    assert np.allclose(pat.pattern, pat.envelope)


def test_leaky_two_slit_aborts():
    g = build_grid(-10, 10, -6, 6, 96, 64)
    spec = SlitSpec(2.0, 1.0, 3.0, 10.0, sigma_p=1.0)
    with pytest.raises(BoundaryLeakError):
        interference_pattern(two_slit_superpose(spec, g), HamiltonianModel.free(), spec.screen_time())


def test_fringe_prediction_scales():
    a = SlitSpec(2.0, 1.0, 0.5, 3.0, sigma_p=3.0)
    b = SlitSpec(4.0, 1.0, 0.5, 3.0, sigma_p=3.0)
    t = a.screen_time()
    assert t == 12.0
    assert a.fringe_spacing(t) == pytest.approx(2 * b.fringe_spacing(t))

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qphase.core import HamiltonianModel, build_grid, marginal_q
from qphase.oracle import ho_ground_density
from qphase.scenarios import commensurate_grid, plane_wave
from qphase.stationary import (
    HOStationaryState,
    gram_matrix,
    ho_gram_matrix,
    ho_wavefunction,
    quantize_ho,
    stationary_residual,
    support_grid,
    turning_point,
    vortex_cores,
)

G7 = build_grid(-7, 7, -7, 7, 256, 256)


def test_energies_and_nbar():
    assert HOStationaryState(0).energy == 0.5
    assert HOStationaryState(1, "sine").energy == 1.0
    assert HOStationaryState(3, "cosine", omega=2.0).energy == 7.0
    assert HOStationaryState(2, "sine").nbar == 4


def test_sine_ladder_starts_at_one():
    with pytest.raises(ValueError):
        HOStationaryState(0, "sine")


def test_origin_takes_limit_along_p_axis():
    st = HOStationaryState(1, form="real")
    assert st.values(0.0, 0.0) == pytest.approx(1.0)


@pytest.mark.parametrize("n,branch", [(0, "cosine"), (1, "cosine"), (2, "cosine"), (1, "sine"), (2, "sine")])
def test_exp_form_states_solve_stationary_equation(n, branch):
    # higher windings steepen the phase near the core; all converge at fourth order
    st = HOStationaryState(n, branch)
    coarse = build_grid(-7, 7, -7, 7, 128, 128)
    r_fine = stationary_residual(ho_wavefunction(st, G7), st.hamiltonian, st.energy)
    r_coarse = stationary_residual(ho_wavefunction(st, coarse), st.hamiltonian, st.energy)
    assert r_fine < 1e-3
    assert r_coarse / r_fine > 12


def test_wrong_energy_gives_large_residual():
    st = HOStationaryState(0)
    psi = ho_wavefunction(st, G7)
    assert stationary_residual(psi, st.hamiltonian, 1.0) >= 0.1


def test_real_form_is_not_an_eigenstate():
    st = HOStationaryState(1, form="real")
    psi = ho_wavefunction(st, G7)
    assert stationary_residual(psi, st.hamiltonian, st.energy) > 0.1


def test_plane_wave_rows_are_stationary_per_row():
    g = commensurate_grid(-10, 10, 256, 0, 32, 1.0)
    psi = plane_wave(1.0, g)
    _, P = g.mesh()
    assert stationary_residual(psi, HamiltonianModel.free(), 0.5 * P * P) <= 1e-8


def test_residual_converges_at_fourth_order():
    vals = []
    for n in (96, 192):
        g = build_grid(-7, 7, -7, 7, n, n)
        st = HOStationaryState(0)
        vals.append(stationary_residual(ho_wavefunction(st, g), st.hamiltonian, st.energy))
    assert np.log2(vals[0] / vals[1]) == pytest.approx(4.0, abs=0.4)


def test_vortex_core_found_at_origin():
    psi = ho_wavefunction(HOStationaryState(1), G7)
    cores = vortex_cores(psi)
    assert len(cores) == 1
    assert np.hypot(*cores[0]) < 2 * G7.dq


def test_residual_report_detail():
    st = HOStationaryState(0)
    rep = stationary_residual(ho_wavefunction(st, G7), st.hamiltonian, st.energy, detail=True)
    assert rep.excluded > 0 and np.isnan(rep.field).any()


@pytest.mark.parametrize("branch,expected", [("cosine", [0.5, 1.5, 2.5]), ("sine", [1.0, 2.0])])
def test_quantized_ladders(branch, expected):
    lv = quantize_ho(branch, 2)
    assert lv.energies == expected
    assert lv.verified


def test_quantize_scales_with_omega():
    a, b = quantize_ho("cosine", 4), quantize_ho("cosine", 4, omega=2.0)
    assert b.energies == [2 * e for e in a.energies]
    assert max(a.boundary_ratios) <= 1e-10


@pytest.mark.parametrize("E,m,a", [(0.5, 1.0, 1.0), (2.0, 1.0, 2.0), (0.5, 4.0, 0.5)])
def test_turning_points(E, m, a):
    assert turning_point(E, HamiltonianModel.harmonic(m, 1.0)) == pytest.approx(a)


def test_turning_point_rejects_nonpositive_energy():
    with pytest.raises(ValueError):
        turning_point(0.0, HamiltonianModel.harmonic())


@settings(max_examples=20, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.3, 3.0), st.integers(0, 4))
def test_real_form_vanishes_at_turning_point(m, omega, n):
    s = HOStationaryState(n, "cosine", m, omega, form="real")
    a = turning_point(s.energy, s.hamiltonian)
    assert abs(s.values(a, 0.0)) <= 1e-10


def test_ground_marginal_is_schrodinger_density():
    g = support_grid(HOStationaryState(0), 256)
    psi = ho_wavefunction(HOStationaryState(0), g)
    assert np.max(np.abs(marginal_q(psi) - ho_ground_density(g.q))) <= 1e-8


def test_polar_gram_is_orthonormal():
    states = [HOStationaryState(n) for n in range(4)] + [HOStationaryState(n, "sine") for n in (1, 2, 3)]
    G = ho_gram_matrix(states)
    assert np.max(np.abs(G - np.eye(len(states)))) <= 1e-8


def test_polar_gram_needs_common_parameters():
    with pytest.raises(ValueError):
        ho_gram_matrix([HOStationaryState(0), HOStationaryState(1, omega=2.0)])


def test_cartesian_gram_converges_to_orthogonal():
    # the phase is singular at the origin, so grid quadrature converges at second order
    offs = []
    for n in (64, 128, 256):
        g = build_grid(-7, 7, -7, 7, n, n)
        G = gram_matrix([ho_wavefunction(HOStationaryState(k), g) for k in range(3)])
        offs.append(np.max(np.abs(G - np.diag(np.diag(G)))))
    assert offs[2] < offs[1] < offs[0]
    assert np.log2(offs[1] / offs[2]) > 1.7

import json
import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qphase.core import HamiltonianModel, PhaseWaveFunction, SeparableState, build_grid, normalize
from qphase.operators import (
    MissingSnapshotError,
    OperatorKind,
    PhaseOperator,
    apply,
    energy,
    expectation_op,
    kinetic,
    momentum,
    momentum_consistency_diagnostic,
    observable,
    position,
    quantum_force,
    quantum_potential,
    separable_quantum_force,
    virial_potential,
)
from qphase.scenarios import commensurate_grid, gaussian_packet, plane_wave
from qphase.stationary import HOStationaryState, ho_wavefunction

GOLDEN = Path(__file__).parent / "golden" / "quantum_potential_ho0.json"


@pytest.fixture(scope="module")
def periodic():
    return commensurate_grid(-10, 10, 256, 0, 32, 1.0)


def test_momentum_eigenrelation_on_plane_wave(periodic):
    psi = plane_wave(1.0, periodic)
    _, P = periodic.mesh()
    assert np.max(np.abs(apply(momentum, psi) - P * psi.values)) <= 1e-8


def test_position_eigenrelation_on_p_plane_wave():
    g = build_grid(-4, 4, -4, 4, 64, 1024)
    Q, P = g.mesh()
    psi = PhaseWaveFunction(g, np.exp(-Q * Q / 4) * np.exp(1j * Q * P))
    out, flags = apply(position, psi, return_flags=True)
    err = np.abs(out - Q * psi.values)
    assert np.max(err[~flags]) <= 1e-8
    assert flags[:, 0].all() and not flags[:, 2:-2].any()


def test_energy_eigenrelation_on_snapshots(periodic):
    dt = 2e-5
    psi = plane_wave(1.0, periodic)
    prev, nxt = plane_wave(1.0, periodic, t=-dt), plane_wave(1.0, periodic, t=dt)
    _, P = periodic.mesh()
    assert np.max(np.abs(apply(energy, psi, prev, nxt, dt) - 0.5 * P * P * psi.values)) <= 1e-8


def test_energy_observable_of_stationary_phase(grid):
    st = HOStationaryState(1)
    base = ho_wavefunction(st, grid)
    dt = 1e-3
    prev = base * np.exp(1j * st.energy * dt)
    nxt = base * np.exp(-1j * st.energy * dt)
    obs = observable(energy, base, prev, nxt, dt)
    assert np.ma.max(np.abs(obs - st.energy * np.sin(st.energy * dt) / (st.energy * dt))) < 1e-12


def test_energy_needs_snapshots(grid):
    with pytest.raises(MissingSnapshotError):
        apply(energy, gaussian_packet(0, 0, 1, 1, grid))


def test_kinetic_needs_hamiltonian():
    with pytest.raises(ValueError):
        PhaseOperator(OperatorKind.KINETIC)


def test_real_gaussian_momentum_is_imaginary(grid):
    psi = gaussian_packet(0, 0, 1, 0.5, grid, phase="carrier")
    out = apply(momentum, psi)
    assert np.max(np.abs(out.real)) == 0.0
    assert np.max(np.abs(out.imag)) > 0.1


def test_observables_recover_coordinates():
    g = build_grid(-6, 6, -6, 6, 512, 512)
    psi = gaussian_packet(0.0, 0.0, 1.2, 1.5, g)
    Q, P = g.mesh()
    inner_nodes = (slice(4, -4), slice(4, -4))
    # residual is the fourth-order truncation of d/dq exp(i p q)
    p_obs = observable(momentum, psi)
    q_obs = observable(position, psi)
    assert np.ma.max(np.abs(p_obs - P)[inner_nodes]) < 1e-4
    assert np.ma.max(np.abs(q_obs - Q)[inner_nodes]) < 1e-4


def test_observable_masks_small_amplitude(grid):
    v = np.zeros(grid.shape, complex)
    v[60:68, 60:68] = 1.0
    obs = observable(momentum, PhaseWaveFunction(grid, v))
    assert obs.mask[0, 0] and not obs.mask[64, 64]


def test_mean_momentum_of_even_state_is_zero(grid):
    psi = ho_wavefunction(HOStationaryState(0), grid)
    assert abs(expectation_op(momentum, psi)) <= 1e-10


@pytest.mark.parametrize("n", [0, 1])
def test_virial_equality(n):
    g = build_grid(-8, 8, -8, 8, 192, 192)
    st = HOStationaryState(n)
    psi = ho_wavefunction(st, g)
    t = expectation_op(kinetic(st.hamiltonian), psi)
    u = expectation_op(virial_potential(st.hamiltonian), psi)
    assert t == pytest.approx(u, abs=1e-6)


def test_ground_kinetic_converges_to_quarter():
    # the phase winds around the origin, so the grid value converges at second order
    errs = []
    for n in (64, 128, 256):
        g = build_grid(-8, 8, -8, 8, n, n)
        errs.append(abs(expectation_op(kinetic(HamiltonianModel.harmonic()),
                                       ho_wavefunction(HOStationaryState(0), g)) - 0.25))
    assert errs[2] < 2e-4
    assert np.log2(errs[0] / errs[1]) > 1.8 and np.log2(errs[1] / errs[2]) > 1.8


def test_hermitian_warning_on_complex_expectation(grid):
    # a state that does not vanish at the edge breaks the symmetry of p^
    Q, _ = grid.mesh()
    psi = normalize(PhaseWaveFunction(grid, np.exp(0.5 * Q)))
    with pytest.warns(RuntimeWarning, match="imaginary"):
        expectation_op(momentum, psi)


def test_composite_operator_is_linear_combination(grid):
    psi = gaussian_packet(0.3, -0.2, 1, 1, grid)
    H = HamiltonianModel.harmonic()
    total = kinetic(H) + virial_potential(H)
    assert np.allclose(apply(total, psi), apply(kinetic(H), psi) + apply(virial_potential(H), psi))
    assert np.allclose(apply(2.0 * momentum, psi), 2.0 * apply(momentum, psi))
    assert total.hermitian


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_apply_is_linear(a, b):
    g = build_grid(-5, 5, -5, 5, 40, 40)
    x = gaussian_packet(-1, 0.5, 1, 1, g)
    y = gaussian_packet(1, -0.5, 0.8, 1, g)
    for op in (momentum, position, kinetic(HamiltonianModel.harmonic())):
        lhs = apply(op, a * x + b * y)
        rhs = a * apply(op, x) + b * apply(op, y)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, abs(a) + abs(b)) * 10


def test_free_particle_has_no_quantum_force(grid):
    psi = gaussian_packet(0.5, 1.0, 1, 1, grid)
    H = HamiltonianModel.free()
    assert np.ma.max(np.abs(quantum_potential(psi, H))) == 0.0
    assert np.ma.max(np.abs(quantum_force(psi, H))) == 0.0


def test_homogeneous_direction_has_no_quantum_force(grid):
    x = ho_wavefunction(HOStationaryState(0), grid)
    y = gaussian_packet(0.0, 0.8, 1, 1, grid)
    forces = separable_quantum_force(SeparableState((x, y), (HamiltonianModel.harmonic(),
                                                             HamiltonianModel.free())))
    assert np.ma.max(np.abs(forces[1])) == 0.0
    assert np.ma.max(np.abs(forces[0])) > 0.0


def _ho_quantum_potential_probe():
    g = build_grid(-6, 6, -6, 6, 96, 96)
    psi = ho_wavefunction(HOStationaryState(0), g)
    Uq = quantum_potential(psi, HamiltonianModel.harmonic())
    idx = [(20, 30), (48, 60), (70, 40), (30, 70), (60, 20)]
    return {f"{i},{j}": float(Uq[i, j]) for i, j in idx}


def test_quantum_potential_matches_golden():
    probe = _ho_quantum_potential_probe()
    if os.environ.get("QPHASE_REGEN_GOLDEN"):
        GOLDEN.parent.mkdir(exist_ok=True)
        GOLDEN.write_text(json.dumps(probe, indent=1, sort_keys=True) + "\n")
    ref = json.loads(GOLDEN.read_text())
    for key, val in ref.items():
        assert probe[key] == pytest.approx(val, rel=1e-10, abs=1e-12)


def test_diagnostic_plane_wave(periodic):
    d = momentum_consistency_diagnostic(plane_wave(1.0, periodic))
    assert d.max_im <= 1e-8 and d.max_deviation <= 1e-8


def test_diagnostic_real_gaussian(grid):
    d = momentum_consistency_diagnostic(gaussian_packet(0, 0, 1, 0.5, grid, phase="carrier"))
    assert d.max_re == 0.0
    assert d.max_im_square <= 1e-10
    assert d.max_deviation > 0.1
    assert d.mean_square > 0 and d.peak_square > 0
    assert d.mean_square == pytest.approx(0.25, rel=1e-4)


def test_diagnostic_shrinks_for_flatter_envelope():
    g = build_grid(-40, 40, -2, 2, 1024, 8)
    Q, P = g.mesh()
    devs = []
    for w in (2.0, 4.0):
        psi = PhaseWaveFunction(g, np.exp(-Q * Q / (4 * w * w) + 1j * 1.0 * Q))
        devs.append(momentum_consistency_diagnostic(psi).mean_square - 1.0)
    assert 0 < devs[1] < devs[0]


def test_ho_ground_quantum_potential_closed_form():
    # U_q = (hbar omega / 2) xi^2 / (xi^2 + p^2) - m omega^2 q^2 / 2 with xi = m omega q
    g = build_grid(-5, 5, -5, 5, 400, 400)
    psi = ho_wavefunction(HOStationaryState(0), g)
    Q, P = g.mesh()
    exact = 0.5 * Q * Q / (Q * Q + P * P + 1e-300) - 0.5 * Q * Q
    Uq = quantum_potential(psi, HamiltonianModel.harmonic())
    away = (Q * Q + P * P > 1.0) & (np.abs(P) < 4.5)
    assert np.ma.max(np.abs(Uq - exact)[away]) < 1e-5

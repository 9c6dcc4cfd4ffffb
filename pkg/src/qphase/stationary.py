"""Stationary states: the harmonic-oscillator solution, quantization and residuals.

With ``xi = m omega q`` and ``theta = atan2(xi, p)`` the harmonic flow
generator is ``(p/m) d/dq - m omega^2 q d/dp = omega d/dtheta``, so

    psi = exp(i nbar theta) * exp(-(m omega^2 q^2 + p^2/m) / (2 beta))

solves the time-independent equation with ``E = nbar hbar omega / 2``.
``exp(i nbar theta)`` is single valued only for integer ``nbar``; odd
``nbar`` gives the ``(n + 1/2) hbar omega`` ladder (cosine branch) and even
``nbar`` the ``n hbar omega`` ladder (sine branch).

The real forms ``cos(nbar theta)`` / ``sin(nbar theta)`` combine the
``+nbar`` and ``-nbar`` solutions.  They vanish at the turning point on the
``p = 0`` line, which is the boundary condition behind the two ladders, but
they are superpositions of ``+E`` and ``-E`` and therefore not eigenstates.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .core import (
    HamiltonianKind,
    HamiltonianModel,
    PhaseGrid,
    PhaseWaveFunction,
    amplitude_floor,
    build_grid,
    inner,
    normalize,
)
from .stencils import d_dp, d_dq, interior_mask


class Branch(str, Enum):
    COSINE = "cosine"
    SINE = "sine"


class StateForm(str, Enum):
    EXP = "exp"    # single exp(+i nbar theta) factor: exact eigenstate
    REAL = "real"  # cos / sin of nbar theta


@dataclass(frozen=True)
class HOStationaryState:
    n: int = 0
    branch: Branch = Branch.COSINE
    m: float = 1.0
    omega: float = 1.0
    hbar: float = 1.0
    beta: Optional[float] = None  # defaults to hbar * omega
    form: StateForm = StateForm.EXP

    def __post_init__(self):
        object.__setattr__(self, "branch", Branch(self.branch))
        object.__setattr__(self, "form", StateForm(self.form))
        if self.beta is None:
            object.__setattr__(self, "beta", self.hbar * self.omega)
        if int(self.n) != self.n or self.n < 0:
            raise ValueError("n must be a nonnegative integer")
        if self.branch is Branch.SINE and self.n < 1:
            raise ValueError("the sine ladder starts at n = 1")
        for name in ("m", "omega", "hbar", "beta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def nbar(self) -> int:
        return 2 * self.n + 1 if self.branch is Branch.COSINE else 2 * self.n

    @property
    def energy(self) -> float:
        return 0.5 * self.nbar * self.hbar * self.omega

    @property
    def hamiltonian(self) -> HamiltonianModel:
        return HamiltonianModel.harmonic(self.m, self.omega)

    def values(self, q, p) -> np.ndarray:
        """Unnormalized closed-form values at arbitrary points."""
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        m, w = self.m, self.omega
        # atan2(0, 0) = 0: the origin takes its limit along the +p axis
        theta = np.arctan2(m * w * q, p)
        gauss = np.exp(-(m * w * w * q * q + p * p / m) / (2.0 * self.beta))
        if self.form is StateForm.EXP:
            return np.exp(1j * self.nbar * theta) * gauss
        trig = np.cos if self.branch is Branch.COSINE else np.sin
        return trig(self.nbar * theta) * gauss + 0j


def ho_wavefunction(state: HOStationaryState, grid: PhaseGrid) -> PhaseWaveFunction:
    Q, P = grid.mesh()
    return normalize(PhaseWaveFunction(grid, state.values(Q, P), state.hbar))


def support_grid(state: HOStationaryState, n: int = 256, decay: float = 1e-10) -> PhaseGrid:
    """Square-in-(m omega q, p) grid on which the Gaussian factor decays to ``decay``."""
    r = np.sqrt(-2.0 * state.m * state.beta * np.log(decay))
    qm = r / (state.m * state.omega)
    return build_grid(-qm, qm, -r, r, n, n)


def turning_point(E: float, H: HamiltonianModel) -> float:
    if H.kind is not HamiltonianKind.HARMONIC:
        raise ValueError("turning point is defined here for the harmonic oscillator")
    if not E > 0:
        raise ValueError("energy must be positive")
    return float(np.sqrt(2.0 * E / (H.m * H.omega ** 2)))


# -- residual ----------------------------------------------------------------------

def _ring(k):
    """Offsets around the square of half-width ``k``, counter-clockwise."""
    side = range(-k, k)
    return ([(i, -k) for i in side] + [(k, j) for j in side]
            + [(-i, k) for i in side] + [(-k, -j) for j in side])


def vortex_cores(psi: PhaseWaveFunction, ring: int = 3) -> np.ndarray:
    """``(k, 2)`` array of (q, p) positions around which the phase winds.

    The winding number is summed around a square loop of half-width ``ring``
    cells centred on every node; ``8 * ring`` steps keep each phase increment
    below pi for windings up to ``2 * ring``.  Flagged nodes are grouped into
    connected clusters and each cluster reports its centroid.
    """
    v = psi.values
    n_q, n_p = v.shape
    k = ring
    if n_q <= 2 * k or n_p <= 2 * k:
        return np.empty((0, 2))
    ok = np.abs(v) > amplitude_floor(v)
    safe = np.where(ok, v, 1.0)
    total = np.zeros((n_q - 2 * k, n_p - 2 * k))
    valid = np.ones_like(total, dtype=bool)
    offsets = _ring(k)

    def window(di, dj):
        return slice(k + di, n_q - k + di), slice(k + dj, n_p - k + dj)

    for (i0, j0), (i1, j1) in zip(offsets, offsets[1:] + offsets[:1]):
        w0, w1 = window(i0, j0), window(i1, j1)
        total += np.angle(safe[w1] / safe[w0])
        valid &= ok[w0]
    wind = np.rint(total / (2 * np.pi)).astype(int)
    hit = np.zeros(v.shape, dtype=bool)
    hit[k:n_q - k, k:n_p - k] = valid & (wind != 0)
    if not hit.any():
        return np.empty((0, 2))
    labels, count = ndimage.label(hit)
    centres = ndimage.center_of_mass(hit, labels, range(1, count + 1))
    g = psi.grid
    return np.array([[g.q_min + ci * g.dq, g.p_min + cj * g.dp] for ci, cj in centres])


@dataclass(frozen=True)
class ResidualReport:
    value: float
    cores: np.ndarray
    excluded: int
    field: np.ndarray  # normalized residual, NaN where excluded


def stationary_residual(psi: PhaseWaveFunction, H: HamiltonianModel, E, core_radius: float = 1.0,
                        detail: bool = False):
    """Sup of ``|-(i hbar/2)[H_p psi_q - H_q psi_p] - E psi| / max|psi|``.

    ``E`` may be a scalar or a field (one energy per p-row, for example).
    Evaluated on interior nodes with amplitude above the floor.  The phase is
    singular at vortex cores (points the phase winds around, whether or not
    psi vanishes there); finite differences do not converge there, so nodes within ``core_radius``
    of a detected core are left out.
    """
    g = psi.grid
    Q, P = g.mesh()
    dq, _ = d_dq(psi.values, g)
    dp, _ = d_dp(psi.values, g)
    lhs = -0.5j * psi.hbar * (H.dH_dp(Q, P) * dq - H.dH_dq(Q, P) * dp)
    scale = np.max(np.abs(psi.values))
    if scale == 0:
        raise ValueError("residual of the zero state is undefined")
    res = np.abs(lhs - np.asarray(E) * psi.values) / scale
    keep = interior_mask(g) & (np.abs(psi.values) > amplitude_floor(psi.values))
    cores = vortex_cores(psi)
    for qc, pc in cores:
        keep &= (Q - qc) ** 2 + (P - pc) ** 2 > core_radius ** 2
    value = float(np.max(res[keep])) if keep.any() else float("nan")
    if not detail:
        return value
    return ResidualReport(value, cores, int(np.count_nonzero(~keep)), np.where(keep, res, np.nan))


# -- quantization ------------------------------------------------------------------

@dataclass(frozen=True)
class QuantizedLevels:
    branch: Branch
    energies: list[float]
    turning_points: list[float]
    boundary_ratios: list[float]  # |psi(a, 0)| / max|psi| for the real-form state

    @property
    def verified(self) -> bool:
        return all(r <= 1e-10 for r in self.boundary_ratios)


def quantize_ho(branch, n_max: int, m: float = 1.0, omega: float = 1.0, hbar: float = 1.0,
                grid_points: int = 257) -> QuantizedLevels:
    """Energy ladder of one branch plus the turning-point boundary check.

    For each level the real-form state is evaluated at ``(a, 0)``, ``a`` the
    classical turning point, and compared with its maximum over a grid that
    contains the origin.
    """
    branch = Branch(branch)
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    H = HamiltonianModel.harmonic(m, omega)
    ns = range(0, n_max + 1) if branch is Branch.COSINE else range(1, n_max + 1)
    energies, points, ratios = [], [], []
    for n in ns:
        st = HOStationaryState(n, branch, m, omega, hbar, form=StateForm.REAL)
        E = st.energy
        a = turning_point(E, H)
        g = support_grid(st, grid_points)
        Q, P = g.mesh()
        peak = np.max(np.abs(st.values(Q, P)))
        energies.append(E)
        points.append(a)
        ratios.append(float(np.abs(st.values(a, 0.0)) / peak))
    return QuantizedLevels(branch, energies, points, ratios)


# -- orthogonality -----------------------------------------------------------------

def gram_matrix(states: Sequence[PhaseWaveFunction]) -> np.ndarray:
    """Matrix of grid inner products ``<psi_i, psi_j>``."""
    k = len(states)
    G = np.empty((k, k), dtype=complex)
    for i in range(k):
        for j in range(i, k):
            G[i, j] = inner(states[i], states[j])
            G[j, i] = np.conj(G[i, j])
    return G


def ho_gram_matrix(states: Sequence[HOStationaryState], n_radial: int = 80,
                   n_angle: int = 256) -> np.ndarray:
    """Inner products of closed-form HO states by quadrature in polar coordinates.

    In ``(xi, p) = (m omega q, p)`` polar coordinates the states separate into
    an angular harmonic times a radial Gaussian; the angular integral uses
    the periodic rectangle rule (exact for harmonics below ``n_angle``) and
    the radial one Gauss-Laguerre.  States are normalized with the same rule.
    """
    if len({(st.m, st.omega, st.beta) for st in states}) > 1:
        raise ValueError("polar Gram matrix needs states with a common m, omega and beta")
    x, w = np.polynomial.laguerre.laggauss(n_radial)
    theta = 2 * np.pi * np.arange(n_angle) / n_angle
    vals = []
    weights = None
    for st in states:
        # r^2 / (m beta) = x  ->  r = sqrt(m beta x)
        r = np.sqrt(st.m * st.beta * x)
        R, T = np.meshgrid(r, theta, indexing="ij")
        xi, p = R * np.sin(T), R * np.cos(T)
        v = st.values(xi / (st.m * st.omega), p)
        # dq dp = r dr dtheta / (m omega); r dr = (m beta / 2) dx
        wt = (w * np.exp(x))[:, None] * (st.m * st.beta / 2) / (st.m * st.omega) * (2 * np.pi / n_angle)
        if weights is None:
            weights = wt
        vals.append(v)
    k = len(states)
    G = np.empty((k, k), dtype=complex)
    norms = [np.sqrt(np.sum(weights * np.abs(v) ** 2)) for v in vals]
    for i in range(k):
        for j in range(k):
            G[i, j] = np.sum(weights * np.conj(vals[i]) * vals[j]) / (norms[i] * norms[j])
    return G

"""Derived metrics: uncertainty products, structure residuals, fringes, virial ratio."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import HamiltonianModel, PhaseWaveFunction, amplitude_floor, integrate, norm_squared, normalize
from .operators import expectation_op, kinetic, virial_potential
from .scenarios import gaussian_packet
from .stationary import HOStationaryState, ho_wavefunction
from .stencils import d_dp, d_dq, interior_mask


@dataclass(frozen=True)
class UncertaintyReport:
    mean_q: float
    mean_p: float
    var_q: float        # central second moment of q under |psi|^2
    var_p: float        # central second moment of p under |psi|^2
    product: float      # sqrt(var_q * var_p)
    margin: float       # product - hbar / 2
    # momentum spread from the derivative form hbar^2 ∬|d psi/dq|^2 - <p^>^2
    var_p_operator: float
    product_operator: float

    @property
    def satisfied(self) -> bool:
        return self.margin >= 0


def uncertainty_product(psi: PhaseWaveFunction) -> UncertaintyReport:
    """Central moments of the phase-space density and the product of spreads.

    The moments are mean values of the functions ``(q - <q>)^2`` and
    ``(p - <p>)^2`` over ``|psi|^2``.  The derivative-based momentum spread is
    reported alongside for comparison.
    """
    g = psi.grid
    n2 = norm_squared(psi)
    if not n2 > 0:
        raise ValueError("uncertainty of the zero state is undefined")
    Q, P = g.mesh()
    rho = psi.density / n2
    mq = float(integrate(g, rho * Q))
    mp = float(integrate(g, rho * P))
    vq = float(integrate(g, rho * (Q - mq) ** 2))
    vp = float(integrate(g, rho * (P - mp) ** 2))
    dpsi, _ = d_dq(psi.values, g)
    hbar = psi.hbar
    p_hat = float(np.real(integrate(g, np.conj(psi.values) * (-1j * hbar) * dpsi))) / n2
    vp_op = float(hbar * hbar * integrate(g, np.abs(dpsi) ** 2)) / n2 - p_hat ** 2
    prod = float(np.sqrt(vq * vp))
    return UncertaintyReport(mq, mp, vq, vp, prod, prod - 0.5 * hbar, vp_op,
                             float(np.sqrt(vq * max(vp_op, 0.0))))


def uncertainty_corpus(grid, hbar=1.0, m=1.0, omega=1.0):
    """Named states used by the uncertainty suite."""
    corpus = []
    h2 = 0.5 * hbar
    for sq in (0.5, 0.75, 1.0):
        corpus.append((f"min_gauss_sq{sq}", gaussian_packet(0.0, 0.0, sq, h2 / sq, grid, hbar)))
    corpus.append(("gauss_shifted", gaussian_packet(1.0, 0.5, 0.8, h2 / 0.8, grid, hbar)))
    corpus.append(("gauss_wide", gaussian_packet(0.0, 0.0, 1.2, 0.6, grid, hbar)))
    corpus.append(("gauss_carrier", gaussian_packet(0.0, 0.7, 1.0, 0.5, grid, hbar, phase="carrier")))
    for n, br in ((0, "cosine"), (1, "cosine"), (2, "cosine"), (3, "cosine"),
                  (1, "sine"), (2, "sine"), (3, "sine")):
        st = HOStationaryState(n, br, m, omega, hbar)
        corpus.append((f"ho_{br}_{n}", ho_wavefunction(st, grid)))
    st = HOStationaryState(1, "cosine", m, omega, hbar, beta=1.5 * hbar * omega)
    corpus.append(("ho_cosine_1_wide", ho_wavefunction(st, grid)))
    pairs = [((-1.5, 0.0, 0.7), (1.5, 0.0, 0.7)), ((0.0, -1.0, 0.7), (0.0, 1.0, 0.7)),
             ((-1.0, -0.5, 0.6), (1.0, 0.5, 0.9)), ((-2.0, 0.3, 1.0), (2.0, 0.3, 1.0)),
             ((0.0, 0.0, 0.5), (0.0, 0.0, 1.0))]
    for i, (a, b) in enumerate(pairs):
        pa = gaussian_packet(a[0], a[1], a[2], h2 / a[2], grid, hbar)
        pb = gaussian_packet(b[0], b[1], b[2], h2 / b[2], grid, hbar)
        corpus.append((f"sup_gauss_{i}", normalize(pa + pb)))
    a = ho_wavefunction(HOStationaryState(0, "cosine", m, omega, hbar), grid)
    b = gaussian_packet(2.0, 0.0, 0.8, h2 / 0.8, grid, hbar)
    corpus.append(("sup_ho0_gauss", normalize(a + b)))
    left, mid, right = (gaussian_packet(q0, 0.0, 0.6, h2 / 0.6, grid, hbar) for q0 in (-2.0, 0.0, 2.0))
    corpus.append(("sup_gauss_three", normalize(left + mid + right)))
    return corpus


@dataclass(frozen=True)
class StructureSplit:
    continuity: Optional[np.ndarray]  # |d rho/dt + V . grad rho|, None without snapshots
    energy: np.ma.MaskedArray         # rho |(1/2)(H_p S_q - H_q S_p) - H|

    @property
    def continuity_max(self) -> float:
        return float("nan") if self.continuity is None else float(np.nanmax(self.continuity))

    @property
    def energy_max(self) -> float:
        return float(np.ma.max(self.energy))


def action_gradient(psi: PhaseWaveFunction) -> tuple[np.ma.MaskedArray, np.ma.MaskedArray]:
    """``(dS/dq, dS/dp)`` from ``hbar Im(grad psi / psi)``, free of 2 pi hbar jumps."""
    g = psi.grid
    v = psi.values
    mask = np.abs(v) <= amplitude_floor(v)
    safe = np.where(mask, 1.0, v)
    dq, _ = d_dq(v, g)
    dp, _ = d_dp(v, g)
    return (np.ma.masked_array(psi.hbar * np.imag(dq / safe), mask=mask),
            np.ma.masked_array(psi.hbar * np.imag(dp / safe), mask=mask))


def structure_split(psi: PhaseWaveFunction, H: HamiltonianModel,
                    psi_prev: Optional[PhaseWaveFunction] = None,
                    psi_next: Optional[PhaseWaveFunction] = None,
                    dt: Optional[float] = None) -> StructureSplit:
    """Residuals of the real/imaginary parts of the master equation.

    Continuity: ``d rho/dt + V_q d rho/dq + V_p d rho/dp`` with the transport
    flow ``V = (H_p / 2, -H_q / 2)`` and a centered time difference between
    ``psi_prev`` and ``psi_next`` around ``psi``.  Energy relation:
    ``(1/2)(H_p S_q - H_q S_p)`` against ``H``, weighted by ``rho``.  Both are
    reported on interior nodes; boundary nodes carry NaN / are masked.
    """
    g = psi.grid
    Q, P = g.mesh()
    Hp, Hq = H.dH_dp(Q, P), H.dH_dq(Q, P)
    rho = psi.density
    inner_nodes = interior_mask(g)

    continuity = None
    if psi_prev is not None or psi_next is not None:
        if psi_prev is None or psi_next is None or not (dt and dt > 0):
            raise ValueError("continuity residual needs psi_prev, psi_next and dt > 0")
        drho_dt = (psi_next.density - psi_prev.density) / (2 * dt)
        rq, _ = d_dq(rho, g)
        rp, _ = d_dp(rho, g)
        continuity = np.abs(drho_dt + 0.5 * Hp * rq - 0.5 * Hq * rp)
        continuity = np.where(inner_nodes, continuity, np.nan)

    Sq, Sp = action_gradient(psi)
    energy = rho * np.abs(0.5 * (Hp * Sq - Hq * Sp) - H.H(Q, P))
    energy = np.ma.masked_array(np.ma.getdata(energy), mask=np.ma.getmaskarray(energy) | ~inner_nodes)
    return StructureSplit(continuity, energy)


@dataclass(frozen=True)
class Fringes:
    maxima: np.ndarray
    spacing: Optional[float]   # None with fewer than 3 maxima
    visibility: Optional[float]


def fringe_extract(rho_q: np.ndarray, q: np.ndarray, threshold: float = 0.05,
                   background: Optional[np.ndarray] = None) -> Fringes:
    """Locate fringe maxima (parabolic refinement) above ``threshold * max``.

    With ``background`` (the incoherent sum of the single-source patterns)
    the pattern is flat-fielded first: maxima are taken from
    ``rho_q / background`` on nodes where the background exceeds
    ``threshold`` of its maximum.  Dividing out the slowly varying envelope
    stops it from pulling the maxima toward the centre.
    """
    rho_q = np.asarray(rho_q, dtype=float)
    q = np.asarray(q, dtype=float)
    h = q[1] - q[0]
    if background is None:
        signal = rho_q
        region = rho_q > threshold * rho_q.max()
    else:
        background = np.asarray(background, dtype=float)
        region = background > threshold * background.max()
        signal = np.where(region, rho_q / np.where(region, background, 1.0), 0.0)
    c = signal[1:-1]
    inside = region[1:-1] & region[:-2] & region[2:]
    is_max = inside & (c >= signal[:-2]) & (c > signal[2:])
    idx = np.nonzero(is_max)[0] + 1
    peaks = []
    for i in idx:
        a, b, d = signal[i - 1], signal[i], signal[i + 1]
        den = a - 2 * b + d
        shift = 0.5 * (a - d) / den if den != 0 else 0.0
        peaks.append(q[i] + shift * h)
    peaks = np.array(peaks)
    if len(peaks) < 3:
        return Fringes(peaks, None, None)
    spacing = float(np.mean(np.diff(peaks)))
    lo, hi = idx[0], idx[-1]
    i_min = signal[lo:hi + 1].min()
    i_max = signal[idx].max()
    vis = float((i_max - i_min) / (i_max + i_min)) if i_max + i_min > 0 else None
    return Fringes(peaks, spacing, vis)


@dataclass(frozen=True)
class VirialReport:
    kinetic: float
    virial: float
    ratio: Optional[float]  # None when <U^> is negligible


def virial_report(psi: PhaseWaveFunction, H: HamiltonianModel) -> VirialReport:
    t = expectation_op(kinetic(H), psi)
    u = expectation_op(virial_potential(H), psi)
    return VirialReport(t, u, t / u if abs(u) >= 1e-12 else None)

"""Builders for worked cases: plane waves, Gaussian packets and two slits."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    HamiltonianModel,
    PhaseGrid,
    PhaseWaveFunction,
    build_grid,
    marginal_q,
    norm_squared,
    normalize,
)
from .dynamics import evolve


# -- plane waves -------------------------------------------------------------------

def plane_wave(p0: float, grid: PhaseGrid, hbar: float = 1.0, t: float = 0.0, m: float = 1.0,
               sigma_p: Optional[float] = None, E: Optional[float] = None) -> PhaseWaveFunction:
    """``exp(i (p q - E t) / hbar)`` on every row, with a Gaussian p-profile around ``p0``.

    The profile (width ``sigma_p``, three p-cells by default) makes the state
    normalizable on a finite grid.  Each row evolves with its own kinetic
    energy ``p^2 / 2m`` unless a fixed ``E`` is passed, so ``t > 0`` gives
    the exact free evolution of the ``t = 0`` field.
    """
    if sigma_p is None:
        sigma_p = 3.0 * grid.dp
    if not sigma_p > 0:
        raise ValueError("sigma_p must be positive")
    p_hi = abs(p0) + 5.0 * sigma_p
    if p_hi > 0 and 2 * np.pi * hbar / p_hi < 4 * grid.dq:
        raise ValueError(f"wavelength 2 pi hbar / {p_hi:.4g} is below four q-cells")
    Q, P = grid.mesh()
    energy = P * P / (2.0 * m) if E is None else E
    profile = np.exp(-((P - p0) ** 2) / (4.0 * sigma_p ** 2))
    return normalize(PhaseWaveFunction(grid, profile * np.exp(1j * (P * Q - energy * t) / hbar), hbar))


def commensurate_grid(q_min: float, q_max: float, n_q: int, p_first: int, n_p: int,
                      hbar: float = 1.0) -> PhaseGrid:
    """Periodic-in-q grid whose every p-row holds a whole number of wavelengths.

    Rows sit at ``p = (p_first + j) * 2 pi hbar / L`` with ``L = q_max - q_min``,
    so ``exp(i p q / hbar)`` is periodic on the q axis.
    """
    dp = 2 * np.pi * hbar / (q_max - q_min)
    return build_grid(q_min, q_max, p_first * dp, (p_first + n_p - 1) * dp, n_q, n_p, "periodic_q")


# -- packets -----------------------------------------------------------------------

def gaussian_packet(q0: float, p0: float, sigma_q: float, sigma_p: float, grid: PhaseGrid,
                    hbar: float = 1.0, phase: str = "action") -> PhaseWaveFunction:
    """Gaussian amplitude with density widths ``sigma_q``, ``sigma_p`` around ``(q0, p0)``.

    ``phase='action'`` uses ``S = p (q - q0)``: each row carries its own
    momentum, so packets released from different points interfere after free
    transport.  ``phase='carrier'`` uses the single carrier ``S = p0 (q - q0)``.
    """
    if not (sigma_q > 0 and sigma_p > 0):
        raise ValueError("widths must be positive")
    if sigma_q * sigma_p < 0.5 * hbar * (1 - 1e-12):
        raise ValueError(f"sigma_q * sigma_p = {sigma_q * sigma_p:.6g} is below hbar/2")
    Q, P = grid.mesh()
    amp = np.exp(-((Q - q0) ** 2) / (4 * sigma_q ** 2) - ((P - p0) ** 2) / (4 * sigma_p ** 2))
    if phase == "action":
        S = P * (Q - q0)
    elif phase == "carrier":
        S = p0 * (Q - q0)
    else:
        raise ValueError("phase must be 'action' or 'carrier'")
    return normalize(PhaseWaveFunction(grid, amp * np.exp(1j * S / hbar), hbar))


# -- two slits ---------------------------------------------------------------------

@dataclass(frozen=True)
class SlitSpec:
    d: float                        # slit separation; slits at center -/+ d/2
    sigma_slit: float               # position width of each slit packet
    p0: float                       # incoming momentum
    L: float                        # screen distance
    sigma_p: Optional[float] = None  # momentum width; hbar / (2 sigma_slit) if omitted
    center: float = 0.0

    def __post_init__(self):
        if not self.sigma_slit > 0:
            raise ValueError("slit width must be positive")
        if self.p0 == 0:
            raise ValueError("incoming momentum must be nonzero")
        if not self.L > 0:
            raise ValueError("screen distance must be positive")
        if self.d < 2 * self.sigma_slit:
            warnings.warn("slit packets overlap (d < 2 sigma_slit)", RuntimeWarning, stacklevel=3)

    def momentum_width(self, hbar: float = 1.0) -> float:
        return self.sigma_p if self.sigma_p is not None else hbar / (2 * self.sigma_slit)

    def screen_time(self, m: float = 1.0) -> float:
        """Time for the packet centroid to cover ``L`` at the transport speed ``p0 / 2m``."""
        return 2 * m * self.L / abs(self.p0)

    def fringe_spacing(self, t: float, m: float = 1.0, hbar: float = 1.0) -> float:
        """Stationary-phase fringe spacing of the freely transported slit pair.

        Transport moves row p by ``v p`` with ``v = t / 2m``; integrating the
        cross term over p gives fringes of spacing
        ``2 pi hbar v / d * (1 + sigma_q^2 / (sigma_p^2 v^2))``.
        """
        v = t / (2 * m)
        sq, sp = self.sigma_slit, self.momentum_width(hbar)
        return 2 * np.pi * hbar * v / self.d * (1 + sq * sq / (sp * sp * v * v))


@dataclass(frozen=True)
class TwoSlitStates:
    psi1: PhaseWaveFunction
    psi2: PhaseWaveFunction
    psi_sup: PhaseWaveFunction
    scale: float  # psi_sup = (psi1 + psi2) / scale


def two_slit_superpose(spec: SlitSpec, grid: PhaseGrid, hbar: float = 1.0) -> TwoSlitStates:
    sp = spec.momentum_width(hbar)
    psi1 = gaussian_packet(spec.center - spec.d / 2, spec.p0, spec.sigma_slit, sp, grid, hbar)
    psi2 = gaussian_packet(spec.center + spec.d / 2, spec.p0, spec.sigma_slit, sp, grid, hbar)
    total = psi1 + psi2
    scale = float(np.sqrt(norm_squared(total)))
    return TwoSlitStates(psi1, psi2, total * (1.0 / scale), scale)


@dataclass(frozen=True)
class InterferencePattern:
    q: np.ndarray
    pattern: np.ndarray   # marginal_q of the evolved superposition
    envelope: np.ndarray  # marginal_q of (|psi1|^2 + |psi2|^2) / scale^2
    cross: np.ndarray     # marginal_q of 2 Re(psi1* psi2) / scale^2
    states: TwoSlitStates  # evolved states


def interference_pattern(states: TwoSlitStates, H: HamiltonianModel, t_screen: float,
                         dt: Optional[float] = None, leak_limit: float = 1e-4,
                         method: str = "quintic") -> InterferencePattern:
    """Evolve the slit packets freely to ``t_screen`` and split the q-marginal.

    The two packets and the superposition are evolved separately; by
    linearity the evolved superposition equals the sum of the evolved
    packets, which the caller may check.  Raises
    :class:`~qphase.dynamics.BoundaryLeakError` when the edge mass exceeds
    ``leak_limit``.
    """
    if dt is None:
        dt = t_screen / 100
    finals = [evolve(s, H, t_screen, dt, method=method, leak_limit=leak_limit).final
              for s in (states.psi1, states.psi2, states.psi_sup)]
    a, b, sup = finals
    k = 1.0 / states.scale ** 2
    grid = sup.grid
    pw = grid.p_weights()
    envelope = k * ((a.density + b.density) @ pw)
    cross = k * ((2 * np.real(np.conj(a.values) * b.values)) @ pw)
    return InterferencePattern(grid.q, marginal_q(sup), envelope, cross,
                               TwoSlitStates(a, b, sup, states.scale))

"""Configuration-space Schrödinger reference solver and analytic densities.

Crank-Nicolson on a uniform q grid with a second-order Laplacian and zero
Dirichlet ends: ``(1 + i dt H / 2 hbar) psi' = (1 - i dt H / 2 hbar) psi``.
The banded system is factorized once per (potential, dt) with SuperLU.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu


@dataclass(frozen=True, eq=False)
class ConfigWaveFunction:
    q: np.ndarray
    values: np.ndarray
    hbar: float = 1.0
    m: float = 1.0

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        v = np.array(self.values, dtype=complex)
        if q.ndim != 1 or v.shape != q.shape:
            raise ValueError("values must match the 1-D q grid")
        if q.size < 3:
            raise ValueError("need at least 3 nodes")
        h = np.diff(q)
        if not np.allclose(h, h[0], rtol=1e-9, atol=0):
            raise ValueError("q grid must be uniform")
        if not np.all(np.isfinite(v)):
            raise ValueError("wave function contains NaN or Inf")
        q.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "values", v)

    @property
    def dq(self) -> float:
        return float(self.q[1] - self.q[0])

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def with_values(self, values) -> "ConfigWaveFunction":
        return ConfigWaveFunction(self.q, values, self.hbar, self.m)


def config_grid(q_min: float, q_max: float, n: int) -> np.ndarray:
    if not q_max > q_min or n < 3:
        raise ValueError("need q_max > q_min and n >= 3")
    return np.linspace(q_min, q_max, n)


def trapezoid(f: np.ndarray, q: np.ndarray) -> float:
    return float(np.trapezoid(f, q))


def config_norm_squared(psi: ConfigWaveFunction) -> float:
    return trapezoid(psi.density, psi.q)


def config_normalize(psi: ConfigWaveFunction) -> ConfigWaveFunction:
    n2 = config_norm_squared(psi)
    if not n2 > 0:
        raise ValueError("cannot normalize a zero state")
    return psi.with_values(psi.values / np.sqrt(n2))


@dataclass(eq=False)
class CNPropagator:
    """Reusable Crank-Nicolson stepper for a fixed grid, potential and dt."""
    q: np.ndarray
    U: np.ndarray
    dt: float
    hbar: float = 1.0
    m: float = 1.0
    _lu: object = field(init=False, repr=False)
    _rhs: object = field(init=False, repr=False)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        q = np.asarray(self.q, dtype=float)
        U = np.broadcast_to(np.asarray(self.U, dtype=float), q.shape)
        if not np.all(np.isfinite(U)):
            raise ValueError("potential must be finite")
        h = q[1] - q[0]
        n = q.size - 2  # interior unknowns; ends held at zero
        kin = self.hbar ** 2 / (2 * self.m * h * h)
        main = 2 * kin + U[1:-1]
        off = -kin * np.ones(n - 1)
        Hm = sparse.diags([off, main, off], [-1, 0, 1], format="csc", dtype=complex)
        a = 0.5j * self.dt / self.hbar
        eye = sparse.identity(n, format="csc", dtype=complex)
        try:
            self._lu = splu((eye + a * Hm).tocsc())
        except RuntimeError as exc:  # singular factor
            raise np.linalg.LinAlgError(f"Crank-Nicolson matrix is singular: {exc}") from exc
        self._rhs = (eye - a * Hm).tocsr()

    def step_values(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros_like(values, dtype=complex)
        out[1:-1] = self._lu.solve(self._rhs @ values[1:-1])
        return out

    def step(self, psi: ConfigWaveFunction, n_steps: int = 1) -> ConfigWaveFunction:
        v = np.array(psi.values)
        for _ in range(n_steps):
            v = self.step_values(v)
        return psi.with_values(v)


def cn_step(psi: ConfigWaveFunction, U, dt: float) -> ConfigWaveFunction:
    """One Crank-Nicolson step of ``i hbar psi_t = -hbar^2/2m psi_qq + U psi``."""
    return CNPropagator(psi.q, U, dt, psi.hbar, psi.m).step(psi)


def cn_evolve(psi: ConfigWaveFunction, U, dt: float, n_steps: int) -> ConfigWaveFunction:
    return CNPropagator(psi.q, U, dt, psi.hbar, psi.m).step(psi, n_steps)


def ho_ground_density(q: np.ndarray, m: float = 1.0, omega: float = 1.0, hbar: float = 1.0) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.sqrt(m * omega / (np.pi * hbar)) * np.exp(-m * omega * q * q / hbar)


def ho_ground_state(q: np.ndarray, m: float = 1.0, omega: float = 1.0, hbar: float = 1.0) -> ConfigWaveFunction:
    return ConfigWaveFunction(q, np.sqrt(ho_ground_density(q, m, omega, hbar)), hbar, m)


def gaussian_config_packet(q: np.ndarray, q0: float, p0: float, sigma: float, hbar: float = 1.0,
                           m: float = 1.0) -> ConfigWaveFunction:
    """Normalized packet with density width ``sigma`` and mean momentum ``p0``."""
    q = np.asarray(q, dtype=float)
    v = np.exp(-((q - q0) ** 2) / (4 * sigma * sigma) + 1j * p0 * q / hbar)
    return config_normalize(ConfigWaveFunction(q, v, hbar, m))


def free_packet_width2(sigma: float, t: float, hbar: float = 1.0, m: float = 1.0) -> float:
    return sigma * sigma * (1 + (hbar * t / (2 * m * sigma * sigma)) ** 2)


@dataclass(frozen=True)
class DensityComparison:
    l1: float
    l2: float
    linf: float
    centroid_difference: float  # centroid(b) - centroid(a)


def compare_densities(a: np.ndarray, b: np.ndarray, q: np.ndarray) -> DensityComparison:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    q = np.asarray(q, dtype=float)
    if a.shape != b.shape or a.shape != q.shape:
        raise ValueError("densities must live on the same grid")
    diff = a - b
    ca = trapezoid(a * q, q) / trapezoid(a, q) if trapezoid(a, q) else 0.0
    cb = trapezoid(b * q, q) / trapezoid(b, q) if trapezoid(b, q) else 0.0
    return DensityComparison(
        l1=trapezoid(np.abs(diff), q),
        l2=float(np.sqrt(trapezoid(diff * diff, q))),
        linf=float(np.max(np.abs(diff))),
        centroid_difference=float(cb - ca),
    )

"""Phase-space grids, wave functions, Hamiltonians and quadrature.

Fields are stored as ``(n_q, n_p)`` arrays, q along axis 0 (row-major,
q-outer), matching the CSV layout written by the CLI.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

AMPLITUDE_FLOOR = 1e-12


class DegenerateStateError(ValueError):
    """Raised when an operation needs a state with nonzero norm."""


class BoundaryMode(str, Enum):
    TRUNCATE = "truncate"
    PERIODIC_Q = "periodic_q"


@dataclass(frozen=True)
class PhaseGrid:
    q_min: float
    q_max: float
    p_min: float
    p_max: float
    n_q: int
    n_p: int
    boundary_mode: BoundaryMode = BoundaryMode.TRUNCATE

    def __post_init__(self):
        errors = []
        if int(self.n_q) != self.n_q or self.n_q < 4:
            errors.append(f"n_q must be an integer >= 4, got {self.n_q}")
        if int(self.n_p) != self.n_p or self.n_p < 4:
            errors.append(f"n_p must be an integer >= 4, got {self.n_p}")
        if not self.q_max > self.q_min:
            errors.append(f"q_max ({self.q_max}) must exceed q_min ({self.q_min})")
        if not self.p_max > self.p_min:
            errors.append(f"p_max ({self.p_max}) must exceed p_min ({self.p_min})")
        if errors:
            raise ValueError("; ".join(errors))
        object.__setattr__(self, "boundary_mode", BoundaryMode(self.boundary_mode))

    @property
    def periodic_q(self) -> bool:
        return self.boundary_mode is BoundaryMode.PERIODIC_Q

    @property
    def dq(self) -> float:
        span = self.q_max - self.q_min
        return span / self.n_q if self.periodic_q else span / (self.n_q - 1)

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / (self.n_p - 1)

    @property
    def q(self) -> np.ndarray:
        return self.q_min + self.dq * np.arange(self.n_q)

    @property
    def p(self) -> np.ndarray:
        return self.p_min + self.dp * np.arange(self.n_p)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_q, self.n_p)

    @property
    def cell_area(self) -> float:
        return self.dq * self.dp

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(Q, P)`` coordinate arrays with ij indexing."""
        return np.meshgrid(self.q, self.p, indexing="ij")

    def q_weights(self) -> np.ndarray:
        """Quadrature weights along q (rectangle if periodic, else trapezoid)."""
        w = np.full(self.n_q, self.dq)
        if not self.periodic_q:
            w[0] = w[-1] = 0.5 * self.dq
        return w

    def p_weights(self) -> np.ndarray:
        w = np.full(self.n_p, self.dp)
        w[0] = w[-1] = 0.5 * self.dp
        return w

    def weights(self) -> np.ndarray:
        return np.outer(self.q_weights(), self.p_weights())

    def nearest_p_index(self, p: float) -> int:
        return int(np.clip(np.rint((p - self.p_min) / self.dp), 0, self.n_p - 1))

    def nearest_q_index(self, q: float) -> int:
        i = int(np.rint((q - self.q_min) / self.dq))
        if self.periodic_q:
            return i % self.n_q
        return int(np.clip(i, 0, self.n_q - 1))


def build_grid(q_min, q_max, p_min, p_max, n_q, n_p, boundary_mode="truncate") -> PhaseGrid:
    return PhaseGrid(float(q_min), float(q_max), float(p_min), float(p_max),
                     int(n_q), int(n_p), BoundaryMode(boundary_mode))


@dataclass(frozen=True, eq=False)
class PhaseWaveFunction:
    grid: PhaseGrid
    values: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("wave function contains NaN or Inf")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def with_values(self, values: np.ndarray) -> "PhaseWaveFunction":
        return PhaseWaveFunction(self.grid, values, self.hbar)

    def __add__(self, other: "PhaseWaveFunction") -> "PhaseWaveFunction":
        _check_compatible(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "PhaseWaveFunction") -> "PhaseWaveFunction":
        _check_compatible(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar) -> "PhaseWaveFunction":
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__


def _check_compatible(a: PhaseWaveFunction, b: PhaseWaveFunction) -> None:
    if a.grid != b.grid:
        raise ValueError("wave functions live on different grids")
    if a.hbar != b.hbar:
        raise ValueError("wave functions use different hbar")


def integrate(grid: PhaseGrid, f: np.ndarray) -> complex | float:
    """Phase-space quadrature of a field."""
    return np.sum(grid.weights() * f)


def norm_squared(psi: PhaseWaveFunction) -> float:
    return float(integrate(psi.grid, psi.density))


def normalize(psi: PhaseWaveFunction) -> PhaseWaveFunction:
    n2 = norm_squared(psi)
    if not n2 > 0:
        raise DegenerateStateError("cannot normalize a state with zero norm")
    return psi.with_values(psi.values / np.sqrt(n2))


def inner(a: PhaseWaveFunction, b: PhaseWaveFunction) -> complex:
    """``<a|b> = ∬ a* b dq dp``."""
    _check_compatible(a, b)
    return complex(integrate(a.grid, np.conj(a.values) * b.values))


def marginal_q(psi: PhaseWaveFunction) -> np.ndarray:
    return psi.density @ psi.grid.p_weights()


def marginal_p(psi: PhaseWaveFunction) -> np.ndarray:
    return psi.grid.q_weights() @ psi.density


def expectation(psi: PhaseWaveFunction, F) -> float:
    """Mean value of a real phase-space function ``F`` (array or scalar)."""
    n2 = norm_squared(psi)
    if abs(n2 - 1.0) > 1e-6:
        warnings.warn(f"expectation on a state with norm^2 = {n2:.8g}", RuntimeWarning, stacklevel=2)
    F = np.broadcast_to(np.asarray(F, dtype=float), psi.grid.shape)
    return float(integrate(psi.grid, psi.density * F))


@dataclass(frozen=True, eq=False)
class PolarDecomposition:
    """Amplitude/action split ``psi = amplitude * exp(i action / hbar)``.

    ``action`` is reported in ``(-pi hbar, pi hbar]``; nodes where the
    amplitude falls below ``floor`` carry ``defined == False`` and action 0.
    """
    amplitude: np.ndarray
    action: np.ndarray
    defined: np.ndarray
    floor: float
    hbar: float


def amplitude_floor(values: np.ndarray) -> float:
    return AMPLITUDE_FLOOR * float(np.max(np.abs(values), initial=0.0))


def assemble_polar(amplitude, action, grid: PhaseGrid, hbar: float = 1.0) -> PhaseWaveFunction:
    amplitude = np.asarray(amplitude, dtype=float)
    if np.any(amplitude < 0):
        raise ValueError("amplitude must be nonnegative")
    return PhaseWaveFunction(grid, amplitude * np.exp(1j * np.asarray(action, dtype=float) / hbar), hbar)


def decompose_polar(psi: PhaseWaveFunction) -> PolarDecomposition:
    amp = np.abs(psi.values)
    floor = amplitude_floor(psi.values)
    defined = amp > floor
    phase = np.angle(psi.values)
    # np.angle returns [-pi, pi]; map -pi onto +pi
    phase = np.where(phase <= -np.pi, np.pi, phase)
    action = np.where(defined, psi.hbar * phase, 0.0)
    return PolarDecomposition(amp, action, defined, floor, psi.hbar)


class HamiltonianKind(str, Enum):
    FREE = "free"
    HARMONIC = "harmonic"
    TABULATED = "tabulated"
    RELATIVISTIC = "relativistic"
    CONSTANT = "constant"


@dataclass(frozen=True, eq=False)
class HamiltonianModel:
    """``H(q, p) = T(p) + U(q)`` with derivative evaluators.

    Use the constructors :meth:`free`, :meth:`harmonic`, :meth:`tabulated`,
    :meth:`relativistic` and :meth:`constant`.  For the relativistic kind
    ``m`` is the rest mass.
    """
    kind: HamiltonianKind
    m: float = 1.0
    omega: float = 0.0
    c: Optional[float] = None
    q_table: Optional[np.ndarray] = None
    u_table: Optional[np.ndarray] = None
    value: float = 0.0
    du_table: Optional[np.ndarray] = field(default=None, repr=False)
    boundary_flags: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("mass must be positive")
        if self.kind is HamiltonianKind.HARMONIC and not self.omega > 0:
            raise ValueError("omega must be positive for the harmonic kind")
        if self.kind is HamiltonianKind.RELATIVISTIC and not (self.c is not None and self.c > 0):
            raise ValueError("speed of light c must be positive")
        if self.kind is HamiltonianKind.TABULATED:
            q = np.asarray(self.q_table, dtype=float)
            u = np.asarray(self.u_table, dtype=float)
            if q.ndim != 1 or q.shape != u.shape or q.size < 3:
                raise ValueError("tabulated potential needs matching 1-D q and U samples (>= 3)")
            if np.any(np.diff(q) <= 0):
                raise ValueError("tabulated q samples must be strictly increasing")
            du = np.empty_like(u)
            du[1:-1] = (u[2:] - u[:-2]) / (q[2:] - q[:-2])
            du[0] = (u[1] - u[0]) / (q[1] - q[0])
            du[-1] = (u[-1] - u[-2]) / (q[-1] - q[-2])
            flags = np.zeros(q.size, dtype=bool)
            flags[[0, -1]] = True
            object.__setattr__(self, "q_table", q)
            object.__setattr__(self, "u_table", u)
            object.__setattr__(self, "du_table", du)
            object.__setattr__(self, "boundary_flags", flags)

    @classmethod
    def free(cls, m: float = 1.0) -> "HamiltonianModel":
        return cls(HamiltonianKind.FREE, m=m)

    @classmethod
    def harmonic(cls, m: float = 1.0, omega: float = 1.0) -> "HamiltonianModel":
        return cls(HamiltonianKind.HARMONIC, m=m, omega=omega)

    @classmethod
    def tabulated(cls, q: Sequence[float], U: Sequence[float], m: float = 1.0) -> "HamiltonianModel":
        return cls(HamiltonianKind.TABULATED, m=m, q_table=q, u_table=U)

    @classmethod
    def relativistic(cls, m0: float = 1.0, c: float = 1.0, omega: float = 0.0) -> "HamiltonianModel":
        """Relativistic kinetic energy; ``omega > 0`` adds a harmonic potential."""
        return cls(HamiltonianKind.RELATIVISTIC, m=m0, c=c, omega=omega)

    @classmethod
    def constant(cls, value: float = 0.0) -> "HamiltonianModel":
        return cls(HamiltonianKind.CONSTANT, value=value)

    @property
    def closed_form(self) -> bool:
        return self.kind is not HamiltonianKind.TABULATED

    def in_domain(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.kind is HamiltonianKind.TABULATED:
            return (q >= self.q_table[0]) & (q <= self.q_table[-1])
        return np.ones(q.shape, dtype=bool)

    # -- pieces ---------------------------------------------------------------
    def kinetic(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind is HamiltonianKind.CONSTANT:
            return np.zeros_like(p)
        if self.kind is HamiltonianKind.RELATIVISTIC:
            c, m0 = self.c, self.m
            # sqrt(c^2 p^2 + m0^2 c^4) - m0 c^2 without cancellation
            return c * c * p * p / (np.sqrt(c * c * p * p + (m0 * c * c) ** 2) + m0 * c * c)
        return p * p / (2.0 * self.m)

    def dkinetic_dp(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind is HamiltonianKind.CONSTANT:
            return np.zeros_like(p)
        if self.kind is HamiltonianKind.RELATIVISTIC:
            c, m0 = self.c, self.m
            return c * c * p / np.sqrt(c * c * p * p + (m0 * c * c) ** 2)
        return p / self.m

    def potential(self, q):
        q = np.asarray(q, dtype=float)
        if self.kind is HamiltonianKind.CONSTANT:
            return np.full_like(q, self.value)
        if self.kind is HamiltonianKind.TABULATED:
            return np.interp(q, self.q_table, self.u_table)
        if self.omega > 0 and self.kind in (HamiltonianKind.HARMONIC, HamiltonianKind.RELATIVISTIC):
            return 0.5 * self.m * self.omega ** 2 * q * q
        return np.zeros_like(q)

    def dpotential_dq(self, q):
        q = np.asarray(q, dtype=float)
        if self.kind is HamiltonianKind.TABULATED:
            return np.interp(q, self.q_table, self.du_table)
        if self.omega > 0 and self.kind in (HamiltonianKind.HARMONIC, HamiltonianKind.RELATIVISTIC):
            return self.m * self.omega ** 2 * q
        return np.zeros_like(q)

    # -- full function ----------------------------------------------------------
    def H(self, q, p):
        q, p = np.broadcast_arrays(np.asarray(q, float), np.asarray(p, float))
        return self.kinetic(p) + self.potential(q)

    def dH_dq(self, q, p):
        q, p = np.broadcast_arrays(np.asarray(q, float), np.asarray(p, float))
        return self.dpotential_dq(q) + np.zeros_like(p)

    def dH_dp(self, q, p):
        q, p = np.broadcast_arrays(np.asarray(q, float), np.asarray(p, float))
        return self.dkinetic_dp(p) + np.zeros_like(q)

    def on_grid(self, grid: PhaseGrid) -> "HamiltonianModel":
        """Tabulate this model's potential on the grid's q axis."""
        return HamiltonianModel.tabulated(grid.q, self.potential(grid.q), m=self.m)


@dataclass(frozen=True, eq=False)
class SeparableState:
    """Product state ``psi(x, px) * psi(y, py) * ...`` for f > 1 degrees of freedom.

    Only separable products are supported; each factor is a 1-D phase-space
    wave function with its own Hamiltonian.
    """
    factors: tuple[PhaseWaveFunction, ...]
    hamiltonians: tuple[HamiltonianModel, ...]

    def __post_init__(self):
        if len(self.factors) != len(self.hamiltonians) or not self.factors:
            raise ValueError("need one Hamiltonian per factor")
        hbars = {f.hbar for f in self.factors}
        if len(hbars) != 1:
            raise ValueError("factors must share hbar")

    @property
    def degrees_of_freedom(self) -> int:
        return len(self.factors)

    def norm_squared(self) -> float:
        return float(np.prod([norm_squared(f) for f in self.factors]))

    def marginal(self, axis: int) -> np.ndarray:
        """Configuration-space density along one coordinate, others integrated out."""
        others = np.prod([norm_squared(f) for i, f in enumerate(self.factors) if i != axis])
        return others * marginal_q(self.factors[axis])


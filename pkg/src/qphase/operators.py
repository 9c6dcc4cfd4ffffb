"""Phase-space operators, local observables and expectation values.

Operator set (hbar explicit, one degree of freedom):

    momentum   p^ = -i hbar d/dq
    position   q^ = -i hbar d/dp
    kinetic    T^ = (1/2) (dH/dp) p^
    virial     U^ = (1/2) (-dH/dq) q^
    energy     E^ = i hbar d/dt   (centered difference of two snapshots)

Spatial derivatives use fourth-order stencils (see :mod:`qphase.stencils`).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .core import (
    HamiltonianModel,
    PhaseWaveFunction,
    SeparableState,
    amplitude_floor,
    integrate,
    norm_squared,
)
from .stencils import d_dp, d_dq, diff


class OperatorKind(str, Enum):
    ENERGY = "energy"
    MOMENTUM = "momentum"
    POSITION = "position"
    VIRIAL_POTENTIAL = "virial_potential"
    KINETIC = "kinetic"
    COMPOSITE = "composite"


_HERMITIAN = {OperatorKind.MOMENTUM, OperatorKind.POSITION, OperatorKind.KINETIC,
              OperatorKind.VIRIAL_POTENTIAL}


class MissingSnapshotError(ValueError):
    """The energy operator was applied without its neighbouring snapshots."""


@dataclass(frozen=True)
class PhaseOperator:
    kind: OperatorKind
    H: Optional[HamiltonianModel] = None
    # (coefficient, operator) pairs for composite operators
    terms: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "kind", OperatorKind(self.kind))
        if self.kind in (OperatorKind.KINETIC, OperatorKind.VIRIAL_POTENTIAL) and self.H is None:
            raise ValueError(f"{self.kind.value} operator needs a Hamiltonian")
        if self.kind is OperatorKind.COMPOSITE and not self.terms:
            raise ValueError("composite operator needs terms")

    def __add__(self, other: "PhaseOperator") -> "PhaseOperator":
        return PhaseOperator(OperatorKind.COMPOSITE, terms=_terms(self) + _terms(other))

    def __rmul__(self, a) -> "PhaseOperator":
        return PhaseOperator(OperatorKind.COMPOSITE, terms=tuple((a * c, op) for c, op in _terms(self)))

    @property
    def hermitian(self) -> bool:
        if self.kind is OperatorKind.COMPOSITE:
            return all(np.isreal(c) and op.hermitian for c, op in self.terms)
        return self.kind in _HERMITIAN


def _terms(op):
    return op.terms if op.kind is OperatorKind.COMPOSITE else ((1.0, op),)


momentum = PhaseOperator(OperatorKind.MOMENTUM)
position = PhaseOperator(OperatorKind.POSITION)
energy = PhaseOperator(OperatorKind.ENERGY)


def kinetic(H: HamiltonianModel) -> PhaseOperator:
    return PhaseOperator(OperatorKind.KINETIC, H)


def virial_potential(H: HamiltonianModel) -> PhaseOperator:
    return PhaseOperator(OperatorKind.VIRIAL_POTENTIAL, H)


def apply(op: PhaseOperator, psi: PhaseWaveFunction, psi_prev: Optional[PhaseWaveFunction] = None,
          psi_next: Optional[PhaseWaveFunction] = None, dt: Optional[float] = None,
          return_flags: bool = False):
    """Apply ``op`` to ``psi``; returns the complex result field.

    For the energy operator ``psi`` is the middle snapshot and ``psi_prev`` /
    ``psi_next`` sit ``dt`` before and after it.  With ``return_flags`` the
    nodes computed with one-sided boundary stencils are returned as well.
    """
    g, hbar = psi.grid, psi.hbar
    flags = np.zeros(g.shape, dtype=bool)
    kind = op.kind
    if kind is OperatorKind.MOMENTUM:
        d, flags = d_dq(psi.values, g)
        out = -1j * hbar * d
    elif kind is OperatorKind.POSITION:
        d, flags = d_dp(psi.values, g)
        out = -1j * hbar * d
    elif kind is OperatorKind.KINETIC:
        Q, P = g.mesh()
        d, flags = d_dq(psi.values, g)
        out = 0.5 * op.H.dH_dp(Q, P) * (-1j * hbar * d)
    elif kind is OperatorKind.VIRIAL_POTENTIAL:
        Q, P = g.mesh()
        d, flags = d_dp(psi.values, g)
        out = 0.5 * (-op.H.dH_dq(Q, P)) * (-1j * hbar * d)
    elif kind is OperatorKind.ENERGY:
        if psi_prev is None or psi_next is None or dt is None:
            raise MissingSnapshotError("energy operator needs psi_prev, psi_next and dt")
        if not dt > 0:
            raise ValueError("dt must be positive")
        out = 1j * hbar * (psi_next.values - psi_prev.values) / (2.0 * dt)
    else:
        out = np.zeros(g.shape, dtype=complex)
        for c, term in op.terms:
            part, f = apply(term, psi, psi_prev, psi_next, dt, return_flags=True)
            out = out + c * part
            flags = flags | f
    flags = np.asarray(flags, dtype=bool)
    return (out, flags) if return_flags else out


def local_ratio(values: np.ndarray, result: np.ndarray) -> np.ma.MaskedArray:
    """``result / values`` with nodes below the amplitude floor masked."""
    mask = np.abs(values) <= amplitude_floor(values)
    safe = np.where(mask, 1.0, values)
    return np.ma.masked_array(result / safe, mask=mask)


def observable(op: PhaseOperator, psi: PhaseWaveFunction, *args, **kwargs) -> np.ma.MaskedArray:
    """Local observable ``Re(L^psi / psi)``; nodes with negligible amplitude are masked."""
    return local_ratio(psi.values, apply(op, psi, *args, **kwargs)).real


def expectation_op(op: PhaseOperator, psi: PhaseWaveFunction, *args, **kwargs) -> float:
    """``Re ∬ psi* (L^ psi) dq dp``."""
    n2 = norm_squared(psi)
    if abs(n2 - 1.0) > 1e-6:
        warnings.warn(f"expectation on a state with norm^2 = {n2:.8g}", RuntimeWarning, stacklevel=2)
    val = complex(integrate(psi.grid, np.conj(psi.values) * apply(op, psi, *args, **kwargs)))
    if op.hermitian and abs(val.imag) > 1e-8:
        warnings.warn(f"imaginary part {val.imag:.3g} in a Hermitian expectation", RuntimeWarning,
                      stacklevel=2)
    return val.real


def quantum_potential(psi: PhaseWaveFunction, H: HamiltonianModel) -> np.ma.MaskedArray:
    """``U_q = Re((i hbar / 2) dH/dq d(ln psi)/dp) - U``; masked where |psi| is negligible."""
    Q, _ = psi.grid.mesh()
    virial = observable(virial_potential(H), psi)
    return virial - H.potential(Q)


def quantum_force(psi: PhaseWaveFunction, H: HamiltonianModel) -> np.ma.MaskedArray:
    """``F_q = -dU_q/dq``; any node whose stencil touches a masked node is masked."""
    Uq = quantum_potential(psi, H)
    return _minus_gradient(Uq, psi.grid.dq, psi.grid.periodic_q)


def _minus_gradient(field, h, periodic):
    mask = np.ma.getmaskarray(field)
    d, _ = diff(np.ma.filled(field, 0.0), h, 0, periodic)
    spread = mask.copy()
    for s in (1, 2):
        if periodic:
            spread |= np.roll(mask, s, axis=0) | np.roll(mask, -s, axis=0)
        else:
            spread[s:] |= mask[:-s]
            spread[:-s] |= mask[s:]
    return np.ma.masked_array(-d, mask=spread)


def separable_quantum_force(state: SeparableState) -> list[np.ma.MaskedArray]:
    """Per-coordinate quantum force of a product state.

    For ``psi = prod psi_i(q_i, p_i)`` and ``H = sum H_i`` the logarithmic
    derivative in ``p_i`` only sees factor ``i``, so the quantum potential is a
    sum of per-factor terms and the i-th force component depends on factor
    ``i`` alone.
    """
    return [quantum_force(f, H) for f, H in zip(state.factors, state.hamiltonians)]


@dataclass(frozen=True)
class MomentumConsistency:
    max_im: float          # sup |Im p~| over unmasked nodes
    max_re: float          # sup |Re p~|
    max_im_square: float   # sup |Im((p^2 psi)/psi)|
    max_deviation: float   # sup |(p^2 psi)/psi - (Re p~)^2|
    mean_square: float     # density-weighted mean of Re((p^2 psi)/psi), i.e. <p^2>/norm^2
    peak_square: float     # Re((p^2 psi)/psi) at the density maximum


def momentum_consistency_diagnostic(psi: PhaseWaveFunction, interior: bool = True) -> MomentumConsistency:
    """Compare double application of p^ with the square of the local momentum.

    ``p~ = (p^ psi) / psi``.  For exact momentum eigenstates the two agree;
    for a real amplitude ``Re p~ = 0`` while ``(p^2 psi)/psi`` stays nonzero.
    """
    g = psi.grid
    p1 = apply(momentum, psi)
    p2 = apply(momentum, psi.with_values(p1))
    pt = local_ratio(psi.values, p1)
    p2t = local_ratio(psi.values, p2)
    mask = np.ma.getmaskarray(pt)
    if interior and not g.periodic_q:
        edge = np.zeros(g.shape, dtype=bool)
        edge[:4] = edge[-4:] = True
        mask = mask | edge
    ok = ~mask
    if not ok.any():
        nan = float("nan")
        return MomentumConsistency(nan, nan, nan, nan, nan, nan)
    dev = np.abs(np.ma.getdata(p2t) - np.ma.getdata(pt).real ** 2)
    rho = psi.density
    mean_sq = float(integrate(g, np.conj(psi.values) * p2).real / integrate(g, rho))
    peak = np.unravel_index(np.argmax(rho), rho.shape)
    return MomentumConsistency(
        max_im=float(np.max(np.abs(np.ma.getdata(pt).imag)[ok])),
        max_re=float(np.max(np.abs(np.ma.getdata(pt).real)[ok])),
        max_im_square=float(np.max(np.abs(np.ma.getdata(p2t).imag)[ok])),
        max_deviation=float(np.max(dev[ok])),
        mean_square=mean_sq,
        peak_square=float(np.ma.getdata(p2t)[peak].real),
    )

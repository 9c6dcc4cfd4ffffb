"""Time evolution of phase-space wave functions.

The master equation is a first-order transport equation,

    dpsi/dt = -(1/2) [ dH/dp dpsi/dq - dH/dq dpsi/dp ],

so psi is carried unchanged along the half-speed Hamiltonian flow
``V = (dH/dp / 2, -dH/dq / 2)``.  Each step traces every node one RK4 step
backward to its departure point and interpolates the old field there.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .core import (
    HamiltonianKind,
    HamiltonianModel,
    PhaseGrid,
    PhaseWaveFunction,
    norm_squared,
)
from .interpolation import sample, shift_rows

log = logging.getLogger(__name__)

Velocity = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


class OutOfDomainError(RuntimeError):
    """A characteristic left the region where the flow is defined."""


class BoundaryLeakError(RuntimeError):
    """Too much probability reached the edge of a truncated grid."""


class Regime(str, Enum):
    NONRELATIVISTIC = "nonrelativistic"
    RELATIVISTIC = "relativistic"


@dataclass(frozen=True, eq=False)
class PhaseFlowField:
    grid: PhaseGrid
    v_q: np.ndarray
    v_p: np.ndarray
    regime: Regime = Regime.NONRELATIVISTIC
    velocity: Optional[Velocity] = field(default=None, repr=False)
    domain: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    c: Optional[float] = None
    branch_sign: int = 1
    # nodes whose velocity used a one-sided potential difference
    flagged: Optional[np.ndarray] = field(default=None, repr=False)

    def at(self, q, p) -> tuple[np.ndarray, np.ndarray]:
        """Velocity at arbitrary points (closed form where available)."""
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        if self.velocity is None:
            raise ValueError("flow has no off-grid evaluator")
        return self.velocity(q, p)

    @property
    def is_zero(self) -> bool:
        return not (np.any(self.v_q) or np.any(self.v_p))


def _nonrelativistic_velocity(H: HamiltonianModel) -> Velocity:
    def velocity(q, p):
        return 0.5 * H.dH_dp(q, p), -0.5 * H.dH_dq(q, p)
    return velocity


def build_flow(H: HamiltonianModel, grid: PhaseGrid) -> PhaseFlowField:
    if H.kind is HamiltonianKind.RELATIVISTIC:
        return build_relativistic_flow(H, grid)
    Q, P = grid.mesh()
    velocity = _nonrelativistic_velocity(H)
    v_q, v_p = velocity(Q, P)
    flagged = None
    if H.kind is HamiltonianKind.TABULATED:
        flagged = np.zeros(grid.shape, dtype=bool)
        tol = 0.5 * np.min(np.diff(H.q_table))
        for qb in (H.q_table[0], H.q_table[-1]):
            flagged |= np.abs(Q - qb) < tol
        if flagged.any():
            log.debug("flow uses one-sided potential differences on %d nodes", int(flagged.sum()))
    return PhaseFlowField(grid, v_q, v_p, Regime.NONRELATIVISTIC, velocity,
                          domain=H.in_domain if not H.closed_form else None, flagged=flagged)


def synthetic_flow(grid: PhaseGrid, velocity: Velocity) -> PhaseFlowField:
    """Flow from an arbitrary velocity function (for diagnostics and tests)."""
    Q, P = grid.mesh()
    v_q, v_p = velocity(Q, P)
    v_q = np.broadcast_to(np.asarray(v_q, float), grid.shape).copy()
    v_p = np.broadcast_to(np.asarray(v_p, float), grid.shape).copy()
    return PhaseFlowField(grid, v_q, v_p, velocity=velocity)


def divergence_max(flow: PhaseFlowField) -> float:
    """Largest |dV_q/dq + dV_p/dp| over interior nodes (centered differences)."""
    g = flow.grid
    div_q = (flow.v_q[2:, 1:-1] - flow.v_q[:-2, 1:-1]) / (2 * g.dq)
    div_p = (flow.v_p[1:-1, 2:] - flow.v_p[1:-1, :-2]) / (2 * g.dp)
    return float(np.max(np.abs(div_q + div_p)))


def rk4_step(velocity: Velocity, q, p, dt: float):
    k1q, k1p = velocity(q, p)
    k2q, k2p = velocity(q + 0.5 * dt * k1q, p + 0.5 * dt * k1p)
    k3q, k3p = velocity(q + 0.5 * dt * k2q, p + 0.5 * dt * k2p)
    k4q, k4p = velocity(q + dt * k3q, p + dt * k3p)
    return (q + dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q),
            p + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p))


def trace_characteristic(z0, flow: PhaseFlowField, t_final: float, dt: float) -> np.ndarray:
    """Integrate ``dz/dt = V(z)`` with classical RK4.

    Returns an ``(n_steps + 1, 2)`` array of ``(q, p)`` points; the last step
    is shortened so the path ends exactly at ``t_final``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if t_final < 0:
        raise ValueError("t_final must be nonnegative")
    n_full = int(np.floor(t_final / dt + 1e-9))
    steps = [dt] * n_full
    rest = t_final - n_full * dt
    if rest > 1e-12 * dt:
        steps.append(rest)
    q, p = float(z0[0]), float(z0[1])
    path = np.empty((len(steps) + 1, 2))
    path[0] = q, p
    for i, h in enumerate(steps, start=1):
        q, p = rk4_step(flow.at, q, p, h)
        q, p = float(q), float(p)
        if flow.domain is not None and not flow.domain(np.asarray(q)):
            raise OutOfDomainError(f"characteristic left the tabulated domain at q={q:.6g}")
        path[i] = q, p
    return path


def orbit_period(z0, flow: PhaseFlowField, dt: float, t_max: float) -> float:
    """Return time of a closed characteristic through ``z0``.

    The orbit is traced with RK4 up to ``t_max`` and the period is the first
    time, after the path has moved well away from ``z0``, that the leaving
    coordinate crosses its start value in the leaving direction.  The
    crossing inside the last step is found by root-finding on one shortened
    RK4 step.
    """
    path = trace_characteristic(z0, flow, t_max, dt)
    q0, p0 = float(z0[0]), float(z0[1])
    vq0, vp0 = flow.at(q0, p0)
    if vp0 == 0:
        # leaving along q: watch the q coordinate instead
        coord, start, sign = 0, q0, np.sign(vq0)
    else:
        coord, start, sign = 1, p0, np.sign(vp0)
    if sign == 0:
        raise ValueError("z0 is a fixed point of the flow")
    x = sign * (path[:, coord] - start)
    far = np.hypot(path[:, 0] - q0, path[:, 1] - p0)
    # only count crossings once the orbit has moved away from z0
    half = np.argmax(far >= 0.5 * far.max())
    hits = np.nonzero((x[:-1] < 0) & (x[1:] >= 0))[0]
    hits = hits[hits >= half]
    if hits.size == 0:
        raise ValueError("orbit did not close within t_max")
    k = int(hits[0])
    zk = path[k]

    def gap(s):
        q, p = rk4_step(flow.at, zk[0], zk[1], s)
        return sign * ((q, p)[coord] - start)

    s = brentq(gap, 0.0, dt, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return k * dt + s


def departure_points(flow: PhaseFlowField, dt: float) -> tuple[np.ndarray, np.ndarray]:
    Q, P = flow.grid.mesh()
    if flow.velocity is None:
        return Q - dt * flow.v_q, P - dt * flow.v_p
    return rk4_step(flow.at, Q, P, -dt)


def departure_indices(flow: PhaseFlowField, dt: float):
    """Fractional node indices of the departure points, cached per ``dt``.

    Returns ``(iq, None)`` with ``iq`` a per-row shift when the flow has no
    p component (departures stay on their p-row), else ``(iq, ip)`` fields.
    """
    cache = flow.__dict__.setdefault("_departures", {})
    if dt in cache:
        return cache[dt]
    g = flow.grid
    if not np.any(flow.v_p) and np.all(flow.v_q == flow.v_q[:1, :]):
        # free-type flow: V_q depends on p only, so RK4 reduces to Euler
        out = (-dt * flow.v_q[0] / g.dq, None)
    else:
        qd, pd = departure_points(flow, dt)
        out = ((qd - g.q_min) / g.dq, (pd - g.p_min) / g.dp)
    cache.clear()
    cache[dt] = out
    return out


def advect_step(psi: PhaseWaveFunction, flow: PhaseFlowField, dt: float,
                method: str = "quintic") -> PhaseWaveFunction:
    g = psi.grid
    if flow.grid != g:
        raise ValueError("flow and wave function live on different grids")
    if flow.is_zero:
        return psi.with_values(psi.values)
    iq, ip = departure_indices(flow, dt)
    # row shifts are exact for any dt, so the step-size sanity check only
    # applies when departure points come from RK4
    if ip is not None:
        courant = dt * max(np.max(np.abs(flow.v_q)) / g.dq, np.max(np.abs(flow.v_p)) / g.dp)
        if courant > 2.0:
            warnings.warn(f"departure points move up to {courant:.3g} cells per step",
                          RuntimeWarning, stacklevel=2)
    if ip is None:
        return psi.with_values(shift_rows(psi.values, iq, g.periodic_q, method))
    return psi.with_values(sample(psi.values, iq, ip, g.periodic_q, method))


def edge_mass(psi: PhaseWaveFunction, cells: int = 3) -> float:
    """Fraction of the norm within ``cells`` nodes of a truncated edge."""
    g = psi.grid
    w = g.weights() * psi.density
    total = w.sum()
    if total == 0:
        return 0.0
    band = np.zeros(g.shape, dtype=bool)
    band[:, :cells] = band[:, -cells:] = True
    if not g.periodic_q:
        band[:cells, :] = band[-cells:, :] = True
    return float(w[band].sum() / total)


@dataclass
class EvolutionRecord:
    dt: float
    times: list[float] = field(default_factory=list)
    snapshots: list[PhaseWaveFunction] = field(default_factory=list)
    step_indices: list[int] = field(default_factory=list)
    norm_steps: list[int] = field(default_factory=list)
    norm_times: list[float] = field(default_factory=list)
    norms: list[float] = field(default_factory=list)
    steps: int = 0

    @property
    def final(self) -> PhaseWaveFunction:
        return self.snapshots[-1]

    def norm_drift(self) -> float:
        """Largest relative departure of norm^2 from its initial value."""
        n = np.asarray(self.norms)
        if n.size == 0 or n[0] == 0:
            return 0.0
        return float(np.max(np.abs(n - n[0])) / n[0])


def evolve(psi0: PhaseWaveFunction, H, t_final: float, dt: float, snapshot_every: int = 0,
           method: str = "quintic", leak_limit: Optional[float] = None,
           on_snapshot: Optional[Callable[[int, float, PhaseWaveFunction], None]] = None
           ) -> EvolutionRecord:
    """Advance ``psi0`` to ``t_final`` in steps of ``dt``.

    ``H`` may be a :class:`HamiltonianModel` or a prebuilt flow.  Snapshots
    are kept at step 0, every ``snapshot_every`` steps (0 = only the ends)
    and at the final step; norm^2 is recorded every step.  With
    ``leak_limit`` set, the run aborts with :class:`BoundaryLeakError` when
    the edge mass exceeds it.
    """
    if not t_final > 0:
        raise ValueError("t_final must be positive")
    if not dt > 0:
        raise ValueError("dt must be positive")
    flow = H if isinstance(H, PhaseFlowField) else build_flow(H, psi0.grid)
    n_steps = max(1, int(round(t_final / dt)))
    if abs(n_steps * dt - t_final) > 1e-9 * max(1.0, t_final):
        dt = t_final / n_steps
        log.info("adjusted dt to %.6g to land on t_final", dt)
    rec = EvolutionRecord(dt=dt, steps=n_steps)

    def keep(k, state):
        t = k * dt
        rec.times.append(t)
        rec.snapshots.append(state)
        rec.step_indices.append(k)
        if on_snapshot is not None:
            on_snapshot(k, t, state)

    psi = psi0
    keep(0, psi)
    rec.norm_steps.append(0)
    rec.norm_times.append(0.0)
    rec.norms.append(norm_squared(psi))
    for k in range(1, n_steps + 1):
        psi = advect_step(psi, flow, dt, method)
        rec.norm_steps.append(k)
        rec.norm_times.append(k * dt)
        rec.norms.append(norm_squared(psi))
        if leak_limit is not None:
            leak = edge_mass(psi)
            if leak > leak_limit:
                raise BoundaryLeakError(f"edge mass {leak:.3g} exceeds {leak_limit:.3g} at step {k}")
        if k == n_steps or (snapshot_every and k % snapshot_every == 0):
            keep(k, psi)
    return rec


# -- relativistic ----------------------------------------------------------------

def relativistic_phase_velocity(p, m0: float, c: float):
    """Phase velocity ``K/p`` with ``K = sqrt(c^2 p^2 + m0^2 c^4) - m0 c^2``.

    Evaluated as ``c^2 p / (sqrt(c^2 p^2 + m0^2 c^4) + m0 c^2)``, which is the
    same quantity without cancellation and equals 0 at p = 0.
    """
    if not m0 > 0:
        raise ValueError("rest mass must be positive")
    if not c > 0:
        raise ValueError("c must be positive")
    p = np.asarray(p, dtype=float)
    rest = m0 * c * c
    v = c * c * p / (np.sqrt(c * c * p * p + rest * rest) + rest)
    return float(v) if v.ndim == 0 else v


def momentum_from_velocity(v, m0: float, c: float):
    v = np.asarray(v, dtype=float)
    return m0 * v / np.sqrt(1.0 - (v / c) ** 2)


def build_relativistic_flow(H: HamiltonianModel, grid: PhaseGrid, branch_sign: int = 1,
                            metric: Optional[str] = None) -> PhaseFlowField:
    if metric not in (None, "cartesian"):
        raise ValueError("only Cartesian coordinates are supported")
    if H.kind is not HamiltonianKind.RELATIVISTIC:
        raise ValueError("relativistic flow needs a relativistic Hamiltonian")
    if branch_sign not in (1, -1):
        raise ValueError("branch_sign must be +1 or -1")

    def velocity(q, p):
        q, p = np.broadcast_arrays(np.asarray(q, float), np.asarray(p, float))
        return (branch_sign * relativistic_phase_velocity(p, H.m, H.c) + np.zeros_like(q),
                -0.5 * H.dH_dq(q, p))

    Q, P = grid.mesh()
    v_q, v_p = velocity(Q, P)
    return PhaseFlowField(grid, np.asarray(v_q), np.asarray(v_p), Regime.RELATIVISTIC, velocity,
                          c=H.c, branch_sign=branch_sign)

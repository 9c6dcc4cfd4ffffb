"""First derivatives on phase grids.

Fourth-order finite differences on bounded axes; on a periodic q axis the
derivative is spectral (FFT), which is exact for commensurate plane waves.
"""
from __future__ import annotations

import numpy as np

from .core import PhaseGrid

_CENTER = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_EDGE0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_EDGE1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


def diff(f: np.ndarray, h: float, axis: int, periodic: bool = False,
         spectral: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """First derivative along ``axis``.

    Returns ``(df, flags)``; ``flags`` marks nodes that used one-sided
    boundary stencils (never set on a periodic axis).  ``spectral`` needs
    ``periodic``.
    """
    f = np.moveaxis(np.asarray(f), axis, 0)
    n = f.shape[0]
    flags = np.zeros(n, dtype=bool)
    if spectral:
        if not periodic:
            raise ValueError("spectral derivatives need a periodic axis")
        k = 2j * np.pi * np.fft.fftfreq(n)
        if n % 2 == 0:
            k[n // 2] = 0.0  # the Nyquist mode has no odd derivative
        k = k.reshape((n,) + (1,) * (f.ndim - 1))
        out = np.fft.ifft(k * np.fft.fft(f, axis=0), axis=0)
        if not np.iscomplexobj(f):
            out = out.real
    elif periodic:
        out = sum(w * np.roll(f, 2 - k, axis=0) for k, w in enumerate(_CENTER) if w)
    else:
        if n < 5:
            raise ValueError("fourth-order stencils need at least 5 nodes along the axis")
        out = np.empty_like(f, dtype=np.result_type(f, float))
        out[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / 12.0
        out[0] = np.tensordot(_EDGE0, f[:5], axes=1)
        out[1] = np.tensordot(_EDGE1, f[:5], axes=1)
        out[-1] = -np.tensordot(_EDGE0, f[-1:-6:-1], axes=1)
        out[-2] = -np.tensordot(_EDGE1, f[-1:-6:-1], axes=1)
        flags[[0, 1, -2, -1]] = True
    out = np.moveaxis(out / h, 0, axis)
    shape = [1] * out.ndim
    shape[axis] = n
    return out, np.broadcast_to(flags.reshape(shape), out.shape)


def d_dq(f: np.ndarray, grid: PhaseGrid) -> tuple[np.ndarray, np.ndarray]:
    return diff(f, grid.dq, 0, periodic=grid.periodic_q, spectral=grid.periodic_q)


def d_dp(f: np.ndarray, grid: PhaseGrid) -> tuple[np.ndarray, np.ndarray]:
    return diff(f, grid.dp, 1, periodic=False)


def interior_mask(grid: PhaseGrid, halo: int = 2) -> np.ndarray:
    """Nodes at least ``halo`` cells from every non-periodic edge."""
    m = np.ones(grid.shape, dtype=bool)
    if halo:
        m[:, :halo] = m[:, -halo:] = False
        if not grid.periodic_q:
            m[:halo, :] = m[-halo:, :] = False
    return m

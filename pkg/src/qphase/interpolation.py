"""Off-grid sampling of complex phase-space fields.

Kernels:

``quintic``
    Interpolating quintic B-spline (samples prefiltered into spline
    coefficients).  Sixth-order accurate; the default for advection.
``cubic``
    Interpolating cubic B-spline, fourth order.
``catmull_rom``
    Local cubic convolution on a 4x4 stencil, third order.
``bilinear``
    Diagnostics only.

Coordinates are fractional node indices.  Points outside the grid read as
zero; along a periodic q axis they wrap.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

METHODS = ("quintic", "cubic", "catmull_rom", "bilinear")
_SPLINE_ORDER = {"quintic": 5, "cubic": 3}

# zero padding around non-periodic axes before the spline prefilter; the
# prefilter's influence decays like 0.43**k (quintic), so 48 cells is < 1e-16
_PAD = 48


def _check(method):
    if method not in METHODS:
        raise ValueError(f"unknown interpolation method {method!r}; choose from {METHODS}")


def sample(values: np.ndarray, iq: np.ndarray, ip: np.ndarray, periodic_q: bool,
           method: str = "quintic") -> np.ndarray:
    _check(method)
    if method in _SPLINE_ORDER:
        out = _sample_spline(values, iq, ip, periodic_q, _SPLINE_ORDER[method])
    elif method == "catmull_rom":
        out = _sample_convolution(values, iq, ip, periodic_q, _catmull_rom_weights, 4)
    else:
        out = _sample_convolution(values, iq, ip, periodic_q, _linear_weights, 2)
    n_q, n_p = values.shape
    outside = (ip < 0) | (ip > n_p - 1)
    if not periodic_q:
        outside |= (iq < 0) | (iq > n_q - 1)
    out[outside] = 0.0
    return out


def shift_rows(values: np.ndarray, shift: np.ndarray, periodic_q: bool,
               method: str = "quintic") -> np.ndarray:
    """``out[i, j] = f(i + shift[j], j)``: 1-D interpolation along q per p-row.

    Used when departure points keep their p coordinate (flows with V_p = 0).
    """
    _check(method)
    n_q, n_p = values.shape
    shift = np.broadcast_to(np.asarray(shift, dtype=float), (n_p,))
    if method in _SPLINE_ORDER:
        order = _SPLINE_ORDER[method]
        pad = 0 if periodic_q else _PAD
        coeffs = _filter_axis(np.pad(values, ((pad, pad), (0, 0))), order, 0, periodic_q)
        taps = np.arange(-(order - 1) // 2, (order + 1) // 2 + 1)
        kernel = _bspline(order)
        # only the two kernels that never read outside their support matter
        base = np.floor(shift).astype(np.int64)
        t = shift - base
        i = np.arange(n_q)[:, None] + pad
        out = np.zeros(values.shape, dtype=complex)
        n_c = coeffs.shape[0]
        for a in taps:
            idx = i + base[None, :] + a
            w = kernel(t - a)
            if periodic_q:
                idx = np.mod(idx, n_c)
                ok = True
            else:
                ok = (idx >= 0) & (idx < n_c)
                idx = np.clip(idx, 0, n_c - 1)
            out += np.where(ok, w[None, :] * np.take_along_axis(coeffs, idx, axis=0), 0.0)
    else:
        iq = np.arange(n_q)[:, None] + shift[None, :]
        ip = np.broadcast_to(np.arange(n_p)[None, :], values.shape).astype(float)
        out = sample(values, iq, ip, periodic_q, method)
        return out
    if not periodic_q:
        iq = np.arange(n_q)[:, None] + shift[None, :]
        out[(iq < 0) | (iq > n_q - 1)] = 0.0
    return out


def _bspline(order):
    if order == 3:
        def b(x):
            x = np.abs(x)
            return np.where(x < 1, 2.0 / 3.0 - x * x + 0.5 * x ** 3,
                            np.where(x < 2, (2 - x) ** 3 / 6.0, 0.0))
    else:
        def b(x):
            x = np.abs(x)
            r = np.where(x < 3, (3 - x) ** 5, 0.0)
            r = r - np.where(x < 2, 6 * (2 - x) ** 5, 0.0)
            r = r + np.where(x < 1, 15 * (1 - x) ** 5, 0.0)
            return r / 120.0
    return b


def _filter_axis(a, order, axis, periodic):
    mode = "grid-wrap" if periodic else "grid-constant"
    re = ndimage.spline_filter1d(a.real, order=order, axis=axis, mode=mode)
    im = ndimage.spline_filter1d(a.imag, order=order, axis=axis, mode=mode)
    return re + 1j * im


def spline_coefficients(values: np.ndarray, periodic_q: bool, order: int = 5) -> np.ndarray:
    pad_q = 0 if periodic_q else _PAD
    padded = np.pad(values, ((pad_q, pad_q), (_PAD, _PAD)))
    c = _filter_axis(padded, order, 0, periodic_q)
    return _filter_axis(c, order, 1, False)


def _sample_spline(values, iq, ip, periodic_q, order):
    coeffs = spline_coefficients(values, periodic_q, order)
    pad_q = 0 if periodic_q else _PAD
    coords = np.array([np.ravel(iq) + pad_q, np.ravel(ip) + _PAD])
    kw = dict(order=order, prefilter=False, mode="grid-wrap" if periodic_q else "nearest")
    re = ndimage.map_coordinates(coeffs.real, coords, **kw)
    im = ndimage.map_coordinates(coeffs.imag, coords, **kw)
    return (re + 1j * im).reshape(np.shape(iq))


def _catmull_rom_weights(t):
    t2, t3 = t * t, t * t * t
    return [
        0.5 * (-t3 + 2 * t2 - t),
        0.5 * (3 * t3 - 5 * t2 + 2),
        0.5 * (-3 * t3 + 4 * t2 + t),
        0.5 * (t3 - t2),
    ]


def _linear_weights(t):
    return [1.0 - t, t]


def _sample_convolution(values, iq, ip, periodic_q, weights, width):
    n_q, n_p = values.shape
    offset = 1 if width == 4 else 0
    bq = np.floor(iq).astype(np.int64)
    bp = np.floor(ip).astype(np.int64)
    wq = weights(iq - bq)
    wp = weights(ip - bp)
    out = np.zeros(np.shape(iq), dtype=complex)
    for a in range(width):
        jq = bq - offset + a
        if periodic_q:
            jq = np.mod(jq, n_q)
            ok_q = np.ones(jq.shape, dtype=bool)
        else:
            ok_q = (jq >= 0) & (jq < n_q)
        for b in range(width):
            jp = bp - offset + b
            ok = ok_q & (jp >= 0) & (jp < n_p)
            vals = values[np.clip(jq, 0, n_q - 1), np.clip(jp, 0, n_p - 1)]
            out += np.where(ok, wq[a] * wp[b] * vals, 0.0)
    return out

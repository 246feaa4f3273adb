"""Compiled per-symbol loops: timing recovery and residual phase tracking.

These two loops carry state from one symbol to the next, so they cannot
be vectorized; numba keeps them at native speed.  The spline evaluation
here must agree bit-for-bit in convention with :mod:`dvbs2link._interp`
(same blending matrix, same mirror boundary) — the test suite compares
the two directly.
"""
from __future__ import annotations

import math

import numba
import numpy as np

from ._interp import basis_blend

_BLEND = basis_blend()


@numba.njit(cache=True, inline="always")
def _mirror(j: int, n: int) -> int:
    period = 2 * (n - 1)
    while j < 0 or j >= n:
        if j < 0:
            j = -j
        else:
            j = period - j
    return j


@numba.njit(cache=True, inline="always")
def _spline_point(cr, ci, blend, p):
    """Quintic B-spline value at fractional position ``p`` (prefiltered input)."""
    n = cr.shape[0]
    if p < 0.0:
        p = 0.0
    elif p > n - 1.0:
        p = n - 1.0
    i = int(math.floor(p))
    if i > n - 2:
        i = n - 2
    t = p - i
    re = 0.0
    im = 0.0
    for k in range(6):
        w = blend[k, 0]
        for m in range(1, 6):
            w = w * t + blend[k, m]
        j = _mirror(i - 2 + k, n)
        re += w * cr[j]
        im += w * ci[j]
    return complex(re, im)


@numba.njit(cache=True)
def spline_eval(cr, ci, positions):
    """Vector wrapper around the point evaluator (for cross-checking)."""
    out = np.empty(positions.shape[0], dtype=np.complex128)
    blend = _BLEND
    for k in range(positions.shape[0]):
        out[k] = _spline_point(cr, ci, blend, positions[k])
    return out


@numba.njit(cache=True)
def timing_loop(cr, ci, sps, start_pos, beta_acq, beta_track, acq_symbols,
                ted_sign, max_symbols):
    """First-order Gardner loop over a prefiltered 2-samples-per-symbol stream.

    Emits one on-time sample per symbol plus the midpoint used by the
    detector.  The raw detector output is scaled by ``sps`` before the
    loop update so the effective gain is independent of the lattice
    density.  Returns ``(symbols, mids, positions, errors, count)``.
    """
    blend = _BLEND
    n = cr.shape[0]
    symbols = np.empty(max_symbols, dtype=np.complex128)
    mids = np.empty(max_symbols, dtype=np.complex128)
    positions = np.empty(max_symbols, dtype=np.float64)
    errors = np.empty(max_symbols, dtype=np.float64)
    half = sps / 2.0
    pos = start_pos
    prev = _spline_point(cr, ci, blend, pos)
    symbols[0] = prev
    mids[0] = 0.0
    positions[0] = pos
    errors[0] = 0.0
    count = 1
    limit = n - 1.0
    while count < max_symbols:
        pos += sps
        if pos > limit:
            break
        cur = _spline_point(cr, ci, blend, pos)
        mid = _spline_point(cr, ci, blend, pos - half)
        diff = cur - prev
        eps = mid.real * diff.real + mid.imag * diff.imag
        if eps > 4.0:
            eps = 4.0
        elif eps < -4.0:
            eps = -4.0
        symbols[count] = cur
        mids[count] = mid
        positions[count] = pos
        errors[count] = eps
        beta = beta_acq if count < acq_symbols else beta_track
        pos += ted_sign * beta * (sps * eps)
        prev = cur
        count += 1
    return symbols[:count], mids[:count], positions[:count], errors[:count], count


@numba.njit(cache=True)
def dd_track(symbols, points, gain, err_clip):
    """Decision-directed single-pole phase tracker.

    Each symbol is derotated by the running phase estimate, sliced to the
    nearest constellation point (ties to the lowest index), and the
    angular decision error — clipped to ``±err_clip`` — nudges the
    estimate.  Returns the derotated symbols and the phase trajectory.
    """
    n = symbols.shape[0]
    m = points.shape[0]
    out = np.empty(n, dtype=np.complex128)
    phases = np.empty(n, dtype=np.float64)
    phi = 0.0
    for k in range(n):
        c = math.cos(phi)
        s = math.sin(phi)
        zr = symbols[k].real * c + symbols[k].imag * s
        zi = symbols[k].imag * c - symbols[k].real * s
        best = 0
        dr = zr - points[0].real
        di = zi - points[0].imag
        bd = dr * dr + di * di
        for j in range(1, m):
            dr = zr - points[j].real
            di = zi - points[j].imag
            d = dr * dr + di * di
            if d < bd:
                bd = d
                best = j
        pr = points[best].real
        pi = points[best].imag
        err = math.atan2(zi * pr - zr * pi, zr * pr + zi * pi)
        if err > err_clip:
            err = err_clip
        elif err < -err_clip:
            err = -err_clip
        phi += gain * err
        out[k] = complex(zr, zi)
        phases[k] = phi
    return out, phases

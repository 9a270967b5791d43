"""Numeric inner loops, each with a numba and a pure-numpy implementation.

The public names (``coherence_envelope``, ``pair_product_stats``) dispatch to
the numba versions unless ``LOCHAR_DISABLE_NUMBA`` is set. The ``*_numpy``
and ``*_numba`` variants stay importable so tests and the benchmark can
compare them directly.
"""

import math

import numpy as np

from ._accel import NUMBA_AVAILABLE, USE_NUMBA, njit

__all__ = [
    "coherence_envelope",
    "coherence_envelope_numpy",
    "coherence_envelope_numba",
    "pair_product_stats",
    "pair_product_stats_numpy",
    "pair_product_stats_numba",
    "is_uniform_grid",
]


def is_uniform_grid(omega, rtol=1e-9):
    d = np.diff(omega)
    return bool(np.all(np.abs(d - d[0]) <= rtol * abs(d[0])))


# -- coherence envelope -------------------------------------------------------
#
# H(t) = |sum_a w_a exp(i omega_a t)|^2, the squared modulus of the discrete
# (trapezoidal) Fourier transform of the weighted spectral overlap.


def coherence_envelope_numpy(omega, weights, t):
    omega = np.asarray(omega, dtype=float)
    weights = np.asarray(weights, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    g = np.exp(1j * np.outer(t, omega)) @ weights
    return g.real**2 + g.imag**2


@njit
def _envelope_uniform(omega0, d_omega, weights, t):
    k = weights.shape[0]
    out = np.empty(t.shape[0])
    for p in range(t.shape[0]):
        tt = t[p]
        cr = math.cos(omega0 * tt)
        ci = math.sin(omega0 * tt)
        cd = math.cos(d_omega * tt)
        sd = math.sin(d_omega * tt)
        re = 0.0
        im = 0.0
        for a in range(k):
            w = weights[a]
            re += w * cr
            im += w * ci
            cr, ci = cr * cd - ci * sd, cr * sd + ci * cd
        out[p] = re * re + im * im
    return out


@njit
def _envelope_general(omega, weights, t):
    k = weights.shape[0]
    out = np.empty(t.shape[0])
    for p in range(t.shape[0]):
        tt = t[p]
        re = 0.0
        im = 0.0
        for a in range(k):
            ang = omega[a] * tt
            re += weights[a] * math.cos(ang)
            im += weights[a] * math.sin(ang)
        out[p] = re * re + im * im
    return out


def coherence_envelope_numba(omega, weights, t):
    omega = np.ascontiguousarray(omega, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    t = np.ascontiguousarray(np.atleast_1d(t), dtype=np.float64)
    if omega.shape[0] > 1 and is_uniform_grid(omega):
        return _envelope_uniform(omega[0], omega[1] - omega[0], weights, t)
    return _envelope_general(omega, weights, t)


def coherence_envelope(omega, weights, t):
    """Squared modulus of ``sum_a weights[a] * exp(1j * omega[a] * t)``.

    The frequency origin is moved to the weighted centre first; the modulus
    is invariant under that shift and the phases stay small.
    """
    omega = np.asarray(omega, dtype=float)
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    centre = float(weights @ omega / total) if total != 0 else float(omega.mean())
    if USE_NUMBA:
        return coherence_envelope_numba(omega - centre, weights, t)
    return coherence_envelope_numpy(omega - centre, weights, t)


# -- statistics over all (a, b) products ---------------------------------------


def pair_product_stats_numpy(x, y):
    """Mean and population std of ``{x[a] * y[b]}`` over all index pairs.

    Uses the separable identity var = mx^2 vy + my^2 vx + vx vy, which holds
    exactly for the full Cartesian set of pairs.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mx = x.mean()
    my = y.mean()
    vx = np.mean((x - mx) ** 2)
    vy = np.mean((y - my) ** 2)
    return mx * my, math.sqrt(mx * mx * vy + my * my * vx + vx * vy)


@njit
def _pair_stats_loop(x, y):
    nx = x.shape[0]
    ny = y.shape[0]
    s = 0.0
    for a in range(nx):
        for b in range(ny):
            s += x[a] * y[b]
    mean = s / (nx * ny)
    ss = 0.0
    for a in range(nx):
        for b in range(ny):
            d = x[a] * y[b] - mean
            ss += d * d
    return mean, math.sqrt(ss / (nx * ny))


def pair_product_stats_numba(x, y):
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    return _pair_stats_loop(x, y)


def pair_product_stats(x, y):
    if USE_NUMBA:
        return pair_product_stats_numba(x, y)
    return pair_product_stats_numpy(x, y)


if not NUMBA_AVAILABLE:  # pragma: no cover
    coherence_envelope_numba = coherence_envelope_numpy
    pair_product_stats_numba = pair_product_stats_numpy

"""Compiled Metropolis sweeps over radial coordinates.

Random numbers are drawn by the caller (a numpy ``Generator``) and passed in,
so a chain is reproducible from its seed alone and the kernel holds no RNG
state. The kernels release the GIL, which lets independent chains run on
threads.
"""

import math

import numpy as np
from numba import njit

SPD = 0
SIEGEL = 1

_LOG2 = math.log(2.0)


@njit(cache=True, nogil=True)
def _logsinh(x):
    # log(sinh(x)) for x > 0, -inf at 0
    if x <= 0.0:
        return -np.inf
    if x > 20.0:
        return x - _LOG2 + math.log1p(-math.exp(-2.0 * x))
    return math.log(math.sinh(x))


@njit(cache=True, nogil=True)
def log_density(r, inv2s2, beta, kind):
    """Unnormalized radial log density (SPD or Siegel form)."""
    n = r.shape[0]
    e = 0.0
    for i in range(n):
        e -= r[i] * r[i] * inv2s2
        if kind == SIEGEL:
            e += _logsinh(2.0 * r[i])
        for j in range(i + 1, n):
            if kind == SPD:
                e += beta * _logsinh(0.5 * abs(r[i] - r[j]))
            else:
                e += beta * (_logsinh(abs(r[i] - r[j])) + _logsinh(r[i] + r[j]))
    return e


@njit(cache=True, nogil=True)
def _pair(a, b, beta, kind):
    if kind == SPD:
        return beta * _logsinh(0.5 * abs(a - b))
    return beta * (_logsinh(abs(a - b)) + _logsinh(a + b))


@njit(cache=True, nogil=True)
def _single(x, inv2s2, kind):
    e = -x * x * inv2s2
    if kind == SIEGEL:
        e += _logsinh(2.0 * x)
    return e


@njit(cache=True, nogil=True)
def run_chunk(r, inv2s2, beta, kind, step, z, u, record, out, pos, count_accept):
    """Run ``z.shape[0]`` component-wise sweeps in place.

    ``z`` holds standard normal increments and ``u`` uniforms, one per
    coordinate update. After sweep ``s`` the state is copied to ``out[pos]``
    when ``record[s]`` is set. Returns ``(accepted, pos)``.

    Pair interactions are cached so an update costs ``n`` new pair terms.
    """
    n = r.shape[0]
    P = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            P[i, j] = _pair(r[i], r[j], beta, kind)
            P[j, i] = P[i, j]
    row = np.empty(n)
    acc = 0
    for s in range(z.shape[0]):
        for i in range(n):
            x = r[i] + step * z[s, i]
            if kind == SIEGEL and x <= 0.0:
                continue
            d = _single(x, inv2s2, kind) - _single(r[i], inv2s2, kind)
            for j in range(n):
                if j != i:
                    row[j] = _pair(x, r[j], beta, kind)
                    d += row[j] - P[i, j]
            if d >= 0.0 or u[s, i] < math.exp(d):
                r[i] = x
                for j in range(n):
                    if j != i:
                        P[i, j] = row[j]
                        P[j, i] = row[j]
                if count_accept[s]:
                    acc += 1
        if record[s]:
            out[pos, :] = r
            pos += 1
    return acc, pos

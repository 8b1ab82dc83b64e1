"""Eigen-decomposition of ``K diag(e^d) K†`` for log-scales ``d`` of any spread.

One-sided (Hestenes) Jacobi on the columns ``b_i = e^{d_i/2} K_i``, each
stored as a unit vector ``k_i`` and a log-scale ``s_i`` so that
``b_i = e^{s_i} k_i``. A rotation between columns of very different scale
reduces to a projection of the smaller column, which the scaled update
below carries out without forming ``e^{s_j - s_i}`` as a divisor. On
convergence the ``k_i`` are orthonormal, so the eigenvalues are ``e^{2 s_i}``
with eigenvectors ``k_i``. Graded column scalings do not spoil the relative
accuracy of one-sided Jacobi, unlike bidiagonalization-based SVD.
"""

import math

import numpy as np
from numba import njit

_EPS = np.finfo(np.float64).eps


@njit(cache=True, nogil=True)
def _normalize(k, s, i):
    nrm = 0.0
    for a in range(k.shape[0]):
        nrm += abs(k[a, i]) ** 2
    nrm = math.sqrt(nrm)
    for a in range(k.shape[0]):
        k[a, i] /= nrm
    s[i] += math.log(nrm)


@njit(cache=True, nogil=True)
def _jacobi_one(k, s, max_sweeps):
    n = k.shape[1]
    tol = n * _EPS
    for i in range(n):
        _normalize(k, s, i)
    for sweep in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                # i is the larger column, j the smaller
                i, j = (p, q) if s[p] >= s[q] else (q, p)
                g = 0.0 * k[0, i]
                for a in range(k.shape[0]):
                    g += np.conj(k[a, i]) * k[a, j]
                g0 = abs(g)
                if g0 <= tol:
                    continue
                rotated = True
                rho = math.exp(s[j] - s[i])
                ph = g / g0
                # Gram of (b_i, b_j) in units of e^{2 s_i}: [[1, g0 rho], [g0 rho, rho^2]]
                zr = (rho * rho - 1.0) / (2.0 * g0)      # zeta * rho
                tr = 1.0 / (abs(zr) + math.sqrt(rho * rho + zr * zr))
                if zr < 0:
                    tr = -tr                              # t / rho
                t = tr * rho
                c = 1.0 / math.sqrt(1.0 + t * t)
                for a in range(k.shape[0]):
                    ki = k[a, i]
                    kj = np.conj(ph) * k[a, j]
                    k[a, i] = c * ki - c * t * rho * kj
                    k[a, j] = c * tr * ki + c * kj
                _normalize(k, s, i)
                _normalize(k, s, j)
        if not rotated:
            return sweep
    return -1


@njit(cache=True, nogil=True)
def graded_eig(K, d, max_sweeps=60):
    """Batch kernel: ``K`` is ``(m, n, n)``, ``d`` is ``(m, n)``.

    Returns eigenvectors ``(m, n, n)``, log-eigenvalues ``(m, n)`` and the
    largest sweep count (``-1`` if some sample did not converge).
    """
    m, n = d.shape
    V = K.copy()
    logw = np.empty((m, n))
    worst = 0
    for b in range(m):
        s = 0.5 * d[b].copy()
        sweeps = _jacobi_one(V[b], s, max_sweeps)
        if sweeps < 0:
            worst = -1
        elif worst >= 0 and sweeps > worst:
            worst = sweeps
        for i in range(n):
            logw[b, i] = 2.0 * s[i]
    return V, logw, worst

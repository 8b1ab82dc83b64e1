"""Scalar special functions: di- and trilogarithm on [0, 1], erf, and the
free-energy function Phi of the planar limit together with its derivative.

Every function accepts a scalar or an array and returns the same shape
(a Python ``float`` for scalar input).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .errors import DomainError

ZETA2 = math.pi ** 2 / 6
ZETA3 = 1.2020569031595942854

# zeta(-n) = (-1)^n B_{n+1} / (n+1); zero for even n >= 2
_NTERMS = 40
_BERN = special.bernoulli(_NTERMS + 2)
_ZETA_NEG = np.array([(-1) ** n * _BERN[n + 1] / (n + 1) for n in range(_NTERMS)])
_ZETA_NEG[0] = -0.5
_FACT = np.array([math.factorial(k) for k in range(_NTERMS + 4)], dtype=float)


def _scalar_out(x, out):
    return float(out) if np.ndim(x) == 0 else out


def _series_small(s, x):
    # direct sum; used for x <= 1/2 so 60 terms leave a tail below 2^-60
    k = np.arange(1, 61, dtype=float)
    return np.sum(x[..., None] ** k / k ** s, axis=-1)


def _series_log(s, mu):
    """Li_s(e^mu) for mu in (-log 2, 0), expanded in powers of mu.

    Li_s(e^mu) = mu^(s-1)/(s-1)! (H_{s-1} - log(-mu)) + sum_{k != s-1} zeta(s-k) mu^k / k!
    """
    zpos = {2: ZETA2, 3: ZETA3, 1: None}
    harm = sum(1.0 / j for j in range(1, s))
    out = mu ** (s - 1) / _FACT[s - 1] * (harm - np.log(-mu))
    for k in range(0, s - 1):
        out = out + zpos[s - k] * mu ** k / _FACT[k]
    # k >= s: zeta(s - k) = zeta(-n), n = k - s
    for n in range(0, _NTERMS - s):
        z = _ZETA_NEG[n]
        if z == 0.0:
            continue
        k = n + s
        out = out + z * mu ** k / _FACT[k]
    return out


def polylog(s, x):
    """Polylogarithm ``Li_s(x) = sum_k x^k / k^s`` for ``s in {2, 3}`` and ``x in [0, 1]``.

    Parameters
    ----------
    s : {2, 3}
        Order.
    x : float or array_like
        Argument in ``[0, 1]``.

    Returns
    -------
    float or ndarray
        Absolute error below ``1e-13``. ``Li_s(1)`` is ``zeta(s)``.

    Notes
    -----
    Below ``x = 1/2`` the defining series is summed directly. Above, the
    expansion in ``mu = log x`` around ``x = 1`` converges for ``|mu| < 2 pi``
    and stays accurate up to the branch point.
    """
    if s not in (2, 3):
        raise DomainError(f"polylog order must be 2 or 3, got {s!r}")
    xa = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xa)) or np.any(xa < 0) or np.any(xa > 1):
        raise DomainError(f"polylog argument must lie in [0, 1], got {x!r}")
    out = np.empty_like(xa)
    lo = xa <= 0.5
    one = xa == 1.0
    mid = ~lo & ~one
    if np.any(lo):
        out[lo] = _series_small(s, xa[lo])
    if np.any(mid):
        out[mid] = _series_log(s, np.log(xa[mid]))
    out[one] = ZETA2 if s == 2 else ZETA3
    return _scalar_out(x, out)


def erf(x):
    """Error function (``scipy.special.erf``)."""
    return _scalar_out(x, special.erf(np.asarray(x, dtype=float)))


def _check_xi(xi, name):
    xa = np.asarray(xi, dtype=float)
    if np.any(~(xa > 0)) or np.any(~np.isfinite(xa)):
        raise DomainError(f"{name}: xi must be positive and finite, got {xi!r}")
    return xa


SMALL_XI = 1e-4


def phi_trilog(xi):
    """Planar free-energy function ``Phi(xi) = xi/6 - (Li3(e^-xi) - zeta(3)) / xi^2``.

    For ``xi < 1e-4`` the expansion
    ``zeta(2)/xi - 3/4 + log(xi)/2 + xi/12 + xi^2/288 - xi^4/86400`` of the same
    expression replaces the cancelling difference.
    """
    xa = _check_xi(xi, "phi_trilog")
    out = np.empty_like(xa)
    sm = xa < SMALL_XI
    if np.any(sm):
        t = xa[sm]
        out[sm] = ZETA2 / t - 0.75 + 0.5 * np.log(t) + t / 12 + t ** 2 / 288 - t ** 4 / 86400
    if np.any(~sm):
        t = xa[~sm]
        out[~sm] = t / 6 - (polylog(3, np.exp(-t)) - ZETA3) / t ** 2
    return _scalar_out(xi, out)


def phi_trilog_deriv(xi):
    """Derivative ``dPhi/dxi = 1/6 + 2 (Li3(e^-xi) - zeta(3)) / xi^3 + Li2(e^-xi) / xi^2``."""
    xa = _check_xi(xi, "phi_trilog_deriv")
    out = np.empty_like(xa)
    sm = xa < SMALL_XI
    if np.any(sm):
        t = xa[sm]
        out[sm] = -ZETA2 / t ** 2 + 0.5 / t + 1.0 / 12 + t / 144 - t ** 3 / 21600
    if np.any(~sm):
        t = xa[~sm]
        e = np.exp(-t)
        out[~sm] = 1.0 / 6 + 2 * (polylog(3, e) - ZETA3) / t ** 3 + polylog(2, e) / t ** 2
    return _scalar_out(xi, out)


def phi_planar_corrected(xi):
    """Exact Riemann-sum limit ``Phi(xi) - zeta(2)/xi``.

    This is ``xi/6 + integral_0^1 (1-x) log(1 - e^{-xi x}) dx``, the large-N
    limit of the exact beta = 2 free energy at fixed ``xi``.
    """
    xa = _check_xi(xi, "phi_planar_corrected")
    return _scalar_out(xi, np.asarray(phi_trilog(xa)) - ZETA2 / xa)


def phi_planar_corrected_deriv(xi):
    """Derivative of :func:`phi_planar_corrected`."""
    xa = _check_xi(xi, "phi_planar_corrected_deriv")
    return _scalar_out(xi, np.asarray(phi_trilog_deriv(xa)) + ZETA2 / xa ** 2)

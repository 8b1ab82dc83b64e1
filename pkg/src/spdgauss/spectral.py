"""Asymptotic eigenvalue density of the log-normal ensemble in the double
scaling limit and comparison with sampled spectra.

The density on ``[a, b]`` is

    n(y | xi) = arctan( sqrt(4 e^xi y - (y + 1)^2) / (y + 1) ) / (pi xi y)

with ``c = e^-xi``, ``a = c (1 + sqrt(1 - c))^-2`` and ``b = c (1 - sqrt(1 - c))^-2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


@dataclass(frozen=True)
class SpectralDensity:
    xi: float
    c: float
    a: float
    b: float


def density_params(xi):
    """Support of the limiting density for ``xi > 0``."""
    if not (xi > 0 and math.isfinite(xi)):
        raise DomainError(f"xi must be positive and finite, got {xi!r}")
    c = math.exp(-xi)
    q = math.sqrt(-math.expm1(-xi))  # sqrt(1 - c)
    a = c / (1 + q) ** 2
    # c / (1 - q)^2 = (1 + q)^2 / c, avoiding the cancellation in 1 - q
    b = (1 + q) ** 2 / c
    return SpectralDensity(float(xi), c, a, b)


def _radicand(y, sd):
    # 4 e^xi y - (y+1)^2 = (y - a)(b - y), written in factored form for accuracy
    return (y - sd.a) * (sd.b - y)


def density_eval(y, sd):
    """Evaluate ``n(y | xi)``; zero outside ``(a, b)``.

    Rounding can make the radicand slightly negative next to the endpoints;
    it is clamped to zero there.
    """
    y = np.asarray(y, dtype=float)
    inside = (y > sd.a) & (y < sd.b)
    ys = np.where(inside, y, 1.0)
    rad = np.maximum(_radicand(ys, sd), 0.0)
    val = np.arctan2(np.sqrt(rad), ys + 1) / (math.pi * sd.xi * ys)
    out = np.where(inside, val, 0.0)
    return float(out) if out.ndim == 0 else out


def _integrand_theta(theta, sd):
    # In u = log y the density is arctan(sqrt((y-a)(b-y)) / (y+1)) / (pi xi),
    # bounded on [log a, log b] = [-L, L]. The substitution
    # u = -L + 2 L sin^2 theta removes the square-root behaviour at both ends.
    L = math.log(sd.b)
    s, c = np.sin(theta), np.cos(theta)
    y = np.exp(-L + 2 * L * s * s)
    rad = np.maximum(_radicand(y, sd), 0.0)
    return np.arctan2(np.sqrt(rad), y + 1) / (math.pi * sd.xi) * (4 * L * s * c)


def asymptotic_cdf(y, sd, nodes=64):
    """CDF of ``n(. | xi)`` by Gauss-Legendre quadrature in the angle variable."""
    y = np.asarray(y, dtype=float)
    x, wts = (_GL_NODES, _GL_WEIGHTS) if nodes == 64 else np.polynomial.legendre.leggauss(nodes)
    L = math.log(sd.b)
    yc = np.clip(y, sd.a, sd.b)
    frac = np.clip((np.log(yc) + L) / (2 * L), 0.0, 1.0)
    top = np.arcsin(np.sqrt(frac))
    th = 0.5 * top[..., None] * (x + 1)
    out = 0.5 * top * np.sum(wts * _integrand_theta(th, sd), axis=-1)
    out = np.where(y >= sd.b, 1.0, np.where(y <= sd.a, 0.0, out))
    return float(out) if out.ndim == 0 else out


def total_mass(sd, nodes=64):
    """Integral of the density over its support (should be 1)."""
    x, wts = (_GL_NODES, _GL_WEIGHTS) if nodes == 64 else np.polynomial.legendre.leggauss(nodes)
    th = 0.25 * math.pi * (x + 1)
    return float(0.25 * math.pi * np.sum(wts * _integrand_theta(th, sd)))


def xi_for(spec):
    """``beta t / 2`` with ``t = n sigma^2``."""
    return 0.5 * spec.beta * spec.t


def compare_empirical(log_eigs, spec):
    """Kolmogorov distance between pooled eigenvalues and the limiting CDF.

    Parameters
    ----------
    log_eigs : array_like
        Log-eigenvalues ``r`` of sampled matrices centred at the identity
        (any shape; pooled). The eigenvalues are ``y = e^r``.
    spec : EnsembleSpec

    Returns
    -------
    float
        ``sup_y |F_emp(y) - F(y | beta t / 2)|``, evaluated at both sides of
        every jump of the empirical CDF.
    """
    y = np.sort(np.exp(np.asarray(log_eigs, dtype=float).ravel()))
    if y.size == 0:
        raise DomainError("no eigenvalues to compare")
    sd = density_params(xi_for(spec))
    F = asymptotic_cdf(y, sd)
    k = np.arange(1, y.size + 1) / y.size
    return float(max(np.max(np.abs(k - F)), np.max(np.abs(F - (k - 1.0 / y.size)))))


def empirical_cdf_table(log_eigs, spec, grid):
    """Rows ``(y, empirical_cdf, asymptotic_cdf)`` on ``grid``."""
    y = np.sort(np.exp(np.asarray(log_eigs, dtype=float).ravel()))
    sd = density_params(xi_for(spec))
    emp = np.searchsorted(y, grid, side="right") / y.size
    return np.column_stack([grid, emp, asymptotic_cdf(grid, sd)])

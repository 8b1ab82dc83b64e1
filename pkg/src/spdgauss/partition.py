"""Evaluators for the radial multiple integral

    z_beta(sigma) = (1/N!) int_{R^N} prod_i exp(-r_i^2 / 2 sigma^2)
                                     prod_{i<j} |2 sinh((r_i - r_j)/2)|^beta dr

and for ``phi(sigma) = sigma^3 d/dsigma log z``, the right-hand side of the
dispersion likelihood equation.

The Vandermonde factor uses ``2 sinh``, the normalization in which the exact
beta = 2 and beta = 1 closed forms and the planar trilogarithm limit hold as
written. Integrals written with plain ``sinh`` differ by the constant
:func:`vandermonde_offset`.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import mpmath
import numpy as np
from scipy import special

from . import specfun
from .errors import DomainError, NumericalError
from .matrix_core import log_pfaffian

METHODS = ("exact_beta2", "pfaffian_beta1", "trilog", "trilog_corrected", "monte_carlo")


@dataclass(frozen=True)
class EnsembleSpec:
    """Matrix size ``n``, Dyson index ``beta`` and dispersion ``sigma``."""

    n: int
    beta: int
    sigma: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n!r}")
        if self.beta not in (1, 2, 4):
            raise DomainError(f"beta must be 1, 2 or 4, got {self.beta!r}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise DomainError(f"sigma must be positive and finite, got {self.sigma!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def n_beta(self):
        """``(beta/2)(n - 1) + 1``; the manifold has dimension ``n * n_beta``."""
        return 0.5 * self.beta * (self.n - 1) + 1

    @property
    def t(self):
        """Double-scaling parameter ``n sigma^2``."""
        return self.n * self.sigma ** 2

    def with_sigma(self, sigma):
        return replace(self, sigma=sigma)


@dataclass(frozen=True)
class LogZResult:
    log_z: float
    method: str
    stderr: float = 0.0

    def per_n2(self, n):
        """``log_z / n^2``, the scale on which the planar limit is stated."""
        return self.log_z / n ** 2


def vandermonde_offset(spec):
    """``beta n (n-1)/2 log 2``: log z with ``2 sinh`` minus log z with ``sinh``."""
    return 0.5 * spec.beta * spec.n * (spec.n - 1) * math.log(2.0)


def _gauss_term(spec):
    return 0.5 * spec.n * math.log(2 * math.pi * spec.sigma ** 2)


# ----------------------------------------------------------------- exact forms

def log_z_exact_beta2(spec):
    """Closed form for beta = 2.

    ``log z = (N/2) log(2 pi s^2) + N (N^2 - 1) s^2 / 6 + sum_{n<N} (N - n) log(1 - e^{-n s^2})``
    """
    if spec.beta != 2:
        raise DomainError(f"log_z_exact_beta2 requires beta = 2, got {spec.beta}")
    N, s2 = spec.n, spec.sigma ** 2
    k = np.arange(1, N, dtype=float)
    tail = float(np.sum((N - k) * np.log(-np.expm1(-k * s2)))) if N > 1 else 0.0
    return LogZResult(_gauss_term(spec) + N * (N * N - 1) * s2 / 6 + tail, "exact_beta2")


def erf_toeplitz(n, sigma):
    """Skew-Toeplitz matrix ``A_ij = erf((j - i) sigma / 2)``, ``i, j = 1..n``."""
    k = np.arange(n)
    return special.erf((k[None, :] - k[:, None]) * sigma / 2)


def _erf_toeplitz_mp(n, sigma, dps):
    with mpmath.workdps(dps):
        s = mpmath.mpf(sigma) / 2
        vals = [mpmath.erf(d * s) for d in range(n)]
        A = np.empty((n, n), dtype=object)
        for i in range(n):
            for j in range(n):
                A[i, j] = vals[j - i] if j >= i else -vals[i - j]
    return A


PIVOT_ACCEPT = 1e-4
MAX_DPS = 4000


def log_pf_erf_toeplitz(n, sigma):
    """``log Pf A`` for the erf skew-Toeplitz matrix, with adaptive precision.

    Small ``sigma`` makes ``A`` nearly singular and the elimination cancels
    catastrophically in double precision. When the smallest pivot falls below
    ``1e-4 max|A|`` the elimination is redone in ``mpmath``, raising the working
    precision until the pivots are resolved with at least 25 spare digits.

    Returns
    -------
    (LogValue, int)
        The Pfaffian and the decimal precision used (0 for double precision).
    """
    A = erf_toeplitz(n, sigma)
    lv, ratio = log_pfaffian(A, full_output=True)
    if ratio >= PIVOT_ACCEPT and lv.sign != 0:
        return lv, 0
    dps = 40
    while dps <= MAX_DPS:
        Am = _erf_toeplitz_mp(n, sigma, dps)
        lv, ratio = log_pfaffian(Am, dps=dps, full_output=True)
        if lv.sign != 0 and ratio > 0 and math.log10(ratio) >= -(dps - 25):
            return lv, dps
        needed = -math.log10(ratio) if ratio > 0 else dps
        dps = int(max(2 * dps, needed + 40))
    raise NumericalError(f"Pfaffian for n={n}, sigma={sigma} needs more than {MAX_DPS} digits")


def log_z_pfaffian_beta1(spec):
    """Closed form for beta = 1 and even ``n`` via a Pfaffian.

    ``log z = (N/2) log(2 pi s^2) - N (N+1)^2 s^2 / 8 + log Pf M`` with
    ``M = D A D``, ``D = diag(e^{i^2 s^2 / 2})``, so that
    ``log Pf M = (s^2/2) N (N+1)(2N+1)/6 + log Pf A`` and only the bounded
    matrix ``A`` is ever formed.
    """
    if spec.beta != 1:
        raise DomainError(f"log_z_pfaffian_beta1 requires beta = 1, got {spec.beta}")
    N, s2 = spec.n, spec.sigma ** 2
    if N % 2:
        raise DomainError(f"even dimension required by the Pfaffian formula, got n = {N}")
    lv, _ = log_pf_erf_toeplitz(N, spec.sigma)
    if lv.sign <= 0:
        raise NumericalError(
            f"Pfaffian of the erf matrix has sign {lv.sign} at n={N}, sigma={spec.sigma}")
    log_pf_m = 0.5 * s2 * N * (N + 1) * (2 * N + 1) / 6 + lv.log_abs
    return LogZResult(_gauss_term(spec) - N * (N + 1) ** 2 * s2 / 8 + log_pf_m, "pfaffian_beta1")


def log_z_trilog(spec, corrected=False):
    """Planar limit ``N^2 (beta/2) Phi((beta/2) N sigma^2)``.

    With ``corrected=True`` the function ``Phi - zeta(2)/xi`` is used, which is
    the exact limit of the beta = 2 closed form.
    """
    xi = 0.5 * spec.beta * spec.t
    f = specfun.phi_planar_corrected if corrected else specfun.phi_trilog
    return LogZResult(spec.n ** 2 * 0.5 * spec.beta * f(xi),
                      "trilog_corrected" if corrected else "trilog")


# ----------------------------------------------------------------- Monte Carlo

def _log2sinh_half(x):
    # log(2 sinh(x/2)) for x >= 0
    return 0.5 * x + np.log(-np.expm1(-x))


def proposal_var(spec):
    """Variance of the widened Gaussian importance proposal.

    ``s^2 + beta^2 s^4 (N^2 - 1)/12`` matches the spread the Vandermonde
    repulsion adds to the Gaussian factor; with the bare ``s^2`` the weights
    become heavy-tailed and the log-mean estimate biased low once ``N s`` is of
    order one.
    """
    s2 = spec.sigma ** 2
    return s2 + spec.beta ** 2 * s2 ** 2 * (spec.n ** 2 - 1) / 12.0


def _pair_log_weight(r, beta):
    n = r.shape[1]
    iu, ju = np.triu_indices(n, 1)
    return beta * np.sum(_log2sinh_half(np.abs(r[:, iu] - r[:, ju])), axis=1)


# accumulator layout: sum w, sum w^2, sum w g, sum w^2 g^2, sum w^2 g
_LINEAR = np.array([1, 0, 1, 0, 0], dtype=bool)


def _rescale(acc, f):
    return acc * np.where(_LINEAR, f, f * f)


def _stream_moments(spec, count, seed_seq, var_q, chunk, stat=None):
    """Importance-weight sums for one stream, relative to the running max log weight."""
    rng = np.random.default_rng(seed_seq)
    s2 = spec.sigma ** 2
    lw_const = 0.5 * spec.n * math.log(2 * math.pi * var_q)
    m = -math.inf
    acc = np.zeros(5)
    done = 0
    while done < count:
        k = min(chunk, count - done)
        r = rng.standard_normal((k, spec.n)) * math.sqrt(var_q)
        rr = np.sum(r * r, axis=1)
        lw = _pair_log_weight(r, spec.beta) - rr / (2 * s2) + rr / (2 * var_q) + lw_const
        cm = float(np.max(lw))
        if cm > m:
            acc = _rescale(acc, math.exp(m - cm))
            m = cm
        w = np.exp(lw - m)
        acc[0] += w.sum()
        acc[1] += (w * w).sum()
        if stat is not None:
            g = stat(r)
            acc[2] += (w * g).sum()
            acc[3] += (w * w * g * g).sum()
            acc[4] += (w * w * g).sum()
        done += k
    return m, acc


def _merge(parts):
    m = max(p[0] for p in parts)
    tot = np.zeros(5)
    for pm, acc in parts:
        if math.isfinite(pm):
            tot += _rescale(acc, math.exp(pm - m))
    return m, tot


def seed_sequence(seed):
    """Fresh ``SeedSequence`` from an int, ``None`` or another ``SeedSequence``.

    A given ``SeedSequence`` is copied rather than reused: ``spawn`` advances
    its child counter, so reusing it would hand out different streams on
    every call.
    """
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key,
                                      pool_size=seed.pool_size)
    return np.random.SeedSequence(seed)


def _run_streams(spec, samples, seed, streams, threads, var_q, chunk, stat=None):
    children = seed_sequence(seed).spawn(streams)
    base, extra = divmod(samples, streams)
    counts = [base + (1 if i < extra else 0) for i in range(streams)]
    job = lambda i: _stream_moments(spec, counts[i], children[i], var_q, chunk, stat)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(job, range(streams)))
    else:
        parts = [job(i) for i in range(streams)]
    return _merge(parts)


def log_z_monte_carlo(spec, samples=1_000_000, seed=0, *, streams=8, threads=1,
                      var_q=None, chunk=1 << 16):
    """Importance-sampling estimate of ``log z``.

    Coordinates are drawn iid from ``N(0, var_q)`` (default
    :func:`proposal_var`); the weights are accumulated in log domain per
    stream. Streams are seeded by ``SeedSequence(seed).spawn(streams)`` and
    merged in stream order, so the result does not depend on ``threads``.

    Returns
    -------
    LogZResult
        ``stderr`` is the delta-method standard error of the log of the mean
        weight.
    """
    if samples < 1000:
        raise DomainError(f"need at least 1000 samples, got {samples}")
    if spec.n == 1:
        return LogZResult(_gauss_term(spec), "monte_carlo", 0.0)
    var_q = proposal_var(spec) if var_q is None else float(var_q)
    m, tot = _run_streams(spec, samples, seed, streams, threads, var_q, chunk)
    if not math.isfinite(m) or tot[0] <= 0:
        raise NumericalError("all importance weights vanished")
    mean = tot[0] / samples
    var = max(tot[1] / samples - mean * mean, 0.0)
    stderr = math.sqrt(var / samples) / mean
    log_z = m + math.log(mean) - math.lgamma(spec.n + 1)
    return LogZResult(log_z, "monte_carlo", stderr)


def phi_monte_carlo(spec, samples=200_000, seed=0, *, streams=8, threads=1, chunk=1 << 16):
    """Self-normalized importance estimate of ``phi(sigma) = E |r|^2``.

    Differentiating under the integral gives ``sigma^3 d/dsigma log z =
    E[sum r_i^2]`` under the radial density. Fixing ``seed`` yields common
    random numbers across ``sigma``, so the estimate is smooth in ``sigma``.

    Returns
    -------
    (float, float)
        Estimate and delta-method standard error.
    """
    if spec.n == 1:
        return spec.sigma ** 2, 0.0
    var_q = proposal_var(spec)
    m, tot = _run_streams(spec, samples, seed, streams, threads, var_q, chunk,
                          stat=lambda r: np.sum(r * r, axis=1))
    if tot[0] <= 0:
        raise NumericalError("all importance weights vanished")
    est = tot[2] / tot[0]
    # ratio estimator: Var ~ sum w^2 (g - est)^2 / (sum w)^2
    num = tot[3] - 2 * est * tot[4] + est * est * tot[1]
    se = math.sqrt(max(num, 0.0)) / tot[0]
    return float(est), float(se)


# ----------------------------------------------------------------- dispatch

def log_z(spec, method="auto", **kwargs):
    """Evaluate ``log z`` with the named method.

    ``auto`` picks the exact formula when one exists (beta = 2, or beta = 1 with
    even ``n``), Monte Carlo for odd ``n`` at beta = 1 (with a warning), and the
    trilogarithm limit for beta = 4.
    """
    if method == "auto":
        if spec.beta == 2:
            method = "exact_beta2"
        elif spec.beta == 1 and spec.n % 2 == 0:
            method = "pfaffian_beta1"
        elif spec.beta == 1:
            warnings.warn(f"no closed form for beta=1 with odd n={spec.n}; using Monte Carlo",
                          RuntimeWarning, stacklevel=2)
            method = "monte_carlo"
        else:
            method = "trilog"
    if method == "exact_beta2":
        return log_z_exact_beta2(spec)
    if method == "pfaffian_beta1":
        if spec.beta == 1 and spec.n % 2:
            warnings.warn(f"Pfaffian formula needs even n, got {spec.n}; using Monte Carlo",
                          RuntimeWarning, stacklevel=2)
            return log_z_monte_carlo(spec, **kwargs)
        return log_z_pfaffian_beta1(spec)
    if method == "trilog":
        return log_z_trilog(spec)
    if method == "trilog_corrected":
        return log_z_trilog(spec, corrected=True)
    if method == "monte_carlo":
        return log_z_monte_carlo(spec, **kwargs)
    raise DomainError(f"unknown method {method!r}; expected one of {METHODS}")


FD_REL_STEP = 1e-4


def phi_sigma(spec, method, **kwargs):
    """``phi(sigma) = sigma^3 d/dsigma log z``, which equals ``E d^2(Y, Ybar)``.

    Methods
    -------
    exact_beta2
        Term-wise analytic derivative of the beta = 2 closed form.
    trilog, trilog_corrected
        ``(beta^2 / 2) N^3 sigma^4 Phi'((beta/2) N sigma^2)``.
    pfaffian_beta1
        Central difference of the Pfaffian formula with step ``1e-4 sigma``.
    monte_carlo
        Self-normalized importance estimate of ``E |r|^2``; see
        :func:`phi_monte_carlo`.
    """
    N, b, s = spec.n, spec.beta, spec.sigma
    if method == "exact_beta2":
        if b != 2:
            raise DomainError("method exact_beta2 requires beta = 2")
        k = np.arange(1, N, dtype=float)
        # terms with k s^2 > 700 are below 1e-300 and the clamp only avoids overflow
        x = np.minimum(k * s * s, 700.0)
        tail = 2 * s ** 4 * float(np.sum((N - k) * k / np.expm1(x))) if N > 1 else 0.0
        return N * s * s + N * (N * N - 1) * s ** 4 / 3 + tail
    if method in ("trilog", "trilog_corrected"):
        d = specfun.phi_planar_corrected_deriv if method == "trilog_corrected" \
            else specfun.phi_trilog_deriv
        return 0.5 * b * b * N ** 3 * s ** 4 * d(0.5 * b * N * s * s)
    if method == "pfaffian_beta1":
        if b != 1:
            raise DomainError("method pfaffian_beta1 requires beta = 1")
        h = FD_REL_STEP * s
        up = log_z_pfaffian_beta1(spec.with_sigma(s + h)).log_z
        dn = log_z_pfaffian_beta1(spec.with_sigma(s - h)).log_z
        return s ** 3 * (up - dn) / (2 * h)
    if method == "monte_carlo":
        return phi_monte_carlo(spec, **kwargs)[0]
    raise DomainError(f"unknown method {method!r}; expected one of {METHODS}")

"""Maximum-likelihood fitting of Riemannian Gaussians: Fréchet mean and
dispersion estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import partition
from .errors import ConvergenceError, DomainError
from .matrix_core import adjoint, hermitian_part
from .partition import EnsembleSpec
from .spd import FactoredSpd, check_spd, infer_beta, whitened_log


def _as_data(data):
    if isinstance(data, FactoredSpd):
        if len(data) == 0:
            raise DomainError("data is empty")
        return data
    if isinstance(data, (list, tuple)):
        if not data:
            raise DomainError("data is empty")
        data = np.stack([np.asarray(d) for d in data])
    data = np.asarray(data)
    if data.ndim != 3 or data.shape[0] == 0:
        raise DomainError(f"data must be a nonempty stack (m, n, n), got {data.shape}")
    return check_spd(data, name="data")


def _sqrt_pair(Y):
    w, V = np.linalg.eigh(hermitian_part(Y))
    s = np.sqrt(w)
    return (V * s) @ adjoint(V), (V / s) @ adjoint(V)


def _expm_h(T):
    w, V = np.linalg.eigh(hermitian_part(T))
    return (V * np.exp(w)) @ adjoint(V)


def _log_euclidean_mean(data):
    if isinstance(data, FactoredSpd):
        C = data.factor
        # orthonormal factors give exact logs; otherwise go through whitened_log
        n = C.shape[-1]
        L = whitened_log(np.eye(n, dtype=C.dtype), data)
    else:
        n = data.shape[-1]
        L = whitened_log(np.eye(n, dtype=data.dtype), data)
    return _expm_h(L.mean(axis=0))


@dataclass
class MeanResult:
    mean: np.ndarray
    iterations: int
    grad_norm: float
    variances: list


def frechet_mean(data, tol=1e-9, max_iter=200, init="log_euclidean", full_output=False):
    """Fréchet (Karcher) mean under the affine-invariant distance.

    Riemannian gradient descent ``Y <- exp_Y(tau mean_m log_Y(Y_m))``, stopped
    when the Riemannian norm of the mean tangent vector falls below ``tol``.
    The step starts at ``tau = 1`` (the classical fixed-point map) and is
    halved whenever the Fréchet variance fails a sufficient-decrease test, so
    the recorded variances are non-increasing up to rounding. Once the
    variance is flat to working precision the gradient norm is used instead.

    Parameters
    ----------
    data : ndarray (m, n, n), list of arrays, or FactoredSpd
    tol : float
    max_iter : int
    init : {'log_euclidean', 'first'}
        Starting point. The log-Euclidean mean is well conditioned even when
        individual samples are not.
    full_output : bool
        Return a :class:`MeanResult` instead of the mean alone.

    Raises
    ------
    ConvergenceError
        After ``max_iter`` iterations, carrying the last iterate and gradient norm.
    """
    data = _as_data(data)
    if init == "log_euclidean":
        Y = _log_euclidean_mean(data)
    elif init == "first":
        Y = data[0].dense() if isinstance(data, FactoredSpd) else data[0]
    else:
        raise DomainError(f"unknown init {init!r}")
    def state(Y):
        w = np.linalg.eigvalsh(Y)
        if not w[0] > 1e-300 * w[-1] or not np.all(np.isfinite(w)):
            # trial point lost definiteness in floating point: reject it
            return None, None, math.inf
        R, Ri = _sqrt_pair(Y)
        try:
            L = whitened_log(Ri, data)
        except (np.linalg.LinAlgError, DomainError):
            return None, None, math.inf
        f = float(np.mean(np.sum(np.abs(L) ** 2, axis=(-2, -1))))
        return R, L.mean(axis=0), f

    R, T, f = state(Y)
    variances = [f]
    tau = 1.0
    for k in range(max_iter + 1):
        # in whitened coordinates the metric norm is the Frobenius norm
        g = float(np.linalg.norm(T))
        if g < tol:
            res = MeanResult(Y, k, g, variances)
            return res if full_output else Y
        if k == max_iter:
            break
        # Armijo backtracking on the Fréchet variance; the unit step of the
        # plain fixed-point map overshoots for widely spread data. The step
        # is kept once reduced, since growing it back makes f oscillate.
        # Close to the optimum the predicted decrease of f falls below its
        # rounding error, so the gradient norm becomes the merit function.
        noise = 64 * np.finfo(float).eps * f
        flat = 0.5 * tau * g * g < 1e-10 * f
        while True:
            Yn = hermitian_part(R @ _expm_h(tau * T) @ R)
            Rn, Tn, fn = state(Yn)
            if math.isfinite(fn):
                if flat:
                    if np.linalg.norm(Tn) < g or tau < 1e-6:
                        break
                elif fn <= f - 0.5 * tau * g * g + noise or tau < 1e-6:
                    break
            elif tau < 1e-6:
                raise ConvergenceError("Fréchet mean: every trial step left the SPD cone",
                                       last=Y, residual=g, iterations=k)
            tau *= 0.5
        Y, R, T, f = Yn, Rn, Tn, fn
        variances.append(f)
    raise ConvergenceError(
        f"Fréchet mean did not converge in {max_iter} iterations (gradient norm {g:.3e})",
        last=Y, residual=g, iterations=max_iter)


def mean_sq_dist(data, mean):
    """``(1/M) sum_m d^2(Y_m, mean)``."""
    data = _as_data(data)
    _, Ri = _sqrt_pair(np.asarray(mean))
    L = whitened_log(Ri, data)
    return float(np.mean(np.sum(np.abs(L) ** 2, axis=(-2, -1))))


@dataclass
class SigmaResult:
    sigma: float
    iterations: int
    residual: float
    bracket: Tuple[float, float]


BRACKET = (1e-3, 1e3)


def estimate_sigma(mean_sq_dist, n, beta, method="trilog", penalty=None, rtol=1e-8,
                   max_iter=200, full_output=False, **phi_kwargs):
    """Solve ``phi(sigma) = mean_sq_dist`` for the dispersion.

    Parameters
    ----------
    mean_sq_dist : float
        Mean squared distance of the data to their Fréchet mean.
    n, beta : int
        Matrix size and field.
    method : str
        Any :func:`partition.phi_sigma` method.
    penalty : (float, float), optional
        ``(lam, sigma0)``. Adds ``lam (sigma - sigma0)^2`` to the negative
        log-likelihood, which turns the equation into
        ``phi(sigma) - m + 2 lam sigma^3 (sigma - sigma0) = 0``.
    rtol : float
        Stop when ``|F(sigma)| < rtol * mean_sq_dist``.

    Notes
    -----
    The root is bracketed starting from ``[1e-3, 1e3]`` with geometric
    expansion, then refined by Newton steps on a finite-difference slope,
    falling back to bisection whenever a step leaves the bracket.
    """
    m = float(mean_sq_dist)
    if not (m > 0 and math.isfinite(m)):
        raise DomainError(f"mean_sq_dist must be positive and finite, got {mean_sq_dist!r}")
    lam, s0 = penalty if penalty is not None else (0.0, 0.0)

    def F(s):
        v = partition.phi_sigma(EnsembleSpec(n, beta, s), method, **phi_kwargs) - m
        if lam:
            v += 2 * lam * s ** 3 * (s - s0)
        return v

    lo, hi = BRACKET
    flo, fhi = F(lo), F(hi)
    for _ in range(60):
        if flo < 0 < fhi:
            break
        if flo >= 0:
            lo /= 10
            flo = F(lo)
        if fhi <= 0:
            hi *= 10
            fhi = F(hi)
    else:
        raise ConvergenceError(
            f"no sign change of phi(sigma) - m on [{lo:g}, {hi:g}]: "
            f"F(lo) = {flo:.6g}, F(hi) = {fhi:.6g}", residual=min(abs(flo), abs(fhi)))
    bracket = (lo, hi)
    # start from the geometric midpoint in log space, then Newton in sigma
    s = math.sqrt(lo * hi)
    fs = F(s)
    for it in range(1, max_iter + 1):
        if abs(fs) < rtol * m:
            res = SigmaResult(s, it - 1, abs(fs), bracket)
            return res if full_output else s
        if fs < 0:
            lo, flo = s, fs
        else:
            hi, fhi = s, fs
        h = 1e-6 * s
        slope = (F(s + h) - F(s - h)) / (2 * h)
        cand = s - fs / slope if slope > 0 else float("nan")
        if not (lo < cand < hi):
            cand = math.sqrt(lo * hi) if hi / lo > 4 else 0.5 * (lo + hi)
        s, fs = cand, F(cand)
        if hi - lo < 4 * np.finfo(float).eps * hi:
            break
    if abs(fs) < rtol * m:
        res = SigmaResult(s, max_iter, abs(fs), bracket)
        return res if full_output else s
    raise ConvergenceError(f"sigma solve stalled at {s:.12g} (|F| = {abs(fs):.3e})",
                           last=s, residual=abs(fs), iterations=max_iter)


@dataclass
class FitReport:
    """Outcome of :func:`fit_gaussian`."""

    mean: Optional[np.ndarray]
    sigma_hat: float
    mean_sq_dist: float
    iterations_mean: int
    iterations_sigma: int
    method: str
    converged: bool
    beta: int = 1
    n: int = 0
    m: int = 0
    message: str = ""

    def to_dict(self):
        return {
            "beta": self.beta, "n": self.n, "m": self.m,
            "sigma_hat": self.sigma_hat, "mean_sq_dist": self.mean_sq_dist,
            "iterations_mean": self.iterations_mean,
            "iterations_sigma": self.iterations_sigma,
            "method": self.method, "converged": self.converged,
        }


def fit_gaussian(data, method="trilog", tol=1e-9, max_iter=200, penalty=None, **phi_kwargs):
    """Fréchet mean, mean squared distance and dispersion estimate.

    Failures of either solver, and data with zero spread, give a report with
    ``converged = False`` rather than an exception.
    """
    data = _as_data(data)
    if isinstance(data, FactoredSpd):
        m, n, beta = len(data), data.factor.shape[-1], data.beta
    else:
        m, n, beta = data.shape[0], data.shape[-1], infer_beta(data)
    base = dict(method=method, beta=beta, n=n, m=m)
    try:
        res = frechet_mean(data, tol=tol, max_iter=max_iter, full_output=True)
    except ConvergenceError as e:
        return FitReport(e.last, float("nan"), float("nan"), e.iterations, 0,
                         converged=False, message=str(e), **base)
    msd = mean_sq_dist(data, res.mean)
    if m < 2 or not msd > 1e-20:
        return FitReport(res.mean, float("nan"), msd, res.iterations, 0, converged=False,
                         message=f"degenerate sample (m = {m}, mean squared distance {msd:.3g})",
                         **base)
    try:
        sr = estimate_sigma(msd, n, beta, method, penalty=penalty, full_output=True,
                            **phi_kwargs)
    except (ConvergenceError, DomainError) as e:
        return FitReport(res.mean, float("nan"), msd, res.iterations,
                         getattr(e, "iterations", 0), converged=False, message=str(e), **base)
    return FitReport(res.mean, sr.sigma, msd, res.iterations, sr.iterations,
                     converged=True, **base)

"""Affine-invariant geometry of symmetric / Hermitian positive-definite matrices.

Points are plain ``ndarray`` objects (real for beta = 1, complex for beta = 2),
optionally stacked along leading axes. Tangent vectors are self-adjoint arrays
of the same shape. Very ill-conditioned points, such as samples of a wide
Gaussian, can be held in factored form by :class:`FactoredSpd`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._graded import graded_eig
from .errors import DomainError, NumericalError
from .matrix_core import SELF_ADJOINT_TOL, adjoint, eigh, hermitian_part

SPD_COND_TOL = 1e-13


def infer_beta(Y):
    """1 for real input, 2 for complex input."""
    return 2 if np.iscomplexobj(Y) else 1


def check_spd(Y, beta=None, tol=SELF_ADJOINT_TOL, name="Y"):
    """Validate and symmetrize an SPD matrix (or stack).

    Parameters
    ----------
    Y : array_like, shape (..., n, n)
    beta : {1, 2}, optional
        Required field. ``beta = 1`` rejects non-zero imaginary parts.
    tol : float
        Self-adjointness tolerance.

    Returns
    -------
    ndarray
        The self-adjoint part of ``Y``; real dtype when ``beta = 1``.

    Raises
    ------
    DomainError
        If ``Y`` is not self-adjoint, has ``lambda_min <= 1e-13 lambda_max`` or
        the wrong field.
    """
    Y = np.asarray(Y)
    if beta not in (None, 1, 2):
        raise DomainError(f"beta must be 1 or 2 for matrices, got {beta!r}")
    if beta == 1 and np.iscomplexobj(Y):
        if np.any(np.abs(Y.imag) > tol * max(1.0, float(np.max(np.abs(Y))))):
            raise DomainError(f"{name}: beta=1 requires a real matrix")
        Y = Y.real
    if beta == 2:
        Y = Y.astype(complex)
    w, _ = eigh(Y, tol)
    lmin, lmax = w[..., 0], w[..., -1]
    if np.any(~(lmin > SPD_COND_TOL * lmax)) or np.any(lmax <= 0):
        bad = float(np.min(lmin / np.where(lmax > 0, lmax, 1.0)))
        raise DomainError(
            f"{name} is not positive definite within tolerance "
            f"(lambda_min / lambda_max = {bad:.3e})")
    return hermitian_part(Y)


def _pow(Y, p):
    w, V = np.linalg.eigh(Y)
    return (V * (w ** p)[..., None, :]) @ adjoint(V)


def _fun(Y, f):
    w, V = np.linalg.eigh(hermitian_part(Y))
    return (V * f(w)[..., None, :]) @ adjoint(V)


def congruence(A, Y):
    """Group action ``Y -> A Y A†``."""
    return hermitian_part(A @ Y @ adjoint(A))


def metric_inner(Y, u, v):
    """Affine-invariant inner product ``Re tr(Y^-1 u Y^-1 v)`` at ``Y``."""
    Y = np.asarray(Y)
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != Y.shape or v.shape != Y.shape:
        raise DomainError(
            f"tangent vectors must match the base point shape {Y.shape}, got {u.shape}, {v.shape}")
    eigh(u)
    eigh(v)
    a = np.linalg.solve(Y, u)
    b = np.linalg.solve(Y, v)
    return np.real(np.einsum("...ij,...ji->...", a, b))


def metric_norm(Y, u):
    """Riemannian norm of ``u`` at ``Y``."""
    return np.sqrt(np.maximum(metric_inner(Y, u, u), 0.0))


def _pair_check(X, Y):
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.shape[-2:] != Y.shape[-2:]:
        raise DomainError(f"dimension mismatch: {X.shape[-2:]} vs {Y.shape[-2:]}")
    if np.iscomplexobj(X) != np.iscomplexobj(Y):
        raise DomainError("field mismatch: cannot mix real (beta=1) and complex (beta=2) points")
    return X, Y


def whitened_eigs(X, Y):
    """Eigenvalues of ``X^{-1/2} Y X^{-1/2}`` (ascending), broadcasting stacks."""
    X, Y = _pair_check(X, Y)
    W = _pow(hermitian_part(X), -0.5)
    return np.linalg.eigvalsh(congruence(W, Y))


def distance(X, Y):
    """Geodesic distance ``sqrt(tr log^2(X^{-1/2} Y X^{-1/2}))``.

    Parameters
    ----------
    X, Y : ndarray, shape (..., n, n)
        SPD matrices of the same field. Either argument may be a stack.

    Returns
    -------
    float or ndarray
    """
    w = whitened_eigs(X, Y)
    if np.any(w <= 0):
        raise DomainError("distance: arguments are not positive definite")
    d = np.sqrt(np.sum(np.log(w) ** 2, axis=-1))
    return float(d) if d.ndim == 0 else d


def exp_map(Y, u):
    """Riemannian exponential ``Y^{1/2} exp(Y^{-1/2} u Y^{-1/2}) Y^{1/2}``."""
    Y = hermitian_part(np.asarray(Y))
    u = np.asarray(u)
    if u.shape[-2:] != Y.shape[-2:]:
        raise DomainError(f"tangent shape {u.shape} does not match base {Y.shape}")
    w, V = np.linalg.eigh(Y)
    s = np.sqrt(w)
    R = (V * s[..., None, :]) @ adjoint(V)
    Ri = (V * (1 / s)[..., None, :]) @ adjoint(V)
    return congruence(R, _fun(Ri @ u @ Ri, np.exp))


def log_map(Y, X):
    """Riemannian logarithm ``Y^{1/2} log(Y^{-1/2} X Y^{-1/2}) Y^{1/2}``."""
    Y, X = _pair_check(Y, X)
    Y = hermitian_part(Y)
    w, V = np.linalg.eigh(Y)
    s = np.sqrt(w)
    R = (V * s[..., None, :]) @ adjoint(V)
    Ri = (V * (1 / s)[..., None, :]) @ adjoint(V)
    inner = congruence(Ri, X)
    iw = np.linalg.eigvalsh(inner)
    if np.any(iw <= 0):
        raise DomainError("log_map: argument is not positive definite")
    return congruence(R, _fun(inner, np.log))


@dataclass(frozen=True)
class FactoredSpd:
    """SPD matrices held as ``C diag(exp(d)) C†``.

    ``factor`` has shape ``(..., n, n)`` and ``log_scale`` shape ``(..., n)``.
    The representation keeps the log-spectrum exact when ``exp(d)`` spans more
    than the double-precision range, which happens for Gaussian samples with
    large dispersion.
    """

    factor: np.ndarray
    log_scale: np.ndarray

    @property
    def shape(self):
        return self.factor.shape

    @property
    def beta(self):
        return infer_beta(self.factor)

    def __len__(self):
        return self.factor.shape[0]

    def __getitem__(self, idx):
        return FactoredSpd(self.factor[idx], self.log_scale[idx])

    def dense(self):
        """Materialize ``C diag(exp(d)) C†`` (may be ill-conditioned)."""
        C = self.factor
        return hermitian_part((C * np.exp(self.log_scale)[..., None, :]) @ adjoint(C))

    def congruence(self, A):
        """Apply ``Y -> A Y A†`` without leaving factored form."""
        return FactoredSpd(A @ self.factor, self.log_scale)

    def scale(self, log_c):
        """Multiply by the scalar ``exp(log_c)``."""
        return FactoredSpd(self.factor, self.log_scale + log_c)


def whitened_log(W, data):
    """``log(W Y W†)`` for every ``Y`` in ``data``.

    ``data`` is a dense stack or a :class:`FactoredSpd`. In the factored case
    the eigen-decomposition of ``(W C) diag(e^d) (W C)†`` is computed by
    one-sided Jacobi on log-scaled columns (see ``_graded``), which keeps the
    small eigenvalues to full relative accuracy whatever the spread of ``d``.
    """
    if isinstance(data, FactoredSpd):
        K = np.ascontiguousarray(np.broadcast_to(W @ data.factor, data.factor.shape))
        d = np.ascontiguousarray(data.log_scale, dtype=float)
        flat_K = K.reshape((-1,) + K.shape[-2:])
        V, logw, sweeps = graded_eig(flat_K, d.reshape(-1, d.shape[-1]))
        if sweeps < 0:
            raise NumericalError("whitened_log: Jacobi sweeps did not converge")
        V = V.reshape(K.shape)
        logw = logw.reshape(d.shape)
        return hermitian_part((V * logw[..., None, :]) @ adjoint(V))
    return _fun(congruence(W, np.asarray(data)), np.log)


def sq_distances(M, data):
    """Squared distances ``d^2(M, Y)`` for every ``Y`` in ``data`` (dense or factored)."""
    W = _pow(hermitian_part(np.asarray(M)), -0.5)
    L = whitened_log(W, data)
    return np.real(np.einsum("...ij,...ij->...", L, np.conj(L)))

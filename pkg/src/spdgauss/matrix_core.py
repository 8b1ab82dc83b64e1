"""Dense self-adjoint linear algebra: eigendecomposition, matrix functions,
Takagi factorization and log-domain Pfaffians.

All routines accept real or complex ``ndarray`` input. Functions that act on a
single matrix also accept stacks of shape ``(..., n, n)`` unless stated
otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Union

import mpmath
import numpy as np

from .errors import DomainError

SELF_ADJOINT_TOL = 1e-12


def adjoint(A):
    """Conjugate transpose over the last two axes."""
    return np.swapaxes(np.conj(A), -1, -2)


def hermitian_part(A):
    """Return ``(A + A†) / 2``, the self-adjoint part of ``A``."""
    return 0.5 * (A + adjoint(A))


def _check_self_adjoint(A, tol, what="matrix"):
    A = np.asarray(A)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise DomainError(f"{what} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError(f"{what} has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    resid = float(np.max(np.abs(A - adjoint(A)))) if A.size else 0.0
    if resid > tol * scale:
        raise DomainError(
            f"{what} is not self-adjoint: max |A - A†| = {resid:.3e} (tol {tol:g})")
    return hermitian_part(A)


class EigenSystem(NamedTuple):
    """Eigenvalues (ascending) and orthonormal eigenvectors (columns)."""

    values: np.ndarray
    basis: np.ndarray


def eigh(A, tol=SELF_ADJOINT_TOL):
    """Eigendecomposition of a self-adjoint matrix.

    Parameters
    ----------
    A : ndarray, shape (..., n, n)
        Real symmetric or complex Hermitian matrix. It is symmetrized before
        the decomposition.
    tol : float
        Admissible relative deviation from self-adjointness.

    Returns
    -------
    EigenSystem
        ``values`` sorted ascending and ``basis`` with orthonormal columns such
        that ``basis @ diag(values) @ basis† == A``.
    """
    H = _check_self_adjoint(A, tol)
    w, V = np.linalg.eigh(H)
    return EigenSystem(w, V)


def _reassemble(V, fw):
    return (V * fw[..., None, :]) @ adjoint(V)


_DOMAINS = {
    "log": (np.log, lambda w: w > 0, "positive"),
    "sqrt": (np.sqrt, lambda w: w > 0, "positive"),
    "inv_sqrt": (lambda w: 1.0 / np.sqrt(w), lambda w: w > 0, "positive"),
    "exp": (np.exp, lambda w: np.isfinite(w), "finite"),
    "arctanh": (np.arctanh, lambda w: (w >= 0) & (w < 1), "in [0, 1)"),
}


def matrix_function(A, f: Union[str, Callable], tol=SELF_ADJOINT_TOL):
    """Apply a scalar function to the eigenvalues of a self-adjoint matrix.

    Parameters
    ----------
    A : ndarray, shape (..., n, n)
        Self-adjoint matrix (or stack).
    f : {'log', 'exp', 'sqrt', 'inv_sqrt', 'arctanh'} or callable
        Named functions have their domain checked; a callable is applied as is.
    tol : float
        Self-adjointness tolerance.

    Returns
    -------
    ndarray
        ``basis @ diag(f(values)) @ basis†``, self-adjoint.

    Raises
    ------
    DomainError
        If an eigenvalue lies outside the domain of ``f``.
    """
    w, V = eigh(A, tol)
    if callable(f):
        return _reassemble(V, f(w))
    try:
        func, ok, desc = _DOMAINS[f]
    except KeyError:
        raise DomainError(f"unknown matrix function {f!r}") from None
    bad = ~ok(w)
    if np.any(bad):
        raise DomainError(
            f"matrix_function({f!r}): eigenvalue {w[bad].flat[0]!r} is not {desc}")
    return _reassemble(V, func(w))


def takagi(S, tol=SELF_ADJOINT_TOL):
    """Takagi factorization ``S = U diag(lam) Uᵀ`` of a complex symmetric matrix.

    The factorization is read off the real symmetric embedding
    ``[[Re S, Im S], [Im S, -Re S]]``, whose eigenpairs ``(s, [x; y])`` with
    ``s > 0`` give Takagi vectors ``u = x + i y`` satisfying ``S conj(u) = s u``.
    This handles repeated singular values without special casing. Columns for
    (numerically) zero singular values are an arbitrary orthonormal completion.

    Parameters
    ----------
    S : ndarray, shape (n, n)
        Complex (or real) symmetric matrix.

    Returns
    -------
    U : ndarray, shape (n, n)
        Unitary matrix.
    lam : ndarray, shape (n,)
        Singular values of ``S``, descending.
    """
    S = np.asarray(S, dtype=complex)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DomainError(f"takagi expects a square matrix, got {S.shape}")
    n = S.shape[0]
    scale = max(1.0, float(np.max(np.abs(S)))) if S.size else 1.0
    if float(np.max(np.abs(S - S.T))) > tol * scale:
        raise DomainError("takagi: matrix is not symmetric (S != Sᵀ)")
    S = 0.5 * (S + S.T)
    A, B = S.real, S.imag
    M = np.block([[A, B], [B, -A]])
    w, Q = np.linalg.eigh(M)
    order = np.argsort(w)[::-1][:n]
    lam = np.clip(w[order], 0.0, None)
    U = Q[:n, order] + 1j * Q[n:, order]
    cutoff = n * np.finfo(float).eps * max(float(lam[0]) if n else 0.0, 1e-300) * 16
    keep = lam > cutoff
    if not np.all(keep):
        # complete the null part with an orthonormal complement of the kept columns
        Uk = U[:, keep]
        Qc, _ = np.linalg.qr(np.hstack([Uk, np.eye(n, dtype=complex)]))
        U = np.hstack([Uk, Qc[:, Uk.shape[1]:n]])
        lam = np.concatenate([lam[keep], np.zeros(n - Uk.shape[1])])
    return U, lam


@dataclass(frozen=True)
class LogValue:
    """Overflow-safe scalar ``sign * exp(log_abs)``."""

    sign: int
    log_abs: float

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise DomainError(f"LogValue sign must be -1, 0 or 1, got {self.sign}")
        if self.sign == 0 and self.log_abs != -math.inf:
            object.__setattr__(self, "log_abs", -math.inf)

    @classmethod
    def from_float(cls, x):
        if x == 0:
            return cls(0, -math.inf)
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    def __mul__(self, other):
        if not isinstance(other, LogValue):
            other = LogValue.from_float(other)
        sign = self.sign * other.sign
        return LogValue(sign, self.log_abs + other.log_abs if sign else -math.inf)

    __rmul__ = __mul__

    def __float__(self):
        return self.sign * math.exp(self.log_abs) if self.sign else 0.0


def _parlett_reid(A, log):
    """Skew-symmetric Parlett-Reid elimination (lower-triangular LTLᵀ form).

    Works on float and on object (mpmath) arrays. Returns the Pfaffian sign,
    its log-magnitude and the smallest ``|pivot| / max|A|`` encountered.
    """
    A = A.copy()
    n = A.shape[0]
    scale = max(abs(x) for x in A.ravel()) if n else 0
    sign = 1
    log_abs = 0
    min_ratio = math.inf
    for k in range(0, n - 1, 2):
        col = np.abs(A[k + 1:, k])
        kp = k + 1 + int(np.argmax(col))
        if kp != k + 1:
            A[[k + 1, kp], :] = A[[kp, k + 1], :]
            A[:, [k + 1, kp]] = A[:, [kp, k + 1]]
            sign = -sign
        piv = A[k, k + 1]
        if piv == 0:
            return 0, -math.inf, 0.0
        if piv < 0:
            sign = -sign
        log_abs = log_abs + log(abs(piv))
        min_ratio = min(min_ratio, float(abs(piv) / scale))
        if k + 2 < n:
            tau = A[k, k + 2:] / piv
            c = A[k + 2:, k + 1]
            A[k + 2:, k + 2:] += np.outer(tau, c) - np.outer(c, tau)
    return sign, log_abs, min_ratio


def log_pfaffian(A, tol=SELF_ADJOINT_TOL, *, dps=None, full_output=False):
    """Pfaffian of a real skew-symmetric matrix, in log domain.

    Parameters
    ----------
    A : ndarray, shape (n, n)
        Real skew-symmetric matrix with ``n`` even. With ``dps`` set, ``A`` may
        also be an object array of ``mpmath.mpf`` entries.
    tol : float
        Admissible relative deviation from skew-symmetry.
    dps : int, optional
        Run the elimination in ``mpmath`` with this many decimal digits.
    full_output : bool
        Also return the smallest pivot relative to ``max|A|``, a cheap
        indicator of cancellation.

    Returns
    -------
    LogValue or (LogValue, float)
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError(f"log_pfaffian expects a square matrix, got {A.shape}")
    n = A.shape[0]
    if n % 2:
        raise DomainError(f"Pfaffian requires an even dimension, got {n}")
    if dps is None:
        A = np.asarray(A, dtype=float)
        scale = max(1.0, float(np.max(np.abs(A)))) if n else 1.0
        if n and float(np.max(np.abs(A + A.T))) > tol * scale:
            raise DomainError("log_pfaffian: matrix is not skew-symmetric")
        sign, la, ratio = _parlett_reid(A, math.log)
        res = LogValue(sign, float(la))
    else:
        with mpmath.workdps(dps):
            Am = np.array([[mpmath.mpf(x) for x in row] for row in A], dtype=object)
            sign, la, ratio = _parlett_reid(Am, mpmath.log)
            res = LogValue(sign, float(la) if sign else -math.inf)
    return (res, ratio) if full_output else res

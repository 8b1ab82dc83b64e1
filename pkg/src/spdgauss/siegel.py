"""Siegel domains: complex N x N matrices of operator norm < 1 (symmetric for
beta = 1), with their invariant metric, cross-ratio distance, Möbius maps,
polar factorization, Gaussian sampling and the acosh-normal integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DomainError, NumericalError
from .matrix_core import adjoint, hermitian_part, takagi
from .partition import EnsembleSpec, LogZResult
from .sampler import ChainConfig, RadialChain, _run_chains, _seed_seq, haar

NORM_MARGIN = 1e-12
SYM_TOL = 1e-12


def check_siegel(Om, beta=2, name="Omega"):
    """Validate a Siegel-domain point and return it as a complex array.

    ``beta = 1`` additionally requires ``Om = Om^T`` (the result is
    symmetrized). The operator norm must be below ``1 - 1e-12``.
    """
    if beta not in (1, 2):
        raise DomainError(f"beta must be 1 or 2 on the Siegel domain, got {beta!r}")
    Om = np.asarray(Om, dtype=complex)
    if Om.ndim < 2 or Om.shape[-1] != Om.shape[-2]:
        raise DomainError(f"{name} must be square, got shape {Om.shape}")
    if not np.all(np.isfinite(Om)):
        raise DomainError(f"{name} has non-finite entries")
    if beta == 1:
        Ot = np.swapaxes(Om, -1, -2)
        if np.any(np.abs(Om - Ot) > SYM_TOL * max(1.0, float(np.max(np.abs(Om))))):
            raise DomainError(f"{name}: beta=1 points must be symmetric")
        Om = 0.5 * (Om + Ot)
    s = np.linalg.norm(Om, ord=2, axis=(-2, -1))
    if np.any(s >= 1 - NORM_MARGIN):
        raise DomainError(f"{name} has operator norm {float(np.max(s))!r} >= 1")
    return Om


def _eye(n):
    return np.eye(n, dtype=complex)


def siegel_metric_inner(Om, u, v):
    """Invariant inner product ``Re tr[(I - Om Om†)^-1 u (I - Om† Om)^-1 v†]``."""
    Om = np.asarray(Om, dtype=complex)
    I = _eye(Om.shape[-1])
    A = np.linalg.inv(I - Om @ adjoint(Om))
    B = np.linalg.inv(I - adjoint(Om) @ Om)
    return float(np.real(np.trace(A @ u @ B @ adjoint(v))))


def cross_ratio(Xi, Om):
    """Matrix cross-ratio ``(Xi - Om)(I - Om† Xi)^-1 (Xi† - Om†)(I - Om Xi†)^-1``."""
    Xi = np.asarray(Xi, dtype=complex)
    Om = np.asarray(Om, dtype=complex)
    I = _eye(Xi.shape[-1])
    D = Xi - Om
    left = D @ np.linalg.inv(I - adjoint(Om) @ Xi)
    right = adjoint(D) @ np.linalg.inv(I - Om @ adjoint(Xi))
    return left @ right


def siegel_distance(Xi, Om):
    """Geodesic distance ``sqrt(tr arctanh^2(R^{1/2}))`` from the cross-ratio.

    ``R`` is similar to ``P P†`` with ``P`` the Möbius image of ``Xi`` under
    the map sending ``Om`` to the origin. It is not Hermitian in general, but
    its eigenvalues are real and lie in ``[0, 1)``; they are computed with a
    general eigensolver and their imaginary parts discarded after a check.
    """
    Xi = np.asarray(Xi, dtype=complex)
    Om = np.asarray(Om, dtype=complex)
    if Xi.shape != Om.shape:
        raise DomainError(f"shape mismatch: {Xi.shape} vs {Om.shape}")
    lam = np.linalg.eigvals(cross_ratio(Xi, Om))
    if np.max(np.abs(lam.imag), initial=0.0) > 1e-8:
        raise NumericalError(f"cross-ratio has complex eigenvalues {lam}")
    lam = np.clip(lam.real, 0.0, None)
    if np.any(lam >= 1):
        raise DomainError(f"cross-ratio eigenvalue {float(np.max(lam))!r} >= 1 (boundary)")
    return float(math.sqrt(np.sum(np.arctanh(np.sqrt(lam)) ** 2)))


def _herm_pow(H, p):
    w, V = np.linalg.eigh(hermitian_part(H))
    return (V * w ** p) @ adjoint(V)


@dataclass(frozen=True)
class MobiusMap:
    """The isometry ``Psi_A(Z) = (I - A A†)^{-1/2} (Z - A)(I - A† Z)^{-1} (I - A† A)^{1/2}``.

    ``Psi_A`` sends ``A`` to the origin; its inverse is ``Psi_{-A}``.
    """

    center: np.ndarray
    beta: int = 2

    def _apply(self, A, Z):
        I = _eye(A.shape[-1])
        L = _herm_pow(I - A @ adjoint(A), -0.5)
        Rt = _herm_pow(I - adjoint(A) @ A, 0.5)
        W = L @ (Z - A) @ np.linalg.solve(I - adjoint(A) @ Z, Rt)
        if self.beta == 1:
            W = 0.5 * (W + np.swapaxes(W, -1, -2))
        s = np.linalg.norm(W, ord=2, axis=(-2, -1))
        if np.any(s >= 1):
            raise DomainError(f"Möbius image left the domain (norm {float(np.max(s))!r})")
        return W

    def forward(self, Z):
        return self._apply(self.center, np.asarray(Z, dtype=complex))

    def inverse(self, W):
        return self._apply(-self.center, np.asarray(W, dtype=complex))

    __call__ = forward


def mobius_to_origin(center, beta=2):
    """Isometry of the Siegel domain moving ``center`` to zero."""
    return MobiusMap(check_siegel(center, beta, "center"), beta)


@dataclass(frozen=True)
class PolarFactor:
    """``Om = U diag(tanh r) V†``; for ``beta = 1``, ``V = conj(U)``."""

    U: np.ndarray
    V: np.ndarray
    r: np.ndarray

    def reconstruct(self):
        return (self.U * np.tanh(self.r)) @ adjoint(self.V)


def polar_factor(Om, beta=2):
    """SVD (``beta = 2``) or Takagi (``beta = 1``) factorization with radial parts."""
    Om = check_siegel(Om, beta)
    if beta == 2:
        U, s, Vh = np.linalg.svd(Om)
        V = adjoint(Vh)
    else:
        U, s = takagi(Om)
        V = np.conj(U)
    return PolarFactor(U, V, np.arctanh(np.clip(s, 0.0, None)))


def siegel_radial_log_density(r, spec):
    """Log of the Siegel radial density, up to a constant.

    ``sum(-r_i^2/2 s^2 + log sinh 2 r_i)
    + beta sum_{i<j} log(sinh|r_i - r_j| sinh(r_i + r_j))``; ``-inf`` at
    coincident or zero radii.
    """
    r = np.ascontiguousarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("Siegel radial coordinates must be nonnegative")
    return float(_kernels.log_density(r, 0.5 / spec.sigma ** 2, float(spec.beta), _kernels.SIEGEL))


@dataclass(frozen=True)
class SiegelGaussianModel:
    center: np.ndarray
    sigma: float
    beta: int = 2

    def __post_init__(self):
        object.__setattr__(self, "center", check_siegel(self.center, self.beta, "center"))
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")

    @property
    def spec(self):
        return EnsembleSpec(self.center.shape[-1], self.beta, self.sigma)


def sample_siegel_radial(spec, count, cfg=ChainConfig()):
    """Metropolis samples of the Siegel radial density (``r_i > 0``)."""
    if spec.beta not in (1, 2):
        raise DomainError("Siegel sampling supports beta 1 or 2")
    return _run_chains(spec, count, cfg, _kernels.SIEGEL)


def sample_siegel_gaussian(model, count, cfg=ChainConfig()):
    """Riemannian Gaussian samples on the Siegel domain.

    Samples are generated at the origin as ``U tanh(r) V†`` (``V = conj(U)``
    for ``beta = 1``) with Haar unitary factors, then transported to the
    centre by the inverse Möbius map.

    Returns
    -------
    (ndarray, RadialChain)
        Stack of shape ``(count, n, n)`` and the radial chain.
    """
    n = model.center.shape[-1]
    radial_ss, haar_ss = _seed_seq(cfg.seed).spawn(2)
    from dataclasses import replace
    chain = sample_siegel_radial(model.spec, count, replace(cfg, seed=radial_ss))
    rng = np.random.default_rng(haar_ss)
    U = haar(n, 2, rng, size=count)
    lam = np.tanh(chain.samples)
    if model.beta == 2:
        V = haar(n, 2, rng, size=count)
        Om = (U * lam[:, None, :]) @ adjoint(V)
    else:
        Om = (U * lam[:, None, :]) @ np.swapaxes(U, -1, -2)
        Om = 0.5 * (Om + np.swapaxes(Om, -1, -2))
    if np.any(model.center != 0):
        Om = MobiusMap(model.center, model.beta).inverse(Om)
    return Om, chain


def _siegel_stream(spec, count, seed_seq, scale, chunk):
    rng = np.random.default_rng(seed_seq)
    s2 = spec.sigma ** 2
    n = spec.n
    iu, ju = np.triu_indices(n, 1)
    # half-normal proposal density 2 / (sqrt(2 pi) scale) exp(-r^2 / 2 scale^2)
    lq_const = n * (math.log(2.0) - 0.5 * math.log(2 * math.pi * scale ** 2))
    m = -math.inf
    s0 = s1 = 0.0
    done = 0
    while done < count:
        k = min(chunk, count - done)
        r = np.abs(rng.standard_normal((k, n))) * scale
        rr = np.sum(r * r, axis=1)
        # log(2 sinh 2r) = 2r + log(1 - e^{-4r})
        lw = np.sum(2 * r + np.log(-np.expm1(-4 * r)), axis=1) - rr / (2 * s2)
        if n > 1:
            a, b = r[:, iu], r[:, ju]
            d = np.abs(a - b)
            # log|cosh 2a - cosh 2b| = log 2 + log sinh|a-b| + log sinh(a+b)
            ls = lambda x: x - math.log(2.0) + np.log(-np.expm1(-2 * x))
            lw += spec.beta * np.sum(math.log(2.0) + ls(d) + ls(a + b), axis=1)
        lw -= lq_const - rr / (2 * scale ** 2)
        cm = float(np.max(lw))
        if cm > m:
            f = math.exp(m - cm) if math.isfinite(m) else 0.0
            s0, s1, m = s0 * f, s1 * f * f, cm
        w = np.exp(lw - m)
        s0 += float(w.sum())
        s1 += float((w * w).sum())
        done += k
    return m, s0, s1


def siegel_proposal_scale(spec):
    """Half-normal width covering the drift of the Siegel radial density.

    The factors ``sinh 2r_i`` and the pair terms push the ``k``-th smallest
    radius out by about ``2 s^2 (1 + beta (k - 1))``; the width matches the
    resulting mean square ``s^2 + 4 s^4 mean_k (1 + beta (k - 1))^2``. With
    the bare ``s`` the weights are heavy-tailed and the log-mean estimate is
    biased low, badly so beyond ``N = 2``.
    """
    n, b, s2 = spec.n, spec.beta, spec.sigma ** 2
    m = 1 + b * (n - 1) + b * b * (n - 1) * (2 * n - 1) / 6.0
    return math.sqrt(s2 + 4 * s2 * s2 * m)


def log_z_acosh_mc(spec, samples=1_000_000, seed=0, *, streams=8, scale=None, chunk=1 << 16):
    """Importance-sampling estimate of the acosh-normal integral.

    ``z = (1/N!) int_{(1, inf)^N} |V(x)|^beta prod exp(-acosh^2(x_i) / 8 sigma^2) dx``
    is rewritten with ``x_i = cosh(2 r_i)`` as an integral over ``r > 0`` and
    sampled with iid half-normal proposals of width ``scale`` (default
    :func:`siegel_proposal_scale`). Streams are merged in fixed order.
    """
    if spec.beta not in (1, 2):
        raise DomainError("acosh-normal integral is defined for beta 1 or 2")
    if samples < 1000:
        raise DomainError(f"need at least 1000 samples, got {samples}")
    scale = siegel_proposal_scale(spec) if scale is None else float(scale)
    children = _seed_seq(seed).spawn(streams)
    base, extra = divmod(samples, streams)
    parts = [_siegel_stream(spec, base + (1 if i < extra else 0), children[i], scale, chunk)
             for i in range(streams)]
    m = max(p[0] for p in parts)
    s0 = sum(p[1] * math.exp(p[0] - m) for p in parts)
    s1 = sum(p[2] * math.exp(2 * (p[0] - m)) for p in parts)
    if s0 <= 0:
        raise NumericalError("all importance weights vanished")
    mean = s0 / samples
    var = max(s1 / samples - mean * mean, 0.0)
    stderr = math.sqrt(var / samples) / mean
    return LogZResult(m + math.log(mean) - math.lgamma(spec.n + 1), "monte_carlo", stderr)


def log_z_acosh_n1(sigma):
    """Closed form for ``N = 1``: ``log(sqrt(2 pi s^2) e^{2 s^2} erf(sqrt(2) s))``."""
    return 0.5 * math.log(2 * math.pi * sigma ** 2) + 2 * sigma ** 2 + math.log(
        math.erf(math.sqrt(2) * sigma))

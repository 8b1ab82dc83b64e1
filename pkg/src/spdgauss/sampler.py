"""Sampling: Haar matrices, Metropolis chains for radial densities, Riemannian
Gaussian samples on SPD matrices and the log-normal rescaling.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .errors import DomainError
from .matrix_core import adjoint
from .partition import EnsembleSpec, proposal_var
from .partition import seed_sequence as _seed_seq
from .spd import FactoredSpd, check_spd, infer_beta

_CHUNK = 4096


@dataclass(frozen=True)
class ChainConfig:
    """Metropolis controls.

    Attributes
    ----------
    burn_in : int
        Discarded sweeps (one sweep updates every coordinate once).
    thinning : int, optional
        Sweeps between recorded states; ``None`` means ``10 n``.
    step : float, optional
        Random-walk standard deviation; ``None`` means ``sigma / sqrt(n)``.
    seed : int or SeedSequence
    chains : int
        Independent chains sharing the requested count; results are
        concatenated in chain order.
    threads : int
        Worker threads for multiple chains; never changes the output.
    """

    burn_in: int = 10_000
    thinning: Optional[int] = None
    step: Optional[float] = None
    seed: object = 0
    chains: int = 1
    threads: int = 1

    def __post_init__(self):
        if self.burn_in < 0:
            raise DomainError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.thinning is not None and self.thinning < 1:
            raise DomainError(f"thinning must be >= 1, got {self.thinning}")
        if self.step is not None and not self.step > 0:
            raise DomainError(f"step must be positive, got {self.step}")
        if self.chains < 1 or self.threads < 1:
            raise DomainError("chains and threads must be >= 1")


@dataclass
class RadialChain:
    """Recorded radial states (one row per sample) and chain diagnostics."""

    samples: np.ndarray
    acceptance: float
    warnings: list = field(default_factory=list)


# ----------------------------------------------------------------- Haar

def haar(n, beta=1, seed=None, size=None):
    """Haar-distributed orthogonal (``beta = 1``) or unitary (``beta = 2``) matrices.

    QR of an iid Gaussian matrix, with the columns of ``Q`` rephased so that
    ``R`` has a positive diagonal.

    Parameters
    ----------
    n : int
    beta : {1, 2}
    seed : int, SeedSequence or Generator, optional
    size : int, optional
        Number of matrices; ``None`` returns a single ``(n, n)`` array.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if beta not in (1, 2):
        raise DomainError(f"haar supports beta 1 or 2, got {beta}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    shape = (n, n) if size is None else (size, n, n)
    G = rng.standard_normal(shape)
    if beta == 2:
        G = (G + 1j * rng.standard_normal(shape)) / math.sqrt(2)
    Q, R = np.linalg.qr(G)
    d = np.diagonal(R, axis1=-2, axis2=-1)
    ph = d / np.abs(d)
    return Q * ph[..., None, :]


# ----------------------------------------------------------------- radial chains

def radial_log_density(r, spec):
    """``-|r|^2 / 2 sigma^2 + beta sum_{i<j} log sinh(|r_i - r_j| / 2)`` (unnormalized)."""
    r = np.ascontiguousarray(r, dtype=float)
    return float(_kernels.log_density(r, 0.5 / spec.sigma ** 2, float(spec.beta), _kernels.SPD))


def _initial_state(spec, kind, rng):
    if kind == _kernels.SPD:
        r = np.sort(rng.standard_normal(spec.n) * math.sqrt(proposal_var(spec)))
    else:
        r = np.sort(np.abs(rng.standard_normal(spec.n)) * spec.sigma * (1 + 0.5 * spec.beta))
    # break exact ties, which have zero density
    return r + 1e-9 * np.arange(spec.n)


def _one_chain(spec, count, cfg, seed_seq, kind):
    rng = np.random.default_rng(seed_seq)
    n = spec.n
    thin = cfg.thinning if cfg.thinning is not None else 10 * n
    step = cfg.step if cfg.step is not None else spec.sigma / math.sqrt(n)
    r = _initial_state(spec, kind, rng)
    out = np.empty((count, n))
    total = cfg.burn_in + count * thin
    pos = 0
    accepted = 0
    done = 0
    inv2s2 = 0.5 / spec.sigma ** 2
    while done < total:
        k = min(_CHUNK, total - done)
        z = rng.standard_normal((k, n))
        u = rng.random((k, n))
        idx = np.arange(done, done + k)
        post = idx >= cfg.burn_in
        record = post & ((idx - cfg.burn_in + 1) % thin == 0)
        a, pos = _kernels.run_chunk(r, inv2s2, float(spec.beta), kind, step, z, u,
                                    record, out, pos, post)
        accepted += a
        done += k
    rate = accepted / (count * thin * n)
    notes = []
    if not 0.05 < rate < 0.95:
        notes.append(f"acceptance rate {rate:.3f} outside (0.05, 0.95); adjust step")
    return out, rate, notes


def _run_chains(spec, count, cfg, kind):
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    children = _seed_seq(cfg.seed).spawn(cfg.chains)
    base, extra = divmod(count, cfg.chains)
    counts = [base + (1 if i < extra else 0) for i in range(cfg.chains)]
    job = lambda i: _one_chain(spec, counts[i], cfg, children[i], kind)
    live = [i for i in range(cfg.chains) if counts[i] > 0]
    if cfg.threads > 1 and len(live) > 1:
        with ThreadPoolExecutor(cfg.threads) as ex:
            parts = list(ex.map(job, live))
    else:
        parts = [job(i) for i in live]
    samples = np.concatenate([p[0] for p in parts])
    rate = float(np.average([p[1] for p in parts], weights=[counts[i] for i in live]))
    notes = [f"chain {i}: {m}" for i, p in zip(live, parts) for m in p[2]]
    for m in notes:
        warnings.warn(m, RuntimeWarning, stacklevel=3)
    return RadialChain(samples, rate, notes)


def sample_radial(spec, count, cfg=ChainConfig()):
    """Metropolis samples of the radial density of the Riemannian Gaussian.

    Component-wise Gaussian random walk started from sorted draws of a Gaussian
    whose width matches the repulsion-broadened spread. Output is determined by
    ``cfg`` alone.

    Returns
    -------
    RadialChain
        ``samples`` has shape ``(count, n)``.
    """
    return _run_chains(spec, count, cfg, _kernels.SPD)


# ----------------------------------------------------------------- matrix samples

@dataclass(frozen=True)
class GaussianModel:
    """Riemannian Gaussian on SPD matrices with centre ``mean`` and dispersion ``sigma``."""

    mean: np.ndarray
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "mean", check_spd(self.mean, name="mean"))
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")

    @property
    def n(self):
        return self.mean.shape[-1]

    @property
    def beta(self):
        return infer_beta(self.mean)

    @property
    def spec(self):
        return EnsembleSpec(self.n, self.beta, self.sigma)


def _sqrtm(Y):
    w, V = np.linalg.eigh(Y)
    return (V * np.sqrt(w)[None, :]) @ adjoint(V)


def sample_gaussian_spd(model, count, cfg=ChainConfig()):
    """Draw ``Y = Ybar^{1/2} U e^{diag r} U† Ybar^{1/2}``.

    ``r`` comes from :func:`sample_radial` and ``U`` is Haar. The result is a
    :class:`FactoredSpd` with factor ``Ybar^{1/2} U`` and log-scale ``r``; call
    ``.dense()`` for explicit matrices.

    Returns
    -------
    (FactoredSpd, RadialChain)
    """
    ss = _seed_seq(cfg.seed)
    radial_ss, haar_ss = ss.spawn(2)
    chain = sample_radial(model.spec, count, _replace_seed(cfg, radial_ss))
    U = haar(model.n, model.beta, np.random.default_rng(haar_ss), size=count)
    factor = _sqrtm(model.mean) @ U
    return FactoredSpd(factor, chain.samples), chain


def _replace_seed(cfg, seed):
    from dataclasses import replace
    return replace(cfg, seed=seed)


def to_log_normal_ensemble(Y, sigma):
    """Rescale ``X = exp(n_beta sigma^2) Y`` (dense or factored).

    For ``Y`` Gaussian around the identity the eigenvalues of ``X`` follow the
    log-normal (Stieltjes-Wigert) ensemble.
    """
    if isinstance(Y, FactoredSpd):
        n, beta = Y.factor.shape[-1], Y.beta
        nb = 0.5 * beta * (n - 1) + 1
        return Y.scale(nb * sigma ** 2)
    Y = np.asarray(Y)
    n, beta = Y.shape[-1], infer_beta(Y)
    nb = 0.5 * beta * (n - 1) + 1
    return math.exp(nb * sigma ** 2) * Y

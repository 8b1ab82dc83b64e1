"""Reproduction harness: log z sweeps and dispersion-estimation tables.

Each table trial draws its own data from a seed derived from the master seed,
so a table is reproducible from ``(table, seed)`` and the trial results do not
depend on how many threads run them.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import partition
from .inference import fit_gaussian
from .partition import EnsembleSpec
from .sampler import ChainConfig, GaussianModel, sample_gaussian_spd


def logz_sweep(beta, n, sigmas, methods, mc_samples=1_000_000, seed=None):
    """Rows ``(beta, n, sigma, method, log_z, log_z / n^2, stderr)``."""
    rows = []
    for s in sigmas:
        spec = EnsembleSpec(n, beta, float(s))
        for meth in methods:
            kw = {}
            if meth == "monte_carlo":
                kw = dict(samples=mc_samples, seed=seed)
            res = partition.log_z(spec, meth, **kw)
            rows.append((beta, n, float(s), res.method, res.log_z, res.per_n2(n), res.stderr))
    return rows


@dataclass(frozen=True)
class TableSetup:
    beta: int
    n: int
    m: int
    method: str


TABLES = {
    1: TableSetup(beta=1, n=10, m=1000, method="trilog"),
    2: TableSetup(beta=1, n=10, m=1000, method="monte_carlo"),
    3: TableSetup(beta=1, n=20, m=10_000, method="trilog"),
}

DEFAULT_SIGMAS = (1, 2, 3, 4, 5, 6, 7)


@dataclass(frozen=True)
class TrialResult:
    true_sigma: float
    trial: int
    sigma_hat: float
    mean_sq_dist: float
    converged: bool
    acceptance: float


def run_trial(setup, sigma, seed, chain=None, phi_samples=200_000):
    """Sample ``m`` Gaussian matrices at the identity and fit them."""
    base = chain or ChainConfig()
    cfg = replace(base, seed=seed)
    model = GaussianModel(np.eye(setup.n) if setup.beta == 1 else np.eye(setup.n, dtype=complex),
                          float(sigma))
    data, ch = sample_gaussian_spd(model, setup.m, cfg)
    kw = {}
    if setup.method == "monte_carlo":
        # common random numbers across Newton iterations keep phi smooth in sigma
        phi_seed = np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key + (99,))
        kw = dict(samples=phi_samples, seed=phi_seed)
    rep = fit_gaussian(data, setup.method, **kw)
    return rep, ch.acceptance


def run_table(table, seed, sigmas: Sequence[float] = DEFAULT_SIGMAS, trials=20, m=None,
              threads=1, chain=None, phi_samples=200_000, setup=None):
    """Run a dispersion-estimation table.

    Parameters
    ----------
    table : {1, 2, 3}
        1 and 3 solve with the trilogarithm approximation (n = 10 and 20), 2
        with the Monte Carlo estimate of ``phi``.
    seed : int
        Master seed; trial ``k`` at the ``i``-th sigma uses child
        ``i * trials + k`` of ``SeedSequence(seed)``.
    m : int, optional
        Override the number of matrices per trial.

    Returns
    -------
    list of TrialResult, ordered by sigma then trial.
    """
    setup = setup or TABLES[table]
    if m is not None:
        setup = replace(setup, m=int(m))
    children = np.random.SeedSequence(seed).spawn(len(sigmas) * trials)
    jobs = [(s, k, children[i * trials + k]) for i, s in enumerate(sigmas) for k in range(trials)]

    def job(arg):
        s, k, ss = arg
        rep, acc = run_trial(setup, s, ss, chain, phi_samples)
        return TrialResult(float(s), k, rep.sigma_hat, rep.mean_sq_dist, rep.converged, acc)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(job, jobs))
    return [job(a) for a in jobs]


def summarize(results):
    """``{true_sigma: (mean, sd, n_converged)}`` over converged trials."""
    out = {}
    for s in sorted({r.true_sigma for r in results}):
        v = np.array([r.sigma_hat for r in results if r.true_sigma == s and r.converged])
        out[s] = (float(v.mean()) if v.size else float("nan"),
                  float(v.std(ddof=1)) if v.size > 1 else 0.0, int(v.size))
    return out

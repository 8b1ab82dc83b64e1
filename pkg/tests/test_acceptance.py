"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line in
the terminal summary. Criterion 6 is slow and is expected to fail (see the
project notes); it is run rather than skipped so the outcome stays visible.
"""

import csv
import math
import os
import time

import numpy as np
import pytest

from spdgauss import (EnsembleSpec, log_z_acosh_mc, log_z_acosh_n1, log_z_exact_beta2,
                      log_z_monte_carlo, log_z_pfaffian_beta1, log_z_trilog, mobius_to_origin,
                      phi_sigma, siegel_distance, spectral)
from spdgauss.cli import main
from spdgauss.experiments import run_table, summarize
from spdgauss.sampler import ChainConfig, sample_radial
from spdgauss.specfun import (phi_planar_corrected, phi_planar_corrected_deriv, phi_trilog,
                              phi_trilog_deriv)

from test_partition import direct_log_z_beta1
from test_siegel import random_siegel, x_space_log_z_n2

THREADS = max(1, min(8, os.cpu_count() or 1))


def read_rows(path):
    with open(path) as fh:
        fh.readline()
        return list(csv.DictReader(fh))


@pytest.mark.criterion(1)
def test_partition_beta2_monte_carlo(criterion):
    t0 = time.perf_counter()
    worst_z, worst_rel, bad = 0.0, 0.0, []
    for n in (2, 3, 4):
        for s in (0.3, 0.5, 1.0):
            spec = EnsembleSpec(n, 2, s)
            ref = log_z_exact_beta2(spec).log_z
            mc = log_z_monte_carlo(spec, 1_000_000, seed=1000 * n + int(10 * s), threads=THREADS)
            z = abs(mc.log_z - ref) / mc.stderr
            rel = abs(math.expm1(mc.log_z - ref))
            worst_z, worst_rel = max(worst_z, z), max(worst_rel, rel)
            if z > 3 or rel > 0.01:
                bad.append((n, s))
    dt = time.perf_counter() - t0
    criterion(not bad and dt < 60,
              f"max |dev|/stderr {worst_z:.2f}, max rel err {worst_rel:.1e}, {dt:.1f}s, bad {bad}")


@pytest.mark.criterion(2)
def test_partition_beta1_pfaffian(criterion):
    t0 = time.perf_counter()
    worst_z, worst_direct, bad = 0.0, 0.0, []
    for n in (2, 4):
        for s in (0.3, 0.5, 1.0):
            spec = EnsembleSpec(n, 1, s)
            pf = log_z_pfaffian_beta1(spec).log_z
            mc = log_z_monte_carlo(spec, 1_000_000, seed=2000 + 100 * n + int(10 * s),
                                   threads=THREADS)
            z = abs(mc.log_z - pf) / mc.stderr
            direct = abs(pf - direct_log_z_beta1(n, s, dps=60))
            worst_z, worst_direct = max(worst_z, z), max(worst_direct, direct)
            if z > 3 or direct > 1e-10:
                bad.append((n, s))
    big = log_z_pfaffian_beta1(EnsembleSpec(50, 1, 10.0)).log_z
    # the unscaled matrix has entries up to exp(N^2 sigma^2), far past double range
    overflow_regime = 50 ** 2 * 10.0 ** 2 > 709
    dt = time.perf_counter() - t0
    ok = not bad and math.isfinite(big) and overflow_regime and dt < 60
    criterion(ok, f"max |dev|/stderr {worst_z:.2f}, max |pf - direct| {worst_direct:.1e}, "
                  f"log z(50, 10) = {big:.6g}, {dt:.1f}s, bad {bad}")


@pytest.mark.criterion(3)
def test_exact_vs_trilog_gap_beta2(criterion, tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(["logz", "--beta", "2", "--n", "10", "--sigma", "0.5:10:0.5",
                 "--methods", "exact,trilog", "--out", str(out)])
    rows = read_rows(out)
    per = {}
    for r in rows:
        per.setdefault(float(r["sigma"]), {})[r["method"]] = float(r["log_z_over_n2"])
    sig = sorted(per)
    gap = np.array([per[s]["exact_beta2"] - per[s]["trilog"] for s in sig])
    e1, t1 = per[1.0]["exact_beta2"], per[1.0]["trilog"]
    # the signed gap changes sign near sigma = 3.6 and its size grows steadily past that
    size = np.abs(gap)
    tail = size[sig.index(4.0):]
    ok = (code == 0 and len(rows) == 40
          and abs(e1 - 1.6838) < 5e-5 and abs(t1 - 1.6787) < 5e-5
          and abs((e1 - t1) - 0.0051) <= 0.001
          and np.all(np.diff(tail) > 0) and size[-1] == size.max()
          and abs(size[-1] - 1.35) < 0.02)
    criterion(ok, f"sigma=1: {e1:.4f} vs {t1:.4f} (gap {e1 - t1:.4f}); "
                  f"|gap| at sigma=10: {size[-1]:.4f} per n^2")


@pytest.mark.criterion(4)
def test_beta1_sweep_stability(criterion, tmp_path):
    dev, ok = {}, True
    for n in (6, 12):
        f, g = tmp_path / f"z{n}.csv", tmp_path / f"p{n}.csv"
        ok &= main(["logz", "--beta", "1", "--n", str(n), "--sigma", "0.1:10:0.1",
                    "--methods", "pfaffian,trilog", "--out", str(f)]) == 0
        ok &= main(["phi", "--beta", "1", "--n", str(n), "--sigma", "0.1:10:0.1",
                    "--methods", "pfaffian,trilog", "--out", str(g)]) == 0
        z, p = read_rows(f), read_rows(g)
        ok &= len(z) == 200 and len(p) == 200
        ok &= all(math.isfinite(float(r["log_z"])) for r in z)
        for m in ("pfaffian_beta1", "trilog"):
            ph = np.array([float(r["phi"]) for r in p if r["method"] == m])
            ok &= bool(np.all(np.isfinite(ph)) and np.all(np.diff(ph) > 0))
        a = np.array([float(r["log_z_over_n2"]) for r in z if r["method"] == "pfaffian_beta1"])
        b = np.array([float(r["log_z_over_n2"]) for r in z if r["method"] == "trilog"])
        dev[n] = float(np.max(np.abs(a - b)))
    criterion(ok, "finite, phi increasing; max |pfaffian - trilog| per n^2: "
                  + ", ".join(f"N={n}: {v:.4f}" for n, v in dev.items()))


@pytest.mark.criterion(5)
def test_dispersion_fit_n10(criterion):
    t0 = time.perf_counter()
    res = run_table(1, seed=2024, sigmas=(1, 2), trials=20, threads=THREADS)
    summ = summarize(res)
    (m1, s1, c1), (m2, s2, c2) = summ[1.0], summ[2.0]
    dt = time.perf_counter() - t0
    ok = c1 == 20 and c2 == 20 and abs(m1 - 1.09) <= 0.03 and abs(m2 - 2.01) <= 0.05 and dt < 1800
    criterion(ok, f"sigma=1: {m1:.3f} +- {s1:.3f}, sigma=2: {m2:.3f} +- {s2:.3f} "
                  f"({c1 + c2}/40 converged, {dt:.0f}s)")


@pytest.mark.slow
@pytest.mark.criterion(6)
def test_dispersion_fit_n20(criterion):
    t0 = time.perf_counter()
    res = run_table(3, seed=2025, sigmas=(2,), trials=10, threads=THREADS)
    m, s, c = summarize(res)[2.0]
    dt = time.perf_counter() - t0
    criterion(c == 10 and abs(m - 1.51) <= 0.05,
              f"sigma=2, N=20, M=1e4: {m:.3f} +- {s:.3f} over {c} trials "
              f"vs 1.51 +- 0.05 ({dt:.0f}s)")


@pytest.mark.criterion(7)
def test_spectral(criterion):
    t0 = time.perf_counter()
    mass_err = max(abs(spectral.total_mass(spectral.density_params(x)) - 1)
                   for x in (0.5, 1, 2, 5))
    ab_err = max(abs(sd.a * sd.b - 1) for sd in map(spectral.density_params, (0.5, 1, 2, 5)))
    ks = {}
    for beta in (1, 2):
        spec = EnsembleSpec(100, beta, math.sqrt(1 / 100))
        chain = sample_radial(spec, 200, ChainConfig(seed=70 + beta, chains=THREADS,
                                                     threads=THREADS))
        ks[beta] = spectral.compare_empirical(chain.samples, spec)
    dt = time.perf_counter() - t0
    ok = mass_err <= 1e-6 and ab_err <= 1e-12 and max(ks.values()) < 0.05 and dt < 300
    criterion(ok, f"mass err {mass_err:.1e}, ab err {ab_err:.1e}, "
                  f"KS beta=1 {ks[1]:.4f}, beta=2 {ks[2]:.4f}, {dt:.0f}s")


@pytest.mark.criterion(8)
def test_siegel(criterion):
    t0 = time.perf_counter()
    z1 = {}
    for s in (0.25, 0.5, 1.0):
        r = log_z_acosh_mc(EnsembleSpec(1, 2, s), 1_000_000, seed=80)
        z1[s] = abs(r.log_z - log_z_acosh_n1(s)) / r.stderr
    z2 = {}
    for beta in (1, 2):
        r = log_z_acosh_mc(EnsembleSpec(2, beta, 0.5), 1_000_000, seed=81)
        z2[beta] = abs(r.log_z - x_space_log_z_n2(beta, 0.5)) / r.stderr
    rng = np.random.default_rng(88)
    worst_iso = worst_zero = 0.0
    for k in range(100):
        beta, n = 1 + k % 2, 1 + k % 4
        C, A, B = (random_siegel(rng, n, beta) for _ in range(3))
        psi = mobius_to_origin(C, beta)
        worst_zero = max(worst_zero, float(np.max(np.abs(psi(C)))))
        worst_iso = max(worst_iso, abs(siegel_distance(psi(A), psi(B)) - siegel_distance(A, B)))
    dt = time.perf_counter() - t0
    ok = max(z1.values()) < 3 and max(z2.values()) < 3 and worst_iso < 1e-9 \
        and worst_zero < 1e-9 and dt < 120
    criterion(ok, f"N=1 |dev|/stderr max {max(z1.values()):.2f}, N=2 {max(z2.values()):.2f}, "
                  f"isometry {worst_iso:.1e}, psi(center) {worst_zero:.1e}, {dt:.0f}s")


def richardson(f, x, h):
    d = lambda h: (f(x + h) - f(x - h)) / (2 * h)
    return (4 * d(h / 2) - d(h)) / 3


@pytest.mark.criterion(9)
def test_derivative_suite(criterion):
    rng = np.random.default_rng(90)
    worst = {}

    def check(name, analytic, f, x, h):
        ref = richardson(f, x, h)
        worst[name] = max(worst.get(name, 0.0), abs(analytic - ref) / abs(ref))

    for _ in range(20):
        xi = math.exp(rng.uniform(math.log(0.05), math.log(50)))
        check("phi_trilog_deriv", phi_trilog_deriv(xi), phi_trilog, xi, 1e-3 * xi)
        check("phi_planar_corrected_deriv", phi_planar_corrected_deriv(xi),
              phi_planar_corrected, xi, 1e-3 * xi)
        s = rng.uniform(0.1, 3.0)
        n = int(rng.integers(2, 13))
        # phi = sigma^3 d log z / d sigma, so phi / sigma^3 is compared with the difference quotient
        check("phi exact_beta2", phi_sigma(EnsembleSpec(n, 2, s), "exact_beta2") / s ** 3,
              lambda x: log_z_exact_beta2(EnsembleSpec(n, 2, x)).log_z, s, 1e-3 * s)
        ne = 2 * int(rng.integers(1, 7))
        check("phi pfaffian_beta1", phi_sigma(EnsembleSpec(ne, 1, s), "pfaffian_beta1") / s ** 3,
              lambda x: log_z_pfaffian_beta1(EnsembleSpec(ne, 1, x)).log_z, s, 1e-3 * s)
        beta = int(rng.choice([1, 2, 4]))
        for corrected, name in ((False, "trilog"), (True, "trilog_corrected")):
            check(f"phi {name}", phi_sigma(EnsembleSpec(n, beta, s), name) / s ** 3,
                  lambda x: log_z_trilog(EnsembleSpec(n, beta, x), corrected).log_z, s, 1e-3 * s)
    ok = max(worst.values()) < 1e-6
    criterion(ok, "max rel err " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


STOCHASTIC = [
    ["logz", "--beta", "2", "--n", "3", "--sigma", "0.3,0.6", "--methods", "exact,mc",
     "--mc-samples", "20000"],
    ["phi", "--beta", "1", "--n", "4", "--sigma", "0.5", "--methods", "mc",
     "--mc-samples", "20000"],
    ["sample", "--beta", "1", "--n", "3", "--sigma", "0.5", "--count", "20", "--burn-in", "500",
     "--radial", "--chains", "3", "--threads", "3"],
    ["experiment", "--table", "2", "--sigmas", "1", "--trials", "2", "--m", "30",
     "--burn-in", "300", "--mc-samples", "5000", "--threads", "2"],
    ["spectrum", "--beta", "2", "--n", "10", "--t", "1", "--count", "20", "--burn-in", "500",
     "--points", "51"],
    ["siegel-logz", "--beta", "2", "--n", "2", "--sigma", "0.5", "--samples", "5000"],
    ["siegel-sample", "--beta", "2", "--n", "2", "--sigma", "0.4", "--count", "10",
     "--burn-in", "200"],
]


@pytest.mark.criterion(10)
def test_determinism(criterion, tmp_path):
    bad = []
    for argv in STOCHASTIC:
        blobs = []
        for k in range(2):
            d = tmp_path / f"{argv[0]}-{k}"
            d.mkdir()
            code = main(argv + ["--seed", "42", "--out", str(d / "o")])
            files = sorted(p for p in d.iterdir() if not p.name.endswith(".manifest.json"))
            blobs.append((code, {p.name: p.read_bytes() for p in files}))
        if blobs[0] != blobs[1] or blobs[0][0] != 0 or not blobs[0][1]:
            bad.append(argv[0])
    criterion(not bad, f"{len(STOCHASTIC)} stochastic commands rerun byte-identical; "
                       f"differing: {bad}")

import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special

from spdgauss.errors import DomainError
from spdgauss.partition import (EnsembleSpec, erf_toeplitz, log_pf_erf_toeplitz, log_z,
                                log_z_exact_beta2, log_z_monte_carlo, log_z_pfaffian_beta1,
                                log_z_trilog, phi_monte_carlo, phi_sigma, vandermonde_offset)
from spdgauss.specfun import ZETA3, phi_trilog, polylog


def quad_log_z_n2(beta, sigma, two_sinh=True):
    # rotate to u = (x+y)/sqrt2, v = (x-y)/sqrt2; the u integral is Gaussian
    c = 2.0 if two_sinh else 1.0

    def f(v):
        return math.exp(-v * v / (2 * sigma ** 2)) * abs(c * math.sinh(v / math.sqrt(2))) ** beta

    L = 12 * sigma + 4 * beta * sigma ** 2
    val = 2 * integrate.quad(f, 0, L, epsabs=0, epsrel=1e-13, limit=200)[0]
    return math.log(math.sqrt(2 * math.pi) * sigma) + math.log(val) - math.log(2)


def direct_log_z_beta1(n, sigma, dps=None):
    # unscaled matrix M_ij = exp((i^2 + j^2) s^2 / 2) erf((j - i) s / 2); Pf via sqrt(det)
    if dps is not None:
        with mpmath.workdps(dps):
            s = mpmath.mpf(sigma)
            M = mpmath.matrix(n, n)
            for a in range(n):
                for b in range(n):
                    M[a, b] = mpmath.exp(((a + 1) ** 2 + (b + 1) ** 2) * s * s / 2) * \
                        mpmath.erf((b - a) * s / 2)
            return float(n * mpmath.log(2 * mpmath.pi * s * s) / 2 - n * (n + 1) ** 2 * s * s / 8
                         + mpmath.log(mpmath.det(M)) / 2)
    s2 = sigma ** 2
    i = np.arange(1, n + 1)
    M = np.exp((i[:, None] ** 2 + i[None, :] ** 2) * s2 / 2) * special.erf(
        (i[None, :] - i[:, None]) * sigma / 2)
    sign, logdet = np.linalg.slogdet(M)
    assert sign > 0
    return 0.5 * n * math.log(2 * math.pi * s2) - n * (n + 1) ** 2 * s2 / 8 + 0.5 * logdet


# ----------------------------------------------------------------- beta = 2

def test_exact_beta2_values():
    assert log_z_exact_beta2(EnsembleSpec(1, 2, 0.7)).log_z == pytest.approx(
        0.5 * math.log(2 * math.pi * 0.49), rel=1e-15)
    v = math.log(2 * math.pi) + 1 + math.log(1 - math.exp(-1))
    assert log_z_exact_beta2(EnsembleSpec(2, 2, 1.0)).log_z == pytest.approx(v, rel=1e-14)
    assert log_z_exact_beta2(EnsembleSpec(2, 2, 1.0)).log_z == pytest.approx(2.37920, abs=1e-5)
    assert log_z_exact_beta2(EnsembleSpec(10, 2, 1.0)).log_z == pytest.approx(168.383, abs=1e-3)


@pytest.mark.parametrize("sigma", [0.1, 0.3, 1.0, 2.5])
def test_exact_beta2_against_quadrature(sigma):
    assert log_z_exact_beta2(EnsembleSpec(2, 2, sigma)).log_z == pytest.approx(
        quad_log_z_n2(2, sigma), abs=1e-10)


def test_vandermonde_offset_against_quadrature():
    for beta in (1, 2, 4):
        a, b = quad_log_z_n2(beta, 0.6), quad_log_z_n2(beta, 0.6, two_sinh=False)
        assert a - b == pytest.approx(vandermonde_offset(EnsembleSpec(2, beta, 0.6)), abs=1e-10)


def test_exact_beta2_rejects_other_beta():
    with pytest.raises(DomainError):
        log_z_exact_beta2(EnsembleSpec(2, 1, 1.0))


# ----------------------------------------------------------------- beta = 1

def test_pfaffian_n2_closed_form():
    for s in (0.1, 0.5, 1.0, 3.0):
        cf = math.log(2 * math.pi * s * s) + s * s / 4 + math.log(math.erf(s / 2))
        assert log_z_pfaffian_beta1(EnsembleSpec(2, 1, s)).log_z == pytest.approx(cf, abs=1e-12)
    assert log_z_pfaffian_beta1(EnsembleSpec(2, 1, 0.5)).log_z == pytest.approx(-0.77209, abs=1e-5)


@pytest.mark.parametrize("sigma", [0.1, 0.5, 2.0])
def test_pfaffian_n2_against_quadrature(sigma):
    assert log_z_pfaffian_beta1(EnsembleSpec(2, 1, sigma)).log_z == pytest.approx(
        quad_log_z_n2(1, sigma), abs=1e-8)


@pytest.mark.parametrize("n,sigma", [(4, 0.5), (4, 1.0), (6, 0.7)])
def test_pfaffian_matches_direct_formula(n, sigma):
    assert log_z_pfaffian_beta1(EnsembleSpec(n, 1, sigma)).log_z == pytest.approx(
        direct_log_z_beta1(n, sigma), abs=1e-10)


@pytest.mark.parametrize("n,sigma", [(8, 0.4), (12, 0.2), (10, 3.0)])
def test_pfaffian_matches_direct_formula_extended_precision(n, sigma):
    # in double precision the unscaled determinant loses digits here
    assert log_z_pfaffian_beta1(EnsembleSpec(n, 1, sigma)).log_z == pytest.approx(
        direct_log_z_beta1(n, sigma, dps=500), abs=1e-11)


def test_pfaffian_direct_form_overflows_where_stable_form_does_not():
    with np.errstate(over="ignore", invalid="ignore"):
        i = np.arange(1, 51)
        M = np.exp((i[:, None] ** 2 + i[None, :] ** 2) * 100 / 2)
    assert not np.all(np.isfinite(M))
    v = log_z_pfaffian_beta1(EnsembleSpec(50, 1, 10.0)).log_z
    assert math.isfinite(v)
    # beyond the double-precision exponent range, yet representable in log form
    assert v > 709


def test_log_pf_erf_toeplitz_small_sigma():
    # oracle: mpmath determinant at 600 digits, log Pf = log det / 2
    lv, dps = log_pf_erf_toeplitz(50, 0.1)
    assert dps > 0
    assert lv.sign == 1
    assert lv.log_abs == pytest.approx(-1782.445974814335, abs=1e-9)


def test_log_pf_erf_toeplitz_mpmath_det_oracle():
    with mpmath.workdps(80):
        n, s = 10, 0.3
        A = mpmath.matrix(n, n)
        for a in range(n):
            for b in range(n):
                A[a, b] = mpmath.erf((b - a) * mpmath.mpf(s) / 2)
        ref = float(mpmath.log(mpmath.det(A)) / 2)
    assert log_pf_erf_toeplitz(n, s)[0].log_abs == pytest.approx(ref, abs=1e-9)


def test_erf_toeplitz_structure():
    A = erf_toeplitz(5, 0.8)
    np.testing.assert_allclose(A, -A.T)
    assert A[0, 3] == pytest.approx(math.erf(3 * 0.4))


def test_pfaffian_rejects_odd_n_and_wrong_beta():
    with pytest.raises(DomainError):
        log_z_pfaffian_beta1(EnsembleSpec(3, 1, 1.0))
    with pytest.raises(DomainError):
        log_z_pfaffian_beta1(EnsembleSpec(2, 2, 1.0))


# ----------------------------------------------------------------- planar limit

def test_trilog_values():
    assert log_z_trilog(EnsembleSpec(10, 2, 1.0)).log_z == pytest.approx(167.872, abs=1e-2)
    assert log_z_trilog(EnsembleSpec(10, 1, 1.0)).log_z == pytest.approx(44.057, abs=1e-2)
    ref = 2 * 100 * (20 / 6 + (ZETA3 - polylog(3, math.exp(-20))) / 400)
    assert log_z_trilog(EnsembleSpec(10, 4, 1.0)).log_z == pytest.approx(ref, rel=1e-14)
    assert log_z_trilog(EnsembleSpec(10, 4, 1.0)).log_z == pytest.approx(667.27, abs=1e-2)


@given(st.integers(1, 60), st.sampled_from([1, 2, 4]), st.floats(0.01, 10))
def test_trilog_scaling(n, beta, sigma):
    xi = 0.5 * beta * n * sigma ** 2
    v = log_z_trilog(EnsembleSpec(n, beta, sigma)).log_z
    assert v == pytest.approx(n * n * 0.5 * beta * phi_trilog(xi), rel=1e-13)


def test_corrected_trilog_approaches_exact_beta2():
    # at fixed t = n sigma^2 the per-n^2 gap decays like log(n) / n
    gaps = []
    for n in (40, 160, 640):
        spec = EnsembleSpec(n, 2, math.sqrt(2.0 / n))
        gaps.append(abs(log_z_exact_beta2(spec).log_z - log_z_trilog(spec, corrected=True).log_z)
                    / n ** 2)
    assert 3 < gaps[0] / gaps[1] < 5
    assert 3 < gaps[1] / gaps[2] < 5


# ----------------------------------------------------------------- Monte Carlo

def test_monte_carlo_n1_exact():
    r = log_z_monte_carlo(EnsembleSpec(1, 2, 0.8), seed=1)
    assert r.log_z == pytest.approx(0.5 * math.log(2 * math.pi * 0.64), rel=1e-15)
    assert r.stderr == 0.0


def test_monte_carlo_beta2_n3():
    spec = EnsembleSpec(3, 2, 0.5)
    r = log_z_monte_carlo(spec, samples=1_000_000, seed=11)
    assert abs(r.log_z - log_z_exact_beta2(spec).log_z) < 3 * r.stderr


def test_monte_carlo_beta4_n2():
    r = log_z_monte_carlo(EnsembleSpec(2, 4, 0.5), samples=1_000_000, seed=12)
    assert abs(r.log_z - quad_log_z_n2(4, 0.5)) < 3 * r.stderr


def test_monte_carlo_thread_invariance_and_determinism():
    spec = EnsembleSpec(4, 1, 0.5)
    a = log_z_monte_carlo(spec, samples=50_000, seed=5, threads=1)
    b = log_z_monte_carlo(spec, samples=50_000, seed=5, threads=4)
    c = log_z_monte_carlo(spec, samples=50_000, seed=6)
    assert a == b
    assert a.log_z != c.log_z


def test_monte_carlo_seed_sequence_is_not_consumed():
    ss = np.random.SeedSequence(7)
    spec = EnsembleSpec(3, 2, 1.0)
    assert log_z_monte_carlo(spec, 20_000, ss) == log_z_monte_carlo(spec, 20_000, ss)


def test_monte_carlo_rejects_tiny_sample():
    with pytest.raises(DomainError):
        log_z_monte_carlo(EnsembleSpec(2, 2, 1.0), samples=10)


# ----------------------------------------------------------------- phi(sigma)

def fd(f, s, h):
    return (f(s + h) - f(s - h)) / (2 * h)


def test_phi_n1():
    for s in (0.3, 1.0, 4.0):
        assert phi_sigma(EnsembleSpec(1, 2, s), "exact_beta2") == pytest.approx(s * s, rel=1e-15)


@pytest.mark.parametrize("n,s", [(10, 1.0), (2, 0.3), (5, 3.0), (30, 0.2)])
def test_phi_exact_beta2_finite_difference(n, s):
    f = lambda x: log_z_exact_beta2(EnsembleSpec(n, 2, x)).log_z
    assert phi_sigma(EnsembleSpec(n, 2, s), "exact_beta2") == pytest.approx(
        s ** 3 * fd(f, s, 1e-5 * s), rel=1e-6)


@pytest.mark.parametrize("method", ["trilog", "trilog_corrected"])
@pytest.mark.parametrize("beta,n,s", [(1, 20, 2.0), (2, 10, 1.0), (4, 6, 0.5), (1, 10, 0.05)])
def test_phi_trilog_finite_difference(method, beta, n, s):
    corrected = method == "trilog_corrected"
    f = lambda x: log_z_trilog(EnsembleSpec(n, beta, x), corrected).log_z
    assert phi_sigma(EnsembleSpec(n, beta, s), method) == pytest.approx(
        s ** 3 * fd(f, s, 1e-5 * s), rel=1e-6)


def test_phi_pfaffian_agrees_with_richardson():
    spec = EnsembleSpec(6, 1, 1.3)
    f = lambda x: log_z_pfaffian_beta1(EnsembleSpec(6, 1, x)).log_z
    h = 1e-3
    rich = (4 * fd(f, 1.3, h / 2) - fd(f, 1.3, h)) / 3
    assert phi_sigma(spec, "pfaffian_beta1") == pytest.approx(1.3 ** 3 * rich, rel=1e-7)


@pytest.mark.parametrize("spec,method", [(EnsembleSpec(4, 2, 1.0), "exact_beta2"),
                                         (EnsembleSpec(4, 1, 1.0), "pfaffian_beta1")])
def test_phi_monte_carlo(spec, method):
    est, se = phi_monte_carlo(spec, samples=400_000, seed=3)
    assert abs(est - phi_sigma(spec, method)) < 4 * se


def test_phi_monte_carlo_smooth_in_sigma():
    # common random numbers: nearby sigmas give nearby estimates
    a, _ = phi_monte_carlo(EnsembleSpec(6, 1, 1.0), samples=50_000, seed=4)
    b, _ = phi_monte_carlo(EnsembleSpec(6, 1, 1.0 + 1e-6), samples=50_000, seed=4)
    assert abs(a - b) / a < 1e-4


@given(st.floats(0.05, 8))
def test_phi_exact_beta2_increasing(s):
    f = lambda x: phi_sigma(EnsembleSpec(6, 2, x), "exact_beta2")
    assert f(s * 1.01) > f(s)


# ----------------------------------------------------------------- dispatcher

def test_log_z_auto_dispatch():
    assert log_z(EnsembleSpec(3, 2, 1.0)).method == "exact_beta2"
    assert log_z(EnsembleSpec(4, 1, 1.0)).method == "pfaffian_beta1"
    assert log_z(EnsembleSpec(4, 4, 1.0)).method == "trilog"
    with pytest.warns(RuntimeWarning):
        r = log_z(EnsembleSpec(3, 1, 1.0), samples=20_000, seed=1)
    assert r.method == "monte_carlo"
    with pytest.raises(DomainError):
        log_z(EnsembleSpec(2, 2, 1.0), "bogus")


def test_ensemble_spec_validation():
    with pytest.raises(DomainError):
        EnsembleSpec(0, 1, 1.0)
    with pytest.raises(DomainError):
        EnsembleSpec(2, 3, 1.0)
    with pytest.raises(DomainError):
        EnsembleSpec(2, 1, -1.0)
    s = EnsembleSpec(10, 1, 0.5)
    assert s.n_beta == 5.5 and s.t == pytest.approx(2.5)

import math

import numpy as np
import pytest
from scipy import special

from mimomgf import mgfcap
from mimomgf.channels import FullyCorrelated, Iid, NonzeroMean, SemiCorrelated, sample_channels, substream
from mimomgf.mgfcap import (OutageQuery, capacity_variance, ergodic_capacity, mgf, mgf_derivative_at_zero,
                            mgf_values, outage, outage_curve)

from oracles import (gamma_pdf, hypoexponential_pdf, mc_info, mgf_at_one, noncentral_pdf, quad_mean,
                     rand_pd)


def _eigs(a):
    return np.linalg.eigvalsh(a)


# exact value at z = 1 ------------------------------------------------------

@pytest.mark.parametrize("nt,nr", [(1, 1), (2, 2), (2, 3), (3, 2), (4, 1), (1, 4)])
def test_iid_mgf_at_one(nt, nr):
    ref = mgf_at_one(np.ones(nt), np.ones(nr))
    assert mgf(Iid(nt, nr), 1).value.real == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("nc,nb", [(2, 3), (3, 2), (3, 1), (2, 2), (4, 2)])
def test_semicorr_mgf_at_one(nc, nb):
    T = rand_pd(np.random.default_rng(nc * 10 + nb), nc)
    ref = mgf_at_one(_eigs(T), np.ones(nb))
    assert mgf(SemiCorrelated(T, nb), 1).value.real == pytest.approx(ref, rel=1e-9)
    assert mgf(SemiCorrelated(T, nb, "receive"), 1).value.real == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("nt,nr", [(2, 2), (3, 2), (2, 3), (4, 3), (3, 3)])
def test_fullcorr_mgf_at_one(nt, nr):
    rng = np.random.default_rng(100 + nt * 10 + nr)
    T, R = rand_pd(rng, nt), rand_pd(rng, nr)
    ref = mgf_at_one(_eigs(T), _eigs(R))
    assert mgf(FullyCorrelated(T, R), 1).value.real == pytest.approx(ref, rel=1e-9)


def test_fullcorr_mgf_at_two_integer_path():
    rng = np.random.default_rng(8)
    spec = FullyCorrelated(rand_pd(rng, 2), rand_pd(rng, 2))
    g = sample_channels(spec, 200_000, substream(1, 0))
    v = np.exp(2 * mc_info(g))
    se = v.std() / math.sqrt(len(v))
    assert abs(mgf(spec, 2).value.real - v.mean()) < 4 * se


# single-eigenvalue cases against scipy quadrature -------------------------

Z_POINTS = [0.5, -0.4, 1.7, 0.3 + 1.1j, -0.6 - 2.0j]


def _quad_mgf(pdf, z):
    re = quad_mean(pdf, lambda x: ((1 + x) ** z).real)
    im = quad_mean(pdf, lambda x: ((1 + x) ** z).imag)
    return re + 1j * im


@pytest.mark.parametrize("M", [1, 2, 4])
def test_iid_single_eigenvalue(M):
    got = mgf_values(Iid(1, M), Z_POINTS)
    ref = [_quad_mgf(gamma_pdf(M), z) for z in Z_POINTS]
    np.testing.assert_allclose(got, ref, rtol=1e-9)


def test_semicorr_single_receive_antenna():
    T = np.array([[1.0, 0.4, 0.1], [0.4, 2.0, 0.3], [0.1, 0.3, 0.7]])
    pdf = hypoexponential_pdf(_eigs(T))
    got = mgf_values(SemiCorrelated(T, 1), Z_POINTS)
    np.testing.assert_allclose(got, [_quad_mgf(pdf, z) for z in Z_POINTS], rtol=1e-8)


def test_semicorr_single_transmit_antenna():
    # T is 1x1 on the transmit side: lambda ~ T Gamma(nr)
    got = mgf_values(SemiCorrelated(np.array([[2.5]]), 3), Z_POINTS)
    np.testing.assert_allclose(got, [_quad_mgf(gamma_pdf(3, 2.5), z) for z in Z_POINTS], rtol=1e-9)


@pytest.mark.parametrize("g0", [[[0.0], [0.0]], [[1.0], [0.5j]], [[2.0], [0.0], [1.0]], [[0.3, 1.0 - 0.5j]]])
def test_nonzero_mean_single_eigenvalue(g0):
    g0 = np.array(g0, dtype=complex)
    M = max(g0.shape)
    pdf = noncentral_pdf(M, float(np.sum(np.abs(g0) ** 2)))
    got = mgf_values(NonzeroMean(g0), Z_POINTS)
    np.testing.assert_allclose(got, [_quad_mgf(pdf, z) for z in Z_POINTS], rtol=1e-8)


def test_rank_deficient_mean_with_extra_rows_matches_mc():
    # N = 2, M = 3, rank one mean
    g0 = np.outer([1.0, 0.5, 1.0], [0.3, 1.0])
    spec = NonzeroMean(g0)
    g = sample_channels(spec, 200_000, substream(3, 0))
    info = mc_info(g)
    for z in (0.5, -0.3 + 0.7j):
        v = np.exp(z * info)
        se = np.sqrt(np.mean(np.abs(v - v.mean()) ** 2) / len(v))
        assert abs(mgf(spec, z).value - v.mean()) < 4 * se
    assert abs(mgf(spec, 0).value - 1) < 1e-10


# structure -----------------------------------------------------------------

def test_normalization_across_variants():
    rng = np.random.default_rng(2)
    specs = [Iid(3, 5), SemiCorrelated(rand_pd(rng, 4), 2), FullyCorrelated(rand_pd(rng, 3), rand_pd(rng, 4)),
             NonzeroMean(rng.normal(size=(4, 2)))]
    for s in specs:
        assert abs(mgf(s, 0).value - 1) < 1e-10


def test_conjugate_symmetry():
    spec = FullyCorrelated(rand_pd(np.random.default_rng(1), 3), np.diag([1.0, 2.0]))
    a, b = mgf_values(spec, [0.4 + 0.9j, 0.4 - 0.9j])
    assert a == pytest.approx(np.conj(b), rel=1e-10)


def test_degenerate_correlation_matches_distinct_limit():
    T0 = np.diag([1.0, 1.0, 2.0])
    T1 = np.diag([1.0, 1.0 + 1e-7, 2.0])
    a = mgf_values(SemiCorrelated(T0, 2), [0.5, 1.0 + 1j])
    b = mgf_values(SemiCorrelated(T1, 2), [0.5, 1.0 + 1j])
    np.testing.assert_allclose(a, b, rtol=1e-6)


def test_mgf_domain():
    with pytest.raises(ValueError):
        mgf(Iid(2, 2), -1.5)


def test_evaluator_methods():
    assert mgfcap.evaluator(Iid(2, 2)).method == "iid"
    assert mgfcap.evaluator(SemiCorrelated(np.eye(2), 2)).method == "semicorr"
    assert mgfcap.evaluator(FullyCorrelated(np.eye(2), np.eye(2) * 2)).method == "fullcorr"
    assert mgfcap.evaluator(NonzeroMean(np.eye(2))).method == "rician"


# moments -------------------------------------------------------------------

@pytest.mark.parametrize("M", [1, 3])
def test_ergodic_single_eigenvalue(M):
    ref = quad_mean(gamma_pdf(M), math.log1p)
    assert ergodic_capacity(Iid(M, 1)) == pytest.approx(ref, rel=1e-10)
    ref2 = quad_mean(gamma_pdf(M), lambda x: math.log1p(x) ** 2)
    assert capacity_variance(Iid(M, 1)) == pytest.approx(ref2 - ref ** 2, rel=1e-6)


def test_nonzero_mean_ergodic_single():
    pdf = noncentral_pdf(2, 2.0)
    ref = quad_mean(pdf, math.log1p)
    assert ergodic_capacity(NonzeroMean(np.array([[1.0], [1.0]]))) == pytest.approx(ref, rel=1e-8)


def test_second_moment_error_report():
    val, err = mgf_derivative_at_zero(Iid(2, 2), 2, return_error=True)
    assert err < 1e-7
    with pytest.raises(ValueError):
        mgf_derivative_at_zero(Iid(2, 2), 3)


def test_variance_vs_mc():
    spec = FullyCorrelated(rand_pd(np.random.default_rng(5), 3), np.diag([0.5, 1.0, 1.5]))
    info = mc_info(sample_channels(spec, 100_000, substream(6, 0)))
    var = capacity_variance(spec)
    # standard error of the sample variance from the fourth central moment
    c = info - info.mean()
    se = math.sqrt((np.mean(c ** 4) - np.var(info) ** 2) / len(info))
    assert abs(var - np.var(info, ddof=1)) < 4 * se


# outage --------------------------------------------------------------------

def test_outage_single_eigenvalue_exact():
    # lambda ~ Gamma(4): P(I > x) = Q(4, e^x - 1)
    grid = np.array([0.0, 0.3, 1.0, 2.0, 3.5])
    res = outage_curve(Iid(1, 4), grid, max_panels=300)
    ref = special.gammaincc(4, np.expm1(grid))
    got = np.array([r.exceedance for r in res])
    np.testing.assert_allclose(got, ref, atol=1e-8)
    assert np.all(np.abs(got - ref) <= np.array([r.error for r in res]) + 1e-10)
    for r in res:
        assert r.exceedance + r.cdf == pytest.approx(1.0, abs=1e-14)


def test_outage_reports_nonconvergence_honestly():
    # nt = nr = 1: the density of I jumps at 0, so |g(iu)| decays like 1/u
    grid = np.array([0.0, 0.5, 1.5])
    res = outage_curve(Iid(1, 1), grid, max_panels=40)
    assert not any(r.converged for r in res)
    ref = special.gammaincc(1, np.expm1(grid))
    for r, e in zip(res, ref):
        assert abs(r.exceedance - e) <= r.error


def test_outage_query_conventions():
    q = OutageQuery(1.0, convention="exceedance", max_panels=300)
    r = outage(Iid(1, 4), q)
    assert r.value == r.exceedance
    assert outage(Iid(1, 4), OutageQuery(1.0, max_panels=300)).value == pytest.approx(1 - r.exceedance)
    with pytest.raises(ValueError):
        OutageQuery(-1.0)
    with pytest.raises(ValueError):
        OutageQuery(1.0, convention="pdf")


def test_outage_monotone():
    spec = SemiCorrelated(np.array([[1.0, 0.6], [0.6, 1.0]]), 2)
    res = outage_curve(spec, np.linspace(0.1, 5, 15), max_panels=120)
    ex = [r.exceedance for r in res]
    assert all(a >= b - 1e-9 for a, b in zip(ex, ex[1:]))

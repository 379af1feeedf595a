import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mimomgf.numkit import (ConfluentLayout, ConfluentRatioProblem, LineSet, NotHermitianError,
                            NotPositiveDefiniteError, Spectrum, asymptotic_ratio, confluent_ratio, det,
                            cancellation_digits, hermitian_eigenvalues, logdet, radius_candidates,
                            vandermonde)

from oracles import mp_ratio, plain_ratio, plain_vandermonde, richardson_cluster_ratio


# column families with closed-form Taylor coefficients ---------------------

def exp_family(a):
    funcs = [(lambda x, ai=ai: math.exp(ai * x)) for ai in a]

    def cols(x0, n):
        k = np.arange(n + 1)
        return np.array([ai ** k * math.exp(ai * x0) / np.array([math.factorial(j) for j in k]) for ai in a])
    return funcs, cols


def power_family(c):
    """(1 + x)^{c_i}."""
    funcs = [(lambda x, ci=ci: (1 + x) ** ci) for ci in c]

    def cols(x0, n):
        out = np.zeros((len(c), n + 1))
        for i, ci in enumerate(c):
            coef = 1.0
            for k in range(n + 1):
                out[i, k] = coef * (1 + x0) ** (ci - k)
                coef *= (ci - k) / (k + 1)
        return out
    return funcs, cols


def rational_family(a, M):
    """x^M / (x + a_i): grows like x^{M-1}, tail coefficients (-a_i)^k."""
    funcs = [(lambda x, ai=ai: x ** M / (x + ai)) for ai in a]

    def cols(x0, n):
        out = np.zeros((len(a), n + 1))
        for i, ai in enumerate(a):
            p = [math.comb(M, k) * x0 ** (M - k) if k <= M else 0.0 for k in range(n + 1)]
            q = [(-1) ** j / (x0 + ai) ** (j + 1) for j in range(n + 1)]
            out[i] = np.convolve(p, q)[:n + 1]
        return out

    def tail(p):
        return np.array([[(-ai) ** k for k in range(p)] for ai in a])
    return funcs, cols, tail


# (family, parameters, fixed nodes, cluster centre, multiplicity)
SUITE = [
    ("exp", [0.3, -0.5], [], 0.8, 2),
    ("exp", [0.3, -0.5, 1.1], [], 0.8, 3),
    ("exp", [0.2, 0.9, -0.4], [2.0], 0.5, 2),
    ("exp", [0.2, 0.9, -0.4, 0.6], [2.0], 0.5, 3),
    ("exp", [0.1, 0.5, -0.7, 1.2], [-1.0, 2.5], 0.3, 2),
    ("exp", [0.1, 0.5, -0.7, 1.2, 0.4], [-1.0, 2.5], 0.3, 3),
    ("exp", [0.25, -0.35, 0.8, 1.5, -1.0], [0.4, 1.9, 3.0], 1.0, 2),
    ("exp", [1.3, -0.2, 0.45], [], 2.5, 3),
    ("exp", [1.3, -0.2, 0.45, 0.05], [0.0], 2.5, 3),
    ("exp", [0.9, 0.1, -0.6, 0.35], [1.0, 1.6], 4.0, 2),
    ("pow", [1.5, 2.5], [], 1.0, 2),
    ("pow", [0.5, 1.5, 3.0], [], 0.7, 3),
    ("pow", [0.5, 1.5, 3.0], [2.0], 0.7, 2),
    ("pow", [-0.5, 1.2, 2.7, 4.1], [0.2], 1.5, 3),
    ("pow", [-0.5, 1.2, 2.7, 4.1], [0.2, 3.0], 1.5, 2),
    ("pow", [0.3, 1.7, 2.2, -1.4, 3.3], [0.5, 2.0], 1.1, 3),
    ("pow", [2.0, 3.5, 5.0], [], 3.0, 3),
    ("pow", [0.1, 0.2, 0.4, 0.8], [2.0], 0.9, 3),
    ("pow", [1.1, 2.3, 0.6, 1.9], [4.0, 6.0], 0.4, 2),
    ("pow", [0.75, -0.25, 2.25, 1.25, 3.75], [0.1, 2.2], 1.4, 3),
]


def _family(name, params):
    return exp_family(params) if name == "exp" else power_family(params)


@pytest.mark.parametrize("case", SUITE, ids=[f"{c[0]}-M{len(c[1])}-m{c[4]}" for c in SUITE])
def test_confluent_limit_matches_richardson(case):
    name, params, fixed, centre, mult = case
    funcs, cols = _family(name, params)
    got = confluent_ratio(ConfluentRatioProblem(cols, list(fixed) + [centre] * mult))
    ref = richardson_cluster_ratio(funcs, fixed, centre, mult)
    assert abs(got.imag) < 1e-12 * abs(got)
    assert got.real == pytest.approx(ref, rel=1e-6)


def test_suite_has_twenty_cases_with_triples():
    assert len(SUITE) == 20
    assert sum(c[4] == 3 for c in SUITE) >= 8


@pytest.mark.parametrize("spread", [0.03, 1e-3, 1e-6, 1e-10])
def test_close_nodes_continuous(spread):
    funcs, cols = power_family([0.5, 1.5, 3.0])
    nodes = [0.7 * (1 - spread), 0.7, 0.7 * (1 + spread)]
    got = confluent_ratio(ConfluentRatioProblem(cols, nodes)).real
    limit = confluent_ratio(ConfluentRatioProblem(cols, [0.7] * 3)).real
    if spread >= 1e-3:
        # the plain ratio is still accurate to ~1e-9 at these spreads
        assert got == pytest.approx(plain_ratio(funcs, nodes), rel=1e-7)
    assert got == pytest.approx(limit, rel=10 * spread ** 2 + 1e-12)


def test_distinct_nodes_equal_plain_ratio():
    funcs, cols = exp_family([0.3, -0.2, 0.9, 1.4])
    nodes = [0.1, 1.0, 2.2, 3.5]
    got = confluent_ratio(ConfluentRatioProblem(cols, nodes))
    assert got.real == pytest.approx(plain_ratio(funcs, nodes), rel=1e-12)


@pytest.mark.parametrize("p", [1, 2, 3])
@pytest.mark.parametrize("big", [1e6, 1e7])
def test_asymptotic_ratio_vs_direct(p, big):
    a = [0.3, 0.7, 1.1, 1.9]
    funcs, cols, tail = rational_family(a, 4)
    fin = [0.5, 1.2, 2.0][:4 - p]
    got = asymptotic_ratio(ConfluentRatioProblem(cols, fin), tail(p)).real
    # the double determinant loses everything once three nodes are huge
    direct = mp_ratio(funcs, fin + [big * (1 + k) for k in range(p)])
    assert direct == pytest.approx(got, rel=1e-4)


def test_asymptotic_ratio_with_finite_cluster():
    a = [0.3, 0.7, 1.1, 1.9]
    funcs, cols, tail = rational_family(a, 4)
    got = asymptotic_ratio(ConfluentRatioProblem(cols, [1.2, 1.2]), tail(2)).real
    big = 1e7

    def with_tail(fun_list, nodes):
        return plain_ratio(fun_list, list(nodes) + [big, 2 * big])
    # merge the finite pair by Richardson on the direct evaluation
    h = 0.02
    r = [with_tail(funcs, [1.2 - s / 2, 1.2 + s / 2]) for s in (h, h / 2, h / 4)]
    a1, a2 = (4 * r[1] - r[0]) / 3, (4 * r[2] - r[1]) / 3
    assert got == pytest.approx((16 * a2 - a1) / 15, rel=1e-4)


def test_asymptotic_without_tail_is_plain():
    funcs, cols, _ = rational_family([0.3, 0.7], 2)
    got = asymptotic_ratio(ConfluentRatioProblem(cols, [0.4, 1.5]), np.zeros((2, 0)))
    assert got.real == pytest.approx(plain_ratio(funcs, [0.4, 1.5]), rel=1e-12)


def test_complex_nodes():
    funcs, cols = exp_family([0.3, -0.5, 1.1])
    nodes = [0.2 + 0.1j, 0.9 - 0.4j, 1.5 + 0.3j]
    m = np.array([[math.e ** 0 * np.exp(a * x) for x in nodes] for a in [0.3, -0.5, 1.1]])
    ref = np.linalg.det(m) / plain_vandermonde(nodes)

    def ccols(x0, n):
        k = np.arange(n + 1)
        fact = np.array([math.factorial(j) for j in k], float)
        return np.array([a ** k * np.exp(a * x0) / fact for a in [0.3, -0.5, 1.1]])
    got = confluent_ratio(ConfluentRatioProblem(ccols, nodes))
    assert abs(got - ref) < 1e-12 * abs(ref)


def test_layout_shape_mismatch():
    with pytest.raises(ValueError):
        ConfluentLayout(LineSet((1.0, 2.0)), LineSet.fixed(3))


# dense primitives ---------------------------------------------------------

def test_vandermonde_convention():
    assert vandermonde([1.0, 2.0, 4.0]) == pytest.approx((2 - 1) * (4 - 1) * (4 - 2))
    assert vandermonde([]) == 1.0
    assert vandermonde([3.0]) == 1.0


def test_logdet_mixed_scales():
    a = np.diag([1e-200, 1e200, 3.0]) + 0j
    a[0, 1] = 1e-300
    ph, la = logdet(a)
    assert ph == pytest.approx(1.0)
    assert la == pytest.approx(math.log(3.0), abs=1e-12)


def test_logdet_stack_and_singular():
    rng = np.random.default_rng(4)
    a = rng.normal(size=(5, 3, 3))
    ph, la = logdet(a)
    ref = np.linalg.det(a)
    np.testing.assert_allclose(ph.real * np.exp(la), ref, rtol=1e-12)
    ph, la = logdet(np.zeros((2, 2)))
    assert ph == 0 and la == -np.inf


def test_det_rejects_nonsquare_and_nan():
    with pytest.raises(ValueError):
        det(np.ones((2, 3)))
    with pytest.raises(FloatingPointError):
        det(np.array([[np.nan, 1.0], [0.0, 1.0]]))


def test_hermitian_eigenvalues_errors():
    with pytest.raises(NotHermitianError):
        hermitian_eigenvalues(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(NotPositiveDefiniteError) as info:
        hermitian_eigenvalues(np.diag([2.0, -1.0]))
    assert info.value.index == 1


def test_spectrum_clusters():
    s = Spectrum(np.array([1.0, 2.0, 2.0 * (1 + 1e-12), 5.0]))
    assert s.clusters == [(5.0, 1), (2.0 * (1 + 1e-12), 2), (1.0, 1)]
    assert s.max_multiplicity == 2
    np.testing.assert_allclose(s.inverse().values, [1.0, 0.5, 0.5, 0.2], rtol=1e-11)


# properties ---------------------------------------------------------------

nodes_st = st.lists(st.floats(0.1, 5.0), min_size=2, max_size=4, unique=True)


@settings(max_examples=40, deadline=None)
@given(nodes_st)
def test_ratio_symmetric_under_permutation(nodes):
    _, cols = power_family([0.5, 1.5, 2.5, 3.5][:len(nodes)])
    a = confluent_ratio(ConfluentRatioProblem(cols, nodes))
    b = confluent_ratio(ConfluentRatioProblem(cols, nodes[::-1]))
    assert abs(a - b) <= 1e-9 * max(abs(a), 1e-300)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3.0, 3.0), min_size=1, max_size=6))
def test_vandermonde_matches_determinant(x):
    x = np.array(x)
    m = np.vander(x, increasing=True)
    assert vandermonde(x) == pytest.approx(np.linalg.det(m), rel=1e-8, abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 3.0), st.integers(2, 4))
def test_fully_merged_monomials_give_one(x0, m):
    """det[x_j^{i-1}] / Delta(x) = 1 for any nodes, merged or not."""
    def cols(c, n):
        out = np.zeros((m, n + 1))
        for i in range(m):
            for k in range(min(i, n) + 1):
                out[i, k] = math.comb(i, k) * c ** (i - k)
        return out
    assert confluent_ratio(ConfluentRatioProblem(cols, [x0] * m)) == pytest.approx(1.0, rel=1e-10)


def test_radius_candidates():
    # well separated nodes: nothing to widen
    assert radius_candidates([0.5, 1.0, 2.0, 4.0]) == [0.05]
    assert cancellation_digits([0.5, 1.0, 2.0, 4.0]) < 2
    # six nodes spread over [0.72, 1.41] cancel across clusters
    nodes = [0.719, 0.778, 0.882, 1.036, 1.228, 1.408]
    assert cancellation_digits(nodes) > 2
    cands = radius_candidates(nodes)
    assert cands[0] == 0.05 and len(cands) > 1
    assert cands == sorted(cands)
    # a single cluster has no cross-cluster pairs: the floor log10(n)
    assert cancellation_digits(nodes, radius=0.9) == pytest.approx(math.log10(6))

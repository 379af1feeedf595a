import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mimomgf.channels import substream
from mimomgf.groupcheck import (Representation, cauchy_binet_residual, character_coefficient, dimension,
                                dimension_vandermonde, expansion_residual, haar_orthogonality_residual,
                                haar_unitaries, representation_matrices, representations, weyl_character)


def hook_content_dimension(m, M):
    """Textbook hook-content formula: prod (M + c) / h over the boxes."""
    lam = [v for v in m if v > 0]
    conj = [sum(1 for v in lam if v > c) for c in range(lam[0])] if lam else []
    num = den = 1
    for r, row in enumerate(lam):
        for c in range(row):
            num *= M + c - r
            den *= (row - c - 1) + (conj[c] - r - 1) + 1
    return num // den


def test_representation_validation():
    with pytest.raises(ValueError):
        Representation((1, 2))
    with pytest.raises(ValueError):
        Representation((1, -1))
    with pytest.raises(ValueError):
        Representation(())
    r = Representation((3, 1, 0))
    assert r.k == (5, 2, 0)
    assert r.degree == 4


def test_representations_enumeration():
    reps = list(representations(3, 2))
    assert len(reps) == math.comb(5, 3)
    assert all(r.m[0] <= 2 for r in reps)


@pytest.mark.parametrize("M", [1, 2, 3, 4])
def test_dimension_formulas_agree(M):
    for rep in representations(M, 6):
        d = dimension(rep)
        assert d == dimension_vandermonde(rep)
        assert d == hook_content_dimension(rep.m, M)


def test_known_dimensions():
    assert dimension(Representation((1, 0, 0))) == 3
    assert dimension(Representation((1, 1, 0))) == 3
    assert dimension(Representation((2, 0, 0))) == 6
    assert dimension(Representation((2, 1, 0))) == 8
    assert dimension(Representation((0, 0))) == 1


def test_weyl_character_small_cases():
    a = np.array([0.7, 1.9, -0.4 + 0.3j])
    e1, e2 = a.sum(), a[0] * a[1] + a[0] * a[2] + a[1] * a[2]
    h2 = sum(a[i] * a[j] for i in range(3) for j in range(i, 3))
    assert weyl_character(Representation((0, 0, 0)), a) == pytest.approx(1.0)
    assert weyl_character(Representation((1, 0, 0)), a) == pytest.approx(e1, rel=1e-12)
    assert weyl_character(Representation((1, 1, 0)), a) == pytest.approx(e2, rel=1e-12)
    assert weyl_character(Representation((2, 0, 0)), a) == pytest.approx(h2, rel=1e-12)
    assert weyl_character(Representation((1, 1, 1)), a) == pytest.approx(np.prod(a), rel=1e-12)


def test_weyl_character_at_identity_is_dimension():
    for rep in representations(3, 4):
        assert weyl_character(rep, np.ones(3)).real == pytest.approx(dimension(rep), rel=1e-9)


@pytest.mark.parametrize("m", [(1, 0), (2, 1), (2, 0, 0), (2, 1, 0), (1, 1, 0), (3, 1)])
def test_weyl_character_vs_explicit_trace(m):
    rep = Representation(m)
    U = haar_unitaries(rep.M, 3, substream(0, 0))
    rho = representation_matrices(rep, U)
    assert rho.shape[1] == dimension(rep)
    for u, r in zip(U, rho):
        np.testing.assert_allclose(r @ r.conj().T, np.eye(len(r)), atol=1e-10)
        assert np.trace(r) == pytest.approx(weyl_character(rep, np.linalg.eigvals(u)), abs=1e-9)


def test_representation_is_homomorphism():
    rep = Representation((2, 1, 0))
    U = haar_unitaries(3, 2, substream(1, 0))
    a, b = representation_matrices(rep, U)
    ab = representation_matrices(rep, U[0] @ U[1])[0]
    np.testing.assert_allclose(ab, a @ b, atol=1e-10)


def test_character_coefficient():
    # M = 1: alpha_m(x) = x^m / m!
    assert character_coefficient(Representation((3,)), 0.5) == pytest.approx(0.5 ** 3 / 6)


@settings(max_examples=10, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_expansion_residual_m2(a, b, c):
    # diagonally dominant, so the eigenvalues stay away from zero
    A = np.array([[1.0 + abs(a), 0.5 * b], [0.5 * c, -1.5 - abs(a)]])
    assert expansion_residual(A, 0.1, 8) < 1e-8


def test_expansion_residual_shrinks_with_cutoff():
    A = np.array([[0.5, 1.0, 0.0], [0.2, -0.3, 0.4], [0.0, 0.1, 1.0]])
    r = [expansion_residual(A, 0.8, c) for c in (2, 4, 8)]
    assert r[0] > r[1] > r[2]
    assert r[2] < 1e-5


@pytest.mark.parametrize("weight", ["exp", "exp_neg", "bessel"])
def test_cauchy_binet(weight):
    assert cauchy_binet_residual([0.3, 1.2], [0.5, 0.9], weight, 25) < 1e-8
    assert cauchy_binet_residual([0.3, 1.2, 0.7], [0.5, 0.9, 0.2], weight, 20) < 1e-8


def test_haar_unitaries():
    U = haar_unitaries(3, 20_000, substream(2, 0))
    np.testing.assert_allclose(U[5] @ U[5].conj().T, np.eye(3), atol=1e-12)
    # E|U_11|^2 = 1/M, E|U_11|^4 = 2/(M(M+1))
    p = np.abs(U[:, 0, 0]) ** 2
    assert p.mean() == pytest.approx(1 / 3, abs=0.01)
    assert (p ** 2).mean() == pytest.approx(2 / 12, abs=0.01)
    assert abs(np.mean(np.trace(U, axis1=1, axis2=2))) < 0.02


@pytest.mark.parametrize("a,b", [((1, 0), (1, 0)), ((2, 0), (1, 1)), ((2, 1, 0), (2, 1, 0)), ((1, 0, 0), (2, 0, 0))])
def test_haar_orthogonality(a, b):
    res = haar_orthogonality_residual(Representation(a), Representation(b), 20_000, seed=3)
    assert res.max_z < 5.0
    assert res.residual < 0.05


def test_haar_orthogonality_group_mismatch():
    with pytest.raises(ValueError):
        haar_orthogonality_residual(Representation((1, 0)), Representation((1, 0, 0)), 100, 0)

"""Numeric checks of the U(M) representation machinery at small M.

Irreducible representations are labelled by nonincreasing m; dimensions
come out as exact integers, characters go through the confluent engine so
degenerate spectra work, and explicit representation matrices (the image
of a Young symmetrizer in the tensor power) provide an independent oracle
for characters and for the Haar orthogonality relation.

Vandermonde convention throughout: Delta(x) = prod_{i>j} (x_i - x_j)
= det[x_i^{j-1}].
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .channels import complex_gaussian, substream
from .numkit import ConfluentRatioProblem, confluent_ratio
from .specfun import bessel_i0

__all__ = [
    "Representation",
    "representations",
    "dimension",
    "dimension_vandermonde",
    "weyl_character",
    "character_coefficient",
    "expansion_residual",
    "cauchy_binet_residual",
    "haar_unitaries",
    "representation_matrices",
    "HaarResidual",
    "haar_orthogonality_residual",
]


@dataclass(frozen=True)
class Representation:
    """Irrep of U(M) with highest weight m (nonincreasing, nonnegative)."""

    m: tuple

    def __post_init__(self):
        m = tuple(int(v) for v in self.m)
        if not m:
            raise ValueError("m must have at least one entry")
        if m[-1] < 0 or any(a < b for a, b in zip(m, m[1:])):
            raise ValueError(f"m must be nonincreasing and nonnegative, got {m}")
        object.__setattr__(self, "m", m)

    @property
    def M(self) -> int:
        return len(self.m)

    @property
    def k(self) -> tuple:
        """Shifted labels k_i = m_i - i + M (strictly decreasing)."""
        M = self.M
        return tuple(mi - i + M for i, mi in enumerate(self.m, start=1))

    @property
    def degree(self) -> int:
        return sum(self.m)


def representations(M: int, cutoff: int):
    """All irreps of U(M) with m_1 <= cutoff, in colexicographic order."""
    for c in itertools.combinations_with_replacement(range(cutoff + 1), M):
        yield Representation(tuple(reversed(c)))


def _fraction_det(a):
    a = [list(row) for row in a]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] / a[c][c]
            if f:
                for j in range(c, n):
                    a[r][j] -= f * a[c][j]
    return det


def dimension(rep: Representation) -> int:
    """d_m from the inverse-factorial determinant, in exact arithmetic."""
    M, m = rep.M, rep.m
    pref = Fraction(1)
    for i in range(1, M + 1):
        pref *= Fraction(math.factorial(M + m[i - 1] - i), math.factorial(M - i))
    mat = [[Fraction(1, math.factorial(m[i - 1] - i + j)) if m[i - 1] - i + j >= 0 else Fraction(0)
            for j in range(1, M + 1)] for i in range(1, M + 1)]
    d = pref * _fraction_det(mat)
    if d.denominator != 1:
        raise ArithmeticError(f"non-integer dimension {d} for {m}")
    return int(d)


def dimension_vandermonde(rep: Representation) -> int:
    """d_m = (-1)^{M(M-1)/2} Delta(k) / prod (M-i)!, exact."""
    M, k = rep.M, rep.k
    vdm = 1
    for i in range(M):
        for j in range(i):
            vdm *= k[i] - k[j]
    den = 1
    for i in range(1, M + 1):
        den *= math.factorial(M - i)
    num = (-1) ** (M * (M - 1) // 2) * vdm
    if num % den:
        raise ArithmeticError(f"non-integer dimension {num}/{den} for {rep.m}")
    return num // den


def weyl_character(rep: Representation, eigs) -> complex:
    """chi_m(A) = det[a_i^{m_j+M-j}] / det[a_i^{M-j}] from the eigenvalues of A.

    Written over the ascending Vandermonde this carries (-1)^{M(M-1)/2}.
    Coincident eigenvalues are resolved by the confluent engine.
    """
    a = np.asarray(eigs, dtype=complex)
    if a.shape != (rep.M,):
        raise ValueError(f"need {rep.M} eigenvalues")
    if np.any(a == 0):
        raise ValueError("eigenvalues must be nonzero")
    e = np.array([mj + rep.M - j for j, mj in enumerate(rep.m, start=1)])
    if np.all(a.imag == 0):
        a = a.real

    def columns(x, n):
        ks = np.arange(n + 1)
        out = np.zeros((rep.M, n + 1), dtype=complex)
        for i, ei in enumerate(e):
            ok = ks <= ei
            out[i, ok] = [math.comb(int(ei), int(kk)) * x ** (int(ei) - int(kk)) for kk in ks[ok]]
        return out

    val = confluent_ratio(ConfluentRatioProblem(columns, tuple(a)))
    return -val if (rep.M * (rep.M - 1) // 2) % 2 else val


def character_coefficient(rep: Representation, x) -> complex:
    """alpha_m(x) = x^{sum m} prod (M-i)!/(M+m_i-i)! d_m."""
    M = rep.M
    r = Fraction(dimension(rep))
    for i in range(1, M + 1):
        r *= Fraction(math.factorial(M - i), math.factorial(M + rep.m[i - 1] - i))
    return complex(x) ** rep.degree * float(r)


def expansion_residual(A, x, cutoff: int) -> float:
    """|exp(x tr A) - sum_{m_1 <= cutoff} alpha_m(x) chi_m(A)|."""
    A = np.asarray(A, dtype=complex)
    eigs = np.linalg.eigvals(A)
    total = 0j
    for rep in representations(A.shape[0], cutoff):
        c = character_coefficient(rep, x)
        if c != 0:
            total += c * weyl_character(rep, eigs)
    return abs(np.exp(complex(x) * np.trace(A)) - total)


_WEIGHTS = {
    "exp": (lambda k: 1.0 / math.factorial(k), np.exp),
    "exp_neg": (lambda k: (-1.0) ** k / math.factorial(k), lambda v: np.exp(-v)),
    "bessel": (lambda k: 1.0 / math.factorial(k) ** 2, np.vectorize(lambda v: bessel_i0(2.0 * math.sqrt(v)))),
}


def cauchy_binet_residual(a, b, weight: str = "exp", cutoff: int = 25) -> float:
    """|sum_{k_1>...>k_M>=0, k_1<=cutoff} det[a_i^{k_j}] det[b_i^{k_j}] prod w(k_i) - det[W(a_i b_j)]|.

    ``weight`` is ``"exp"`` (w = 1/k!), ``"exp_neg"`` (w = (-1)^k/k!,
    W(x) = e^{-x}) or ``"bessel"`` (w = 1/k!^2, W(x) = I_0(2 sqrt x)).
    """
    w, W = _WEIGHTS[weight]
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    M = len(a)
    total = 0.0
    for ks in itertools.combinations(range(cutoff, -1, -1), M):
        ks = np.array(ks)
        da = np.linalg.det(a[:, None] ** ks[None, :])
        db = np.linalg.det(b[:, None] ** ks[None, :])
        total += da * db * math.prod(w(int(k)) for k in ks)
    exact = np.linalg.det(W(np.outer(a, b)))
    return float(abs(total - exact))


# --------------------------------------------------------------------------
# explicit representations and Haar sampling
# --------------------------------------------------------------------------

def haar_unitaries(M: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` Haar-distributed M x M unitaries, shape (n, M, M).

    QR of a complex Gaussian matrix with the phases of diag(R) moved into Q.
    """
    z = complex_gaussian(rng, (n, M, M))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (d / np.abs(d))[:, None, :]


def _permutation_operator(perm, M, n):
    """Matrix of v_1 x ... x v_n -> v_{perm^{-1}(1)} x ... on (C^M)^{x n}."""
    dim = M ** n
    idx = np.arange(dim).reshape((M,) * n)
    moved = np.transpose(idx, perm).ravel()
    P = np.zeros((dim, dim))
    P[moved, np.arange(dim)] = 1.0
    return P


def _sign(perm):
    s, seen = 1, set()
    for i in range(len(perm)):
        if i in seen:
            continue
        j, L = i, 0
        while j not in seen:
            seen.add(j)
            j = perm[j]
            L += 1
        s *= (-1) ** (L - 1)
    return s


def _group(blocks, n):
    """All permutations of range(n) preserving each block setwise."""
    out = []
    for parts in itertools.product(*[itertools.permutations(b) for b in blocks]):
        perm = list(range(n))
        for b, p in zip(blocks, parts):
            for src, dst in zip(b, p):
                perm[src] = dst
        out.append(tuple(perm))
    return out


@lru_cache(maxsize=None)
def _young_basis(m: tuple) -> np.ndarray:
    """Orthonormal basis of the image of a Young symmetrizer for shape m."""
    M = len(m)
    lam = [v for v in m if v > 0]
    n = sum(lam)
    if n == 0:
        return np.ones((1, 1))
    # fill the diagram row by row
    boxes, pos = [], 0
    for r in lam:
        boxes.append(list(range(pos, pos + r)))
        pos += r
    cols = [[boxes[r][c] for r in range(len(lam)) if c < lam[r]] for c in range(lam[0])]
    sym = sum(_permutation_operator(p, M, n) for p in _group(boxes, n))
    anti = sum(_sign(p) * _permutation_operator(p, M, n) for p in _group(cols, n))
    c = anti @ sym
    u, s, _ = np.linalg.svd(c)
    rank = int(np.sum(s > 1e-9 * s[0]))
    return u[:, :rank]


def representation_matrices(rep: Representation, U) -> np.ndarray:
    """rho_m(U) for a stack of unitaries, shape (n, d_m, d_m).

    The restriction of U^{x k} to an invariant subspace with orthonormal
    basis Q, so rho(U) = Q^H U^{x k} Q is unitary.  Practical for k <= 6.
    """
    U = np.asarray(U, dtype=complex)
    if U.ndim == 2:
        U = U[None]
    M = rep.M
    Q = _young_basis(rep.m)
    n = rep.degree
    d = Q.shape[1]
    if n == 0:
        return np.ones((len(U), 1, 1), dtype=complex)
    t = np.broadcast_to(Q.reshape((M,) * n + (d,)), (len(U),) + (M,) * n + (d,)).astype(complex)
    for ax in range(n):
        t = _apply_axis(U, t, ax + 1)
    t = t.reshape(len(U), M ** n, d)
    return np.einsum("ai,bak->bik", Q.conj(), t)


def _apply_axis(U, t, axis):
    t = np.moveaxis(t, axis, -1)
    t = np.einsum("b...j,bij->b...i", t, U)
    return np.moveaxis(t, -1, axis)


@dataclass(frozen=True)
class HaarResidual:
    """Largest deviation of the Monte Carlo Haar average from the
    orthogonality relation, with its standard error and the largest
    deviation in standard errors over all entries."""

    residual: float
    stderr: float
    max_z: float
    samples: int


def haar_orthogonality_residual(rep_a: Representation, rep_b: Representation, samples: int,
                                seed: int, chunk: int = 4096) -> HaarResidual:
    """Monte Carlo check of int U^(a)_ij conj(U^(b)_kl) dU = delta_ab delta_ik delta_jl / d_a."""
    if rep_a.M != rep_b.M:
        raise ValueError("representations of different groups")
    M = rep_a.M
    same = rep_a.m == rep_b.m
    da, db = _young_basis(rep_a.m).shape[1], _young_basis(rep_b.m).shape[1]
    s1 = np.zeros((da, da, db, db), dtype=complex)
    s2 = np.zeros((da, da, db, db))
    done, block = 0, 0
    while done < samples:
        n = min(chunk, samples - done)
        U = haar_unitaries(M, n, substream(seed, block))
        ra = representation_matrices(rep_a, U)
        rb = representation_matrices(rep_b, U)
        prod = ra[:, :, :, None, None] * rb.conj()[:, None, None, :, :]
        s1 += prod.sum(axis=0)
        s2 += (np.abs(prod) ** 2).sum(axis=0)
        done += n
        block += 1
    mean = s1 / samples
    var = np.maximum(s2 / samples - np.abs(mean) ** 2, 0.0) * samples / (samples - 1)
    se = np.sqrt(var / samples)
    target = np.zeros_like(mean)
    if same:
        for i in range(da):
            for j in range(da):
                target[i, j, i, j] = 1.0 / da
    dev = np.abs(mean - target)
    worst = np.unravel_index(np.argmax(dev), dev.shape)
    # entries with no sampling spread (|det U| = 1, say) are judged against rounding
    z = dev / np.maximum(se, 1e-12)
    return HaarResidual(float(dev[worst]), float(se[worst]), float(np.max(z)), samples)

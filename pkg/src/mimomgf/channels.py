"""Channel ensembles, the angle-spread correlation model and channel sampling.

Orientation: G is nr x nt, T (nt x nt) correlates the transmit side and R
(nr x nr) the receive side.  Draws are

    Iid             W
    SemiCorrelated  W T^{1/2}        (or R^{1/2} W with side="receive")
    NonzeroMean     G0 + W
    FullyCorrelated R^{1/2} W T^{1/2}

with W having i.i.d. unit-variance circular complex Gaussian entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .numkit import Spectrum, hermitian_eigenvalues, DEFAULT_MERGE_TOL

__all__ = [
    "Iid",
    "SemiCorrelated",
    "NonzeroMean",
    "FullyCorrelated",
    "ChannelSpec",
    "ArrayGeometry",
    "correlation_matrix",
    "inv_eigs",
    "mean_eigenvalues",
    "sqrtm_psd",
    "complex_gaussian",
    "sample_channel",
    "sample_channels",
    "substream",
]


def _hermitian_pd(a, name):
    a = np.array(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix")
    # raises on non-Hermitian or non-PD input
    hermitian_eigenvalues(a)
    a = 0.5 * (a + a.conj().T)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Iid:
    nt: int
    nr: int

    def __post_init__(self):
        if self.nt < 1 or self.nr < 1:
            raise ValueError("antenna counts must be positive")

    tag = "iid"


@dataclass(frozen=True)
class SemiCorrelated:
    """One-sided correlation.  ``T`` is nt x nt for ``side="transmit"``;
    with ``side="receive"`` the matrix correlates the nr receive antennas
    and ``n_other`` is nt."""

    T: np.ndarray
    n_other: int
    side: str = "transmit"

    def __post_init__(self):
        object.__setattr__(self, "T", _hermitian_pd(self.T, "T"))
        if self.n_other < 1:
            raise ValueError("antenna counts must be positive")
        if self.side not in ("transmit", "receive"):
            raise ValueError("side must be 'transmit' or 'receive'")

    tag = "semicorr"

    @property
    def nt(self):
        return self.T.shape[0] if self.side == "transmit" else self.n_other

    @property
    def nr(self):
        return self.n_other if self.side == "transmit" else self.T.shape[0]


@dataclass(frozen=True)
class NonzeroMean:
    G0: np.ndarray

    def __post_init__(self):
        g = np.array(self.G0, dtype=complex)
        if g.ndim != 2:
            raise ValueError("G0 must be a matrix")
        g.setflags(write=False)
        object.__setattr__(self, "G0", g)

    tag = "rician"

    @property
    def nt(self):
        return self.G0.shape[1]

    @property
    def nr(self):
        return self.G0.shape[0]


@dataclass(frozen=True)
class FullyCorrelated:
    T: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "T", _hermitian_pd(self.T, "T"))
        object.__setattr__(self, "R", _hermitian_pd(self.R, "R"))

    tag = "fullcorr"

    @property
    def nt(self):
        return self.T.shape[0]

    @property
    def nr(self):
        return self.R.shape[0]


ChannelSpec = Union[Iid, SemiCorrelated, NonzeroMean, FullyCorrelated]


def dims(spec) -> tuple[int, int]:
    """(M, N) = (max, min) of the antenna counts."""
    return max(spec.nt, spec.nr), min(spec.nt, spec.nr)


# --------------------------------------------------------------------------
# correlation model
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array with a Gaussian power azimuth spectrum.

    Attributes
    ----------
    antenna_count : int
    d_lambda : float
        Neighbour spacing in wavelengths.
    delta : float
        Angle spread in degrees.
    """

    antenna_count: int
    d_lambda: float
    delta: float

    def __post_init__(self):
        if self.antenna_count < 1:
            raise ValueError("antenna_count must be at least 1")
        if self.d_lambda < 0:
            raise ValueError("d_lambda must be nonnegative")
        if not self.delta > 0:
            raise ValueError("delta must be positive")


def _simpson(y, h):
    return h / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum())


def _lag_integral(lag, d_lambda, delta, tol=1e-13):
    n = 2001
    prev = None
    for _ in range(8):
        phi = np.linspace(-180.0, 180.0, n)
        y = np.exp(2j * np.pi * lag * d_lambda * np.sin(phi * np.pi / 180) - phi ** 2 / (2 * delta ** 2))
        val = _simpson(y, phi[1] - phi[0]) / math.sqrt(2 * math.pi * delta ** 2)
        if prev is not None and abs(val - prev) <= tol:
            return val
        prev = val
        n = 2 * n - 1
    raise ArithmeticError(f"angle-spread integral did not converge for lag {lag}")


def correlation_matrix(geom: ArrayGeometry) -> np.ndarray:
    """Correlation matrix T_ab of the array, a Hermitian Toeplitz matrix."""
    n = geom.antenna_count
    col = np.empty(n, dtype=complex)
    for k in range(n):
        try:
            col[k] = _lag_integral(k, geom.d_lambda, geom.delta)
        except ArithmeticError as exc:
            raise ArithmeticError(f"quadrature failed for entry (a, b) = ({k + 1}, 1)") from exc
    a = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            a[i, j] = col[i - j] if i >= j else np.conj(col[j - i])
    return a


def inv_eigs(spec, merge_tol: float = DEFAULT_MERGE_TOL) -> tuple[Spectrum, Spectrum | None]:
    """Spectra t = eigs(T^{-1}) and r = eigs(R^{-1}).

    For `SemiCorrelated` the second entry is None and ``t`` belongs to the
    correlated side.
    """
    if isinstance(spec, SemiCorrelated):
        return hermitian_eigenvalues(spec.T, merge_tol).inverse(), None
    if isinstance(spec, FullyCorrelated):
        return (hermitian_eigenvalues(spec.T, merge_tol).inverse(),
                hermitian_eigenvalues(spec.R, merge_tol).inverse())
    raise TypeError(f"{type(spec).__name__} has no correlation spectra")


def mean_eigenvalues(G0, rel: float = 1e-12) -> np.ndarray:
    """Nonzero eigenvalues of G0^H G0, descending; values below ``rel``
    times the largest count as zero."""
    g = np.asarray(G0, dtype=complex)
    w = np.linalg.eigvalsh(g.conj().T @ g)
    top = max(float(np.max(w)) if w.size else 0.0, 0.0)
    return np.sort(w[w > rel * top])[::-1] if top > 0 else np.zeros(0)


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------

def sqrtm_psd(a) -> np.ndarray:
    w, q = np.linalg.eigh(np.asarray(a, dtype=complex))
    return (q * np.sqrt(np.clip(w, 0, None))) @ q.conj().T


def substream(seed: int, counter: int) -> np.random.Generator:
    """Independent generator for block ``counter`` of base ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(counter)])))


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-variance circular complex Gaussians by Box-Muller.

    Zero uniforms are rejected explicitly so the logarithm stays finite.
    """
    n = int(np.prod(shape))
    u1 = rng.random(n)
    while True:
        zero = u1 == 0.0
        if not zero.any():
            break
        u1[zero] = rng.random(int(zero.sum()))
    u2 = rng.random(n)
    w = np.sqrt(-np.log(u1)) * np.exp(2j * np.pi * u2)
    return w.reshape(shape)


@dataclass
class _Sampler:
    left: np.ndarray | None = None
    right: np.ndarray | None = None
    mean: np.ndarray | None = None
    shape: tuple = field(default=(1, 1))


def _sampler(spec) -> _Sampler:
    s = _Sampler(shape=(spec.nr, spec.nt))
    if isinstance(spec, SemiCorrelated):
        if spec.side == "transmit":
            s.right = sqrtm_psd(spec.T)
        else:
            s.left = sqrtm_psd(spec.T)
    elif isinstance(spec, FullyCorrelated):
        s.left = sqrtm_psd(spec.R)
        s.right = sqrtm_psd(spec.T)
    elif isinstance(spec, NonzeroMean):
        s.mean = spec.G0
    return s


def sample_channels(spec, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent draws of G, shape (n, nr, nt)."""
    s = _sampler(spec)
    g = complex_gaussian(rng, (n,) + s.shape)
    if s.left is not None:
        g = s.left @ g
    if s.right is not None:
        g = g @ s.right
    if s.mean is not None:
        g = g + s.mean
    return g


def sample_channel(spec, seed: int) -> np.ndarray:
    """One draw of G (nr x nt) from the ensemble, reproducible from ``seed``."""
    return sample_channels(spec, 1, substream(seed, 0))[0]

"""Monte Carlo oracle for the closed forms.

Draws are organised in fixed blocks of `BLOCK` channels; block ``b`` of a
run with base seed ``s`` always uses ``substream(s, b)``.  Partial results
are merged in block order with the pairwise (n, mean, M2) update, so an
estimate depends only on (seed, n), not on how many workers computed it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channels import sample_channels, substream

__all__ = [
    "BLOCK",
    "McEstimate",
    "Functional",
    "MEAN_I",
    "SECOND_MOMENT_I",
    "mgf_at",
    "exceedance",
    "mutual_information",
    "estimate",
    "empirical_survival",
]

BLOCK = 4096


@dataclass(frozen=True)
class McEstimate:
    """Sample mean with its unbiased variance and standard error.

    ``mean`` is complex for complex-valued functionals (MGF at complex z);
    ``variance`` is then E|X - mean|^2.
    """

    n: int
    mean: float | complex
    variance: float
    stderr: float
    seed: int


@dataclass(frozen=True)
class Functional:
    kind: str
    arg: complex | float = 0.0

    def __call__(self, info: np.ndarray) -> np.ndarray:
        if self.kind == "meanI":
            return info
        if self.kind == "secondMomentI":
            return info ** 2
        if self.kind == "mgfAt":
            # det(I + G^H G) >= 1, so exp(z I) is the unambiguous power
            return np.exp(complex(self.arg) * info)
        if self.kind == "exceedance":
            return (info > self.arg).astype(float)
        raise ValueError(f"unknown functional {self.kind!r}")


MEAN_I = Functional("meanI")
SECOND_MOMENT_I = Functional("secondMomentI")


def mgf_at(z) -> Functional:
    return Functional("mgfAt", complex(z))


def exceedance(i_out: float) -> Functional:
    return Functional("exceedance", float(i_out))


def mutual_information(G) -> np.ndarray | float:
    """log det(I + G^H G) in nats from the eigenvalues of G^H G.

    Accepts one matrix or a stack (..., nr, nt).
    """
    g = np.asarray(G, dtype=complex)
    # the smaller Gram matrix has the same nonzero spectrum
    gram = g.conj().swapaxes(-1, -2) @ g if g.shape[-1] <= g.shape[-2] else g @ g.conj().swapaxes(-1, -2)
    lam = np.clip(np.linalg.eigvalsh(gram), 0.0, None)
    out = np.sum(np.log1p(lam), axis=-1)
    return float(out) if out.ndim == 0 else out


def _block_stats(spec, seed, b, size, functionals):
    info = mutual_information(sample_channels(spec, size, substream(seed, b)))
    out = []
    for f in functionals:
        x = f(info)
        m = x.mean()
        out.append((size, m, float(np.sum(np.abs(x - m) ** 2))))
    return out


def _merge(a, b):
    na, ma, qa = a
    nb, mb, qb = b
    n = na + nb
    d = mb - ma
    return n, ma + d * nb / n, qa + qb + abs(d) ** 2 * na * nb / n


def _run(spec, functionals, n, seed, workers):
    if n < 100:
        raise ValueError("Monte Carlo estimates need n >= 100")
    sizes = [min(BLOCK, n - lo) for lo in range(0, n, BLOCK)]
    jobs = [(spec, seed, b, s, functionals) for b, s in enumerate(sizes)]
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda j: _block_stats(*j), jobs))
    else:
        parts = [_block_stats(*j) for j in jobs]
    acc = parts[0]
    for p in parts[1:]:
        acc = [_merge(x, y) for x, y in zip(acc, p)]
    res = []
    for nn, m, q in acc:
        var = q / (nn - 1)
        m = complex(m) if np.iscomplexobj(m) else float(m)
        res.append(McEstimate(nn, m, float(var), math.sqrt(var / nn), int(seed)))
    return res


def estimate(spec, functional: Functional, n: int, seed: int, workers: int = 1) -> McEstimate:
    """Monte Carlo estimate of E[functional(I)] over ``n`` channel draws."""
    return _run(spec, [functional], n, seed, workers)[0]


def empirical_survival(spec, grid, n: int, seed: int, workers: int = 1) -> list[McEstimate]:
    """P(I > I_out) at each grid point from one shared set of draws."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("grid must be nonempty")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be increasing")
    return _run(spec, [exceedance(x) for x in grid], n, seed, workers)

"""Received-signal density for unitary space-time transmission.

Model: Y = G X + Z over a block of ``T_coh`` symbols, with Y (nr x T_coh),
X = J U (nt x T_coh, rows of a Haar unitary), G (nr x nt) with rows of
covariance T, and unit-variance noise Z.  Then

    p(Y | X) = exp(-tr Y [I - X^H T~ X] Y^H) / (pi^{T_coh nr} det(I + T)^{nr}),
    T~ = T (I + T)^{-1},

and p(Y) = int p(Y|X) dX is a unitary-group integral whose closed form
depends on Y only through the eigenvalues y of Y^H Y.

Two evaluation routes are provided: the closed form with the structural
zero eigenvalues (T_coh - nt of t~, T_coh - Q of y) already resolved, and
the unresolved integral det[e^{y_i t_j}] / (Delta(y) Delta(t)) over the
full T_coh-dimensional spectra, whose zeros are handled by the confluent
engine.  They agree to rounding and serve as mutual checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channels import SemiCorrelated, complex_gaussian, sample_channels, substream
from .groupcheck import haar_unitaries
from .numkit import DEFAULT_MERGE_TOL, DEFAULT_RADIUS, ConfluentLayout, LineSet, hermitian_eigenvalues

__all__ = [
    "UstmConfig",
    "mapped_spectrum",
    "received_density",
    "conditional_density",
    "haar_isometries",
    "sample_received",
    "marginal_mc",
]


@dataclass(frozen=True)
class UstmConfig:
    """Block length ``T_coh``, antenna counts and transmit correlation ``T``."""

    T_coh: int
    nt: int
    nr: int
    T: np.ndarray

    def __post_init__(self):
        T = np.array(self.T, dtype=complex)
        if T.shape != (self.nt, self.nt):
            raise ValueError(f"T must be {self.nt}x{self.nt}")
        if self.T_coh < self.nt:
            raise ValueError("T_coh must be at least nt for an isometry to exist")
        if self.nr < 1:
            raise ValueError("nr must be positive")
        hermitian_eigenvalues(T)
        T = 0.5 * (T + T.conj().T)
        T.setflags(write=False)
        object.__setattr__(self, "T", T)

    @property
    def Q(self) -> int:
        return min(self.T_coh, self.nr)


def mapped_spectrum(cfg: UstmConfig) -> np.ndarray:
    """t~ = T_i / (1 + T_i) padded with T_coh - nt zeros."""
    w = np.linalg.eigvalsh(cfg.T)
    return np.concatenate([np.sort(w / (1 + w))[::-1], np.zeros(cfg.T_coh - cfg.nt)])


def _received_eigs(cfg, Y):
    Y = np.asarray(Y, dtype=complex)
    if Y.shape != (cfg.nr, cfg.T_coh):
        raise ValueError(f"Y must be {cfg.nr}x{cfg.T_coh}, got {Y.shape[0]}x{Y.shape[1]}")
    gram = Y @ Y.conj().T if cfg.nr <= cfg.T_coh else Y.conj().T @ Y
    return np.sort(np.clip(np.linalg.eigvalsh(gram), 0.0, None))[::-1][:cfg.Q]


def _exp_bivariate(x0, y0, n, m):
    """Coefficient of a^n b^m in exp((x0 + a)(y0 + b))."""
    tot = 0.0
    for k in range(min(n, m) + 1):
        tot += (y0 ** (n - k) / math.factorial(n - k)) * (x0 ** (m - k) / math.factorial(m - k)) / math.factorial(k)
    return tot * math.exp(x0 * y0)


def _mono_taylor(center, size, power):
    """Taylor coefficients of x^power about center, orders 0..size-1."""
    return np.array([math.comb(power, k) * center ** (power - k) if k <= power else 0.0
                     for k in range(size)])


def _log_normalizer(cfg):
    w = np.linalg.eigvalsh(cfg.T)
    return -cfg.T_coh * cfg.nr * math.log(math.pi) - cfg.nr * float(np.sum(np.log1p(w)))


def _hciz_log_constant(T):
    return sum(math.lgamma(p + 1) for p in range(1, T))


def received_density(cfg: UstmConfig, Y, method: str = "auto",
                     radius: float = DEFAULT_RADIUS, merge_tol: float = DEFAULT_MERGE_TOL) -> float:
    """p(Y) for the received block ``Y`` (nr x T_coh).

    ``method="closed"`` uses the resolved form

        p(Y) = c (-1)^{nt (T-nt) + Q (T-Q)} e^{-sum y} det L
               / (Delta(y) prod y^{T-Q} Delta(t) prod t^{T-nt}),
        c = prod_{p<T} p! / (prod_{k<T-nt} k! prod_{k<T-Q} k!) / (pi^{T nr} det(I+T)^{nr}),

    where L has blocks e^{y_i t_j}, y_i^k (k < T-nt), t_j^k (k < T-Q) and
    k! delta; ``method="hciz"`` evaluates the unresolved ratio.

    The closed form cancels badly when every t~ is tiny on the scale 1/y
    (weak correlation, T -> 0): the node columns then nearly reproduce the
    monomial ones.  ``method="auto"`` switches to the unresolved ratio in
    that regime, where the small nodes and the zeros form one Taylor
    cluster and nothing cancels.
    """
    y = _received_eigs(cfg, Y)
    t = mapped_spectrum(cfg)[:cfg.nt]
    T, nt, Q = cfg.T_coh, cfg.nt, cfg.Q
    lc = _log_normalizer(cfg) + _hciz_log_constant(T) - float(np.sum(y))
    ymax = max(float(np.max(y, initial=0.0)), 1.0)
    if method == "auto":
        method = "hciz" if float(np.min(t)) * ymax < 0.05 or np.any(y <= 0) else "closed"
    if method == "hciz":
        rows = LineSet(tuple(y) + (0.0,) * (T - Q), 0, 0, radius, merge_tol)
        cols = LineSet(tuple(t) + (0.0,) * (T - nt), 0, 0, radius, merge_tol, scale=1.0 / ymax)
        layout = ConfluentLayout(rows, cols)
        big = np.empty(layout.expanded_shape)
        for rg in layout.row_groups:
            for cg in layout.col_groups:
                for n in range(rg.size):
                    for m in range(cg.size):
                        big[rg.start + n, cg.start + m] = _exp_bivariate(rg.center, cg.center, n, m)
        ph, la = layout.ratio(big, return_log=True)
        return float((ph * math.exp(la + lc)).real)
    if method != "closed":
        raise ValueError("method must be 'closed' or 'hciz'")
    py, pt = T - Q, T - nt
    if np.any(y <= 0) or (pt and np.any(t <= 0)):
        raise ValueError("degenerate received block (zero eigenvalue); use method='hciz'")
    rows = LineSet(tuple(y), 0, py, radius, merge_tol)
    cols = LineSet(tuple(t), 0, pt, radius, merge_tol)
    layout = ConfluentLayout(rows, cols)
    big = np.zeros(layout.expanded_shape)
    for rg in layout.row_groups:
        for cg in layout.col_groups:
            blk = np.zeros((rg.size, cg.size))
            if rg.kind == "node" and cg.kind == "node":
                for n in range(rg.size):
                    for m in range(cg.size):
                        blk[n, m] = _exp_bivariate(rg.center, cg.center, n, m)
            elif rg.kind == "node":
                for k in range(cg.size):
                    blk[:, k] = _mono_taylor(rg.center, rg.size, k)
            elif cg.kind == "node":
                for k in range(rg.size):
                    blk[k, :] = _mono_taylor(cg.center, cg.size, k)
            else:
                for k in range(min(rg.size, cg.size)):
                    blk[k, k] = math.factorial(k)
            big[rg.start:rg.start + rg.size, cg.start:cg.start + cg.size] = blk
    ph, la = layout.ratio(big, return_log=True)
    lc -= sum(math.lgamma(k + 1) for k in range(pt)) + sum(math.lgamma(k + 1) for k in range(py))
    lc -= py * float(np.sum(np.log(y))) + pt * float(np.sum(np.log(t)))
    sgn = -1.0 if (nt * pt + Q * py) % 2 else 1.0
    return float((sgn * ph * math.exp(la + lc)).real)


def conditional_density(cfg: UstmConfig, Y, X, tol: float = 1e-10) -> float:
    """Gaussian density p(Y | X) for an isometry X (nt x T_coh)."""
    X = np.asarray(X, dtype=complex)
    Y = np.asarray(Y, dtype=complex)
    if X.shape != (cfg.nt, cfg.T_coh):
        raise ValueError(f"X must be {cfg.nt}x{cfg.T_coh}")
    if Y.shape != (cfg.nr, cfg.T_coh):
        raise ValueError(f"Y must be {cfg.nr}x{cfg.T_coh}")
    if np.max(np.abs(X @ X.conj().T - np.eye(cfg.nt))) > tol:
        raise ValueError("X is not an isometry (X X^H != I)")
    return float(np.exp(_conditional_log(cfg, Y, X[None])[0]))


def _conditional_log(cfg, Y, Xs):
    Tm = cfg.T
    w, v = np.linalg.eigh(Tm)
    Tt = (v * (w / (1 + w))) @ v.conj().T
    YX = np.einsum("it,bjt->bij", Y, Xs.conj())          # Y X^H
    quad = np.einsum("bij,jk,bik->b", YX, Tt, YX.conj()).real
    return -float(np.sum(np.abs(Y) ** 2)) + quad + _log_normalizer(cfg)


def haar_isometries(nt: int, T_coh: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` isometries X = J U with U Haar on U(T_coh), shape (n, nt, T_coh)."""
    return haar_unitaries(T_coh, n, rng)[:, :nt, :]


def sample_received(cfg: UstmConfig, seed: int) -> np.ndarray:
    """One Y drawn from the generative model."""
    rng = substream(seed, 0)
    X = haar_isometries(cfg.nt, cfg.T_coh, 1, rng)[0]
    G = sample_channels(SemiCorrelated(cfg.T, cfg.nr), 1, rng)[0]
    return G @ X + complex_gaussian(rng, (cfg.nr, cfg.T_coh))


def marginal_mc(cfg: UstmConfig, Y, n: int, seed: int, chunk: int = 8192) -> tuple[float, float]:
    """Haar Monte Carlo estimate of int p(Y|X) dX; returns (mean, stderr)."""
    Y = np.asarray(Y, dtype=complex)
    s1 = s2 = 0.0
    done = b = 0
    while done < n:
        k = min(chunk, n - done)
        vals = np.exp(_conditional_log(cfg, Y, haar_isometries(cfg.nt, cfg.T_coh, k, substream(seed, b))))
        s1 += float(vals.sum())
        s2 += float((vals ** 2).sum())
        done += k
        b += 1
    mean = s1 / n
    var = max(s2 / n - mean ** 2, 0.0) * n / (n - 1)
    return mean, math.sqrt(var / n)

"""Joint densities of the nonzero eigenvalues of G^H G.

Each density has the shape  K * Delta(lambda) * det[phi_i(lambda_j)] / Delta(nodes),
with the node side (t = eigs(T^{-1}) or the mean eigenvalues gamma)
possibly degenerate.  Only the node side goes through the confluent
engine: the lambda side enters as plain columns, since the second factor
of Delta(lambda) cancels the one a ratio would divide by.  Coincident
lambda therefore just give a zero density, which is the correct limit.

The doubly correlated ensemble has no density of this type; use the MGF
in `mimomgf.mgfcap` instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln, hyp0f1

from .channels import FullyCorrelated, Iid, NonzeroMean, SemiCorrelated, dims, inv_eigs, mean_eigenvalues
from .numkit import DEFAULT_MERGE_TOL, DEFAULT_RADIUS, ConfluentLayout, LineSet, logdet

__all__ = [
    "JointDensity",
    "density_iid",
    "density_semicorr",
    "density_nonzero_mean",
    "joint_density",
    "laguerre_constant",
    "normalization",
    "max_eigenvalue_cdf",
]


@dataclass(frozen=True)
class JointDensity:
    """Joint density of the N nonzero eigenvalues (unordered).

    Attributes
    ----------
    spec : channel spec the density belongs to
    N : int
        Number of nonzero eigenvalues.
    evaluator : callable
        Maps an (npts, N) array of eigenvalue vectors to npts densities.
    support : float
        Point beyond which the density is negligible in every coordinate;
        used by the quadrature helpers.
    """

    spec: object
    N: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    support: float

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        single = lam.ndim == 1
        pts = np.atleast_2d(lam)
        if pts.shape[-1] != self.N:
            raise ValueError(f"expected {self.N} eigenvalues per point, got {pts.shape[-1]}")
        out = np.zeros(len(pts))
        ok = np.all(pts > 0, axis=1)
        if np.any(ok):
            out[ok] = self.evaluator(pts[ok])
        return float(out[0]) if single else out


def laguerre_constant(M: int, N: int) -> float:
    """log C_{M,N} with C_{M,N}^{-1} = prod_{j=1}^N j! (M-N+j-1)!."""
    return -sum(math.lgamma(j + 1) + math.lgamma(M - N + j) for j in range(1, N + 1))


def _log_vdm_rows(pts):
    """log |Delta| and sign of Delta(lambda) for each row of ``pts``."""
    n = pts.shape[1]
    sign = np.ones(len(pts))
    la = np.zeros(len(pts))
    for i in range(1, n):
        d = pts[:, i:i + 1] - pts[:, :i]
        sign *= np.prod(np.sign(d), axis=1)
        with np.errstate(divide="ignore"):
            la += np.sum(np.log(np.abs(d)), axis=1)
    return sign, la


def density_iid(nt: int, nr: int) -> JointDensity:
    M, N = max(nt, nr), min(nt, nr)
    lc = laguerre_constant(M, N)

    def ev(pts):
        _, lv = _log_vdm_rows(pts)
        return np.exp(lc + 2 * lv + np.sum((M - N) * np.log(pts) - pts, axis=1))

    return JointDensity(Iid(nt, nr), N, ev, support=60.0 + 6.0 * M)


def _row_layout(nodes, n_cols, radius, merge_tol):
    return ConfluentLayout(LineSet(tuple(nodes), 0, 0, radius, merge_tol), LineSet.fixed(n_cols))


def _finish(layout, big, log_k, phase_k, pts):
    """K * Delta(lambda) * ratio, evaluated for a stack of expanded matrices."""
    ph, la = logdet(layout.reduce(big))
    ph = ph / layout.den_phase
    la = la - layout.den_log
    sv, lv = _log_vdm_rows(pts)
    val = ph * sv * phase_k * np.exp(la + lv + log_k)
    # the sign factors compose to a real nonnegative value; keep the real part
    return val.real


def density_semicorr(T, nt: int, nr: int, side: str = "transmit",
                     radius: float = DEFAULT_RADIUS, merge_tol: float = DEFAULT_MERGE_TOL) -> JointDensity:
    """Semicorrelated density; ``T`` correlates the transmit side (or the
    receive side with ``side="receive"``).

    With nc the correlated count and nb the other one, N = min:

    nc <= nb:  prod t^nb lambda^{nb-nc} / (nc! prod (nb-nc+j-1)!) (-1)^{nc(nc-1)/2}
               Delta(lambda) det[e^{-t_i lambda_j}] / Delta(t)
    nc >  nb:  prod t^nb / prod_{j<=nb} j! (-1)^{nb(nb-1)/2}
               Delta(lambda) det[e^{-t_i lambda_j} ; t_i^k] / Delta(t)

    with the monomial columns k = 0..nc-nb-1 placed after the lambda columns.
    """
    spec = SemiCorrelated(T, nr if side == "transmit" else nt, side)
    if (spec.nt, spec.nr) != (nt, nr):
        raise ValueError(f"T is {spec.T.shape[0]}x{spec.T.shape[0]}, which does not match "
                         f"{'nt' if side == 'transmit' else 'nr'} = {nt if side == 'transmit' else nr}")
    t, _ = inv_eigs(spec, merge_tol)
    t = t.values
    nc, nb = len(t), (nr if side == "transmit" else nt)
    M, N = max(nc, nb), min(nc, nb)
    p = nc - N
    layout = _row_layout(t, nc, radius, merge_tol)
    lk = nb * float(np.sum(np.log(t)))
    if nc <= nb:
        lk -= math.lgamma(nc + 1) + sum(math.lgamma(nb - nc + j) for j in range(1, nc + 1))
        sgn = nc * (nc - 1) // 2
    else:
        # monomial columns go last; with them in front the sign picks up an
        # extra (-1)^{nb p}
        lk -= sum(math.lgamma(j + 1) for j in range(1, nb + 1))
        sgn = nb * (nb - 1) // 2
    phase_k = -1.0 if sgn % 2 else 1.0

    def ev(pts):
        npts = len(pts)
        big = np.zeros((npts,) + layout.expanded_shape, dtype=complex)
        for g in layout.row_groups:
            n = np.arange(g.size)
            rows = g.start + n
            # Taylor coefficients in t of e^{-t lambda}: (-lambda)^n e^{-t0 lambda} / n!
            lam = pts[:, None, :]
            coef = (np.exp(-g.center * lam + n[None, :, None] * np.log(lam)
                           - gammaln(n + 1)[None, :, None]) * ((-1.0) ** n)[None, :, None])
            big[:, rows, :N] = coef
            for k in range(p):
                kk = np.arange(g.size)
                c = np.array([math.comb(k, int(m)) * g.center ** (k - m) if m <= k else 0.0 for m in kk])
                big[:, rows, N + k] = c[None, :]
        lw = (nb - nc) * np.sum(np.log(pts), axis=1) if nc <= nb else 0.0
        return _finish(layout, big, lk + lw, phase_k, pts)

    support = (60.0 + 6.0 * M) / float(np.min(t))
    return JointDensity(spec, N, ev, support)


def density_nonzero_mean(G0, radius: float = DEFAULT_RADIUS,
                         merge_tol: float = DEFAULT_MERGE_TOL) -> JointDensity:
    """Density for G = G0 + W.

    With gamma the N0 nonzero eigenvalues of G0^H G0 (threshold 1e-12 max),
    padded with N - N0 zeros, and a = M - N:

        e^{-sum lambda - sum gamma} prod lambda^a / (N! a!^N)
        Delta(lambda) det[0F1(a+1; gamma_i lambda_j)] / Delta(gamma)

    For M = N the kernel is I_0(2 sqrt(gamma lambda)).  The zero padding is
    a confluent cluster at the origin whose Taylor rows are
    lambda^n / (n! (a+1)_n).
    """
    spec = NonzeroMean(G0)
    M, N = dims(spec)
    a = M - N
    gamma = mean_eigenvalues(spec.G0)
    nodes = tuple(gamma) + (0.0,) * (N - len(gamma))
    layout = _row_layout(nodes, N, radius, merge_tol)
    lk = -float(np.sum(gamma)) - math.lgamma(N + 1) - N * math.lgamma(a + 1)

    def ev(pts):
        npts = len(pts)
        big = np.zeros((npts,) + layout.expanded_shape, dtype=complex)
        lam = pts[:, None, :]
        for g in layout.row_groups:
            n = np.arange(g.size)[None, :, None]
            # d^n/dx^n 0F1(b; x) = 0F1(b+n; x) / (b)_n
            lpoch = gammaln(a + 1 + n) - gammaln(a + 1)
            big[:, g.start:g.start + g.size, :] = (hyp0f1(a + 1 + n, g.center * lam)
                                                   * np.exp(n * np.log(lam) - gammaln(n + 1) - lpoch))
        lw = np.sum(a * np.log(pts) - pts, axis=1)
        return _finish(layout, big, lk + lw, 1.0, pts)

    support = (math.sqrt(float(np.max(gamma, initial=0.0))) + 8.0) ** 2 + 40.0 + 6.0 * M
    return JointDensity(spec, N, ev, support)


def joint_density(spec, **kw) -> JointDensity:
    """Dispatch on the channel spec."""
    if isinstance(spec, Iid):
        return density_iid(spec.nt, spec.nr)
    if isinstance(spec, SemiCorrelated):
        return density_semicorr(spec.T, spec.nt, spec.nr, spec.side, **kw)
    if isinstance(spec, NonzeroMean):
        return density_nonzero_mean(spec.G0, **kw)
    if isinstance(spec, FullyCorrelated):
        raise TypeError("the doubly correlated ensemble has no closed-form joint density here; "
                        "use mimomgf.mgfcap for its MGF, capacity and outage")
    raise TypeError(f"unsupported channel spec {type(spec).__name__}")


# --------------------------------------------------------------------------
# quadrature helpers (small N)
# --------------------------------------------------------------------------

def _panel_rule(upper, panels, order):
    x, w = np.polynomial.legendre.leggauss(order)
    # geometric panels resolve the lambda^a behaviour near the origin
    edges = np.concatenate([[0.0], np.geomspace(upper * 1e-3, upper, panels)])
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        xs.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
        ws.append(0.5 * (hi - lo) * w)
    return np.concatenate(xs), np.concatenate(ws)


def _tensor_integral(dens, upper, panels, order, batch=20000):
    x, w = _panel_rule(upper, panels, order)
    grids = np.meshgrid(*([x] * dens.N), indexing="ij")
    wts = np.ones_like(grids[0])
    for k, wk in enumerate(np.meshgrid(*([w] * dens.N), indexing="ij")):
        wts = wts * wk
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = wts.ravel()
    total = 0.0
    for lo in range(0, len(pts), batch):
        total += float(np.dot(dens(pts[lo:lo + batch]), wts[lo:lo + batch]))
    return total


def normalization(dens: JointDensity, panels: int = 12, order: int = 20) -> float:
    """Integral of the density over the positive orthant (tensor
    Gauss-Legendre; intended for N <= 2, workable for N = 3)."""
    return _tensor_integral(dens, dens.support, panels, order)


def max_eigenvalue_cdf(dens: JointDensity, xs, panels: int = 8, order: int = 16) -> np.ndarray:
    """P(lambda_max <= x) = integral of the density over [0, x]^N."""
    return np.array([_tensor_integral(dens, float(x), panels, order) if x > 0 else 0.0
                     for x in np.atleast_1d(xs)])

"""Reference computations that share no code with the package.

Everything here is deliberately naive: plain determinants, scipy
quadrature, textbook special functions.  Tests compare the package
against these routes.
"""

import itertools
import math

import mpmath
import numpy as np
from scipy import integrate, special


def rand_pd(rng, n, floor=0.3):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return a @ a.conj().T / n + floor * np.eye(n)


def plain_vandermonde(x):
    out = 1.0
    for i in range(len(x)):
        for j in range(i):
            out *= x[i] - x[j]
    return out


def plain_ratio(funcs, nodes):
    """det[f_i(x_j)] / Delta(x) evaluated literally."""
    m = np.array([[f(x) for x in nodes] for f in funcs])
    return np.linalg.det(m) / plain_vandermonde(nodes)


def mp_ratio(funcs, nodes, dps=60):
    """``plain_ratio`` in multiprecision, for widely spread nodes where the
    double determinant cancels (``funcs`` must accept mpmath numbers)."""
    with mpmath.workdps(dps):
        x = [mpmath.mpf(v) for v in nodes]
        m = mpmath.matrix([[f(v) for v in x] for f in funcs])
        vdm = mpmath.mpf(1)
        for i in range(len(x)):
            for j in range(i):
                vdm *= x[i] - x[j]
        return float(mpmath.det(m) / vdm)


def richardson_cluster_ratio(funcs, fixed, center, mult, h=0.02):
    """Limit of ``plain_ratio`` as ``mult`` nodes merge at ``center``.

    The merging nodes sit at center + h*(k - (mult-1)/2); the ratio is a
    symmetric analytic function of the nodes, hence even in h, and two
    Richardson steps in h^2 remove the h^2 and h^4 terms.
    """
    def at(step):
        pts = [center + step * (k - (mult - 1) / 2) for k in range(mult)]
        return plain_ratio(funcs, list(fixed) + pts)

    r0, r1, r2 = at(h), at(h / 2), at(h / 4)
    a1 = (4 * r1 - r0) / 3
    a2 = (4 * r2 - r1) / 3
    return (16 * a2 - a1) / 15


def mgf_at_one(t_eigs, r_eigs):
    """E det(I + G^H G) = sum_k k! e_k(t) e_k(r) for G = R^{1/2} W T^{1/2}."""
    def esym(v, k):
        return sum(np.prod(c) for c in itertools.combinations(v, k)) if k else 1.0

    n = min(len(t_eigs), len(r_eigs))
    return sum(math.factorial(k) * esym(t_eigs, k) * esym(r_eigs, k) for k in range(n + 1))


def quad_mean(pdf, func, upper=np.inf):
    val, _ = integrate.quad(lambda x: pdf(x) * func(x), 0, upper, epsabs=1e-14, epsrel=1e-12, limit=400)
    return val


def gamma_pdf(shape, scale=1.0):
    return lambda x: x ** (shape - 1) * math.exp(-x / scale) / (math.gamma(shape) * scale ** shape)


def hypoexponential_pdf(rates_inv):
    """Density of sum_i s_i |w_i|^2 for distinct positive s_i."""
    s = np.asarray(rates_inv, float)

    def pdf(x):
        tot = 0.0
        for i, si in enumerate(s):
            den = np.prod([si - sj for j, sj in enumerate(s) if j != i])
            tot += si ** (len(s) - 2) * math.exp(-x / si) / den
        return tot
    return pdf


def noncentral_pdf(M, gamma):
    """Density of ||g0 + w||^2 with w in C^M standard, ||g0||^2 = gamma."""
    if gamma == 0:
        return gamma_pdf(M)
    nu = M - 1

    def pdf(x):
        if x <= 0:
            return 0.0
        s = 2 * math.sqrt(gamma * x)
        return math.exp(-(math.sqrt(x) - math.sqrt(gamma)) ** 2) * (x / gamma) ** (nu / 2) * special.ive(nu, s)
    return pdf


def mc_info(g):
    """log det(I + G^H G) for a stack, straight from slogdet."""
    nt = g.shape[-1]
    gram = np.conj(np.swapaxes(g, -1, -2)) @ g
    return np.linalg.slogdet(np.eye(nt) + gram)[1]

"""Complex linear algebra primitives and the confluent determinant-ratio engine.

Nearly every closed form in this package is a ratio

    det[K(s_i, x_j)] / (Delta(s) Delta(x))

with a Vandermonde determinant in the denominator.  When two or more nodes
coincide both numerator and denominator vanish; the finite limit replaces
the repeated lines by derivative lines.  The engine here goes one step
further and uses Newton divided differences computed from Taylor
coefficients about a cluster centre, so nodes that are merely *close*
(relative spread up to ``DEFAULT_RADIUS``) are handled without the
catastrophic cancellation of the plain ratio, and exactly coincident nodes
reduce to the derivative-column form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "DEFAULT_MERGE_TOL",
    "DEFAULT_RADIUS",
    "RADIUS_LADDER",
    "cancellation_digits",
    "radius_candidates",
    "Spectrum",
    "LineSet",
    "LineGroup",
    "ConfluentRatioProblem",
    "vandermonde",
    "det",
    "logdet",
    "hermitian_eigenvalues",
    "confluent_ratio",
    "asymptotic_ratio",
    "confluent_det_ratio",
    "ConfluentLayout",
    "replaced_ratios",
    "assemble",
    "from_log",
]

DEFAULT_MERGE_TOL = 1e-9
# relative spread below which nodes share one Taylor expansion
DEFAULT_RADIUS = 0.05
_LOG_EPS = math.log(1e-17)


class NotHermitianError(ValueError):
    pass


class NotPositiveDefiniteError(ValueError):
    def __init__(self, index, value):
        super().__init__(f"eigenvalue {index} is not positive: {value!r}")
        self.index = index
        self.value = value


# --------------------------------------------------------------------------
# spectra
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Spectrum:
    """Positive eigenvalues in descending order with degeneracy clusters.

    Values whose relative distance to the running cluster representative is
    below ``merge_tol`` are reported as one cluster.  The values themselves
    are kept unmodified.
    """

    values: np.ndarray
    merge_tol: float = DEFAULT_MERGE_TOL

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float))[::-1].copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    @property
    def clusters(self) -> list[tuple[float, int]]:
        out: list[list[float]] = []
        for v in self.values:
            if out and abs(out[-1][0] - v) <= self.merge_tol * max(abs(out[-1][0]), abs(v)):
                out[-1][1] += 1
            else:
                out.append([float(v), 1])
        return [(c, int(m)) for c, m in out]

    @property
    def max_multiplicity(self) -> int:
        return max((m for _, m in self.clusters), default=0)

    def inverse(self) -> "Spectrum":
        return Spectrum(1.0 / self.values, self.merge_tol)


# --------------------------------------------------------------------------
# dense primitives
# --------------------------------------------------------------------------

def vandermonde(x) -> complex | float:
    """Return prod_{i>j} (x_i - x_j); the empty product is 1."""
    x = np.asarray(x)
    out = 1.0 + 0.0 * x.dtype.type(0)
    n = len(x)
    for i in range(1, n):
        out = out * np.prod(x[i] - x[:i])
    return out.item() if hasattr(out, "item") else out


def _log_vandermonde(x) -> tuple[complex, float]:
    x = np.asarray(x)
    phase, logabs = 1.0 + 0j, 0.0
    for i in range(1, len(x)):
        d = x[i] - x[:i]
        a = np.abs(d)
        if np.any(a == 0):
            return 0j, -np.inf
        phase *= np.prod(d / a)
        logabs += float(np.sum(np.log(a)))
    return phase, logabs


def logdet(a):
    """Return ``(phase, log|det a|)`` after row and column equilibration.

    The scale factors (powers of two) are removed before the LU
    factorisation and their logarithms re-applied, so matrices mixing
    columns of wildly different magnitude keep their relative accuracy.
    Stacked input of shape (..., n, n) gives arrays of shape (...).
    """
    a = np.array(a, dtype=complex)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"determinant needs a square matrix, got shape {a.shape}")
    batch = a.shape[:-2]
    if a.shape[-1] == 0:
        ph, la = np.ones(batch, dtype=complex), np.zeros(batch)
        return (ph, la) if batch else (complex(1), 0.0)
    if not np.all(np.isfinite(a)):
        raise FloatingPointError("non-finite matrix entry")
    log_scale = np.zeros(batch)
    singular = np.zeros(batch, dtype=bool)
    for axis in (-2, -1):
        s = np.max(np.abs(a), axis=axis)
        zero = s == 0
        singular |= np.any(zero, axis=-1)
        s = np.where(zero, 1.0, 2.0 ** np.clip(np.round(np.log2(np.where(zero, 1.0, s))), -1022, 1023))
        a = a / (s[..., np.newaxis, :] if axis == -2 else s[..., :, np.newaxis])
        log_scale = log_scale + np.sum(np.log(s), axis=-1)
    sign, ld = np.linalg.slogdet(a)
    singular |= sign == 0
    phase = np.where(singular, 0j, sign)
    logabs = np.where(singular, -np.inf, ld + log_scale)
    if not batch:
        return complex(phase), float(logabs)
    return phase, logabs


def from_log(phase, logabs):
    """phase * exp(logabs), with exp(-inf) mapped to 0."""
    with np.errstate(under="ignore"):
        out = np.asarray(phase) * np.exp(np.asarray(logabs, dtype=float))
    return complex(out) if np.ndim(out) == 0 else out


def det(a) -> complex:
    """Determinant of a square complex matrix (pivoted LU, equilibrated)."""
    return from_log(*logdet(a))


def hermitian_eigenvalues(a, merge_tol: float = DEFAULT_MERGE_TOL, hermitian_tol: float = 1e-12,
                          return_vectors: bool = False):
    """Eigenvalues of a Hermitian positive definite matrix as a `Spectrum`.

    Raises `NotHermitianError` for non-Hermitian input and
    `NotPositiveDefiniteError` (carrying the offending index) when an
    eigenvalue is not strictly positive.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("hermitian_eigenvalues needs a square matrix")
    scale = max(np.max(np.abs(a)), np.finfo(float).tiny)
    if np.max(np.abs(a - a.conj().T)) > hermitian_tol * scale:
        raise NotHermitianError("matrix is not Hermitian")
    a = 0.5 * (a + a.conj().T)
    w, q = np.linalg.eigh(a)
    order = np.argsort(w)[::-1]
    w, q = w[order], q[:, order]
    for i, v in enumerate(w):
        if not v > 0:
            raise NotPositiveDefiniteError(i, float(v))
    spec = Spectrum(w, merge_tol)
    if return_vectors:
        return spec, q
    return spec


# --------------------------------------------------------------------------
# confluent engine
# --------------------------------------------------------------------------

@dataclass
class LineGroup:
    """A contiguous block of *expanded* matrix lines handed to a kernel.

    kind == "node":  Taylor coefficients of orders 0..size-1 about ``center``
    kind == "tail":  tail coefficients hat f^{(k)}, k = 0..size-1
    kind == "fixed": plain lines with indices ``index0 .. index0+size-1``
    """

    kind: str
    size: int
    start: int
    center: float = 0.0
    index0: int = 0


@dataclass
class LineSet:
    """Description of the rows (or columns) of a confluent ratio.

    ``nodes`` are finite Vandermonde nodes, ``n_infinite`` nodes are sent to
    infinity and ``n_fixed`` lines carry no node at all.  Layout in the
    matrix is: finite nodes, then infinite nodes, then fixed lines.
    ``growth`` bounds the polynomial factor by which the kernel's Taylor
    coefficients may exceed |center|^{-n}; it sizes wide clusters.
    """

    nodes: Sequence[float] = ()
    n_infinite: int = 0
    n_fixed: int = 0
    radius: float = DEFAULT_RADIUS
    merge_tol: float = DEFAULT_MERGE_TOL
    scale: float = 0.0
    growth: int = 0
    groups: list = field(default_factory=list, init=False)

    @classmethod
    def fixed(cls, n):
        return cls((), 0, n)

    @property
    def dimension(self):
        return len(self.nodes) + self.n_infinite + self.n_fixed


def _as_nodes(nodes):
    x = np.asarray(nodes)
    if np.iscomplexobj(x) and np.any(x.imag != 0):
        return x.astype(complex)[np.lexsort((x.imag, x.real))]
    return np.sort(np.asarray(np.real(x), dtype=float))


def _clusters(nodes, radius, merge_tol, scale=0.0):
    """Group sorted nodes; returns list of (center, offsets).

    Complex nodes are ordered by real then imaginary part.  Two nodes join
    a cluster when their distance is at most ``radius`` times the larger
    of their moduli and ``scale``.
    """
    x = _as_nodes(nodes)
    out = []
    start = 0
    for i in range(1, len(x) + 1):
        if i < len(x) and abs(x[i] - x[start]) <= radius * max(abs(x[start]), abs(x[i]), scale):
            continue
        block = x[start:i]
        c = block.mean()
        d = block - c
        d[np.abs(d) <= merge_tol * max(abs(c), np.finfo(float).tiny)] = 0.0
        if np.all(block == block[0]):
            c, d = block[0], np.zeros_like(block)
        elif np.all(np.abs(block - block[0]) <= merge_tol * max(abs(block[0]), np.finfo(float).tiny)):
            # merged: the mean keeps the error second order in the spread
            d = np.zeros_like(block)
        out.append((c.item() if hasattr(c, "item") else c, d))
        start = i
    return out


def cancellation_digits(nodes, radius: float = DEFAULT_RADIUS, merge_tol: float = DEFAULT_MERGE_TOL,
                        scale: float = 0.0) -> float:
    """Rough count of decimal digits lost to nearby nodes left in separate clusters.

    The divided-difference weights sum_i prod_{j != i} rho_ij / |x_i - x_j|
    over pairs in different clusters, rho_ij = max(|x_i|, |x_j|, scale);
    pairs sharing a cluster are resolved by Taylor expansion and cost
    nothing, so the floor is log10(len(nodes)).  A ranking device rather
    than an error bound.
    """
    pts, lab = [], []
    for k, (c, d) in enumerate(_clusters(nodes, radius, merge_tol, scale)):
        pts.extend(c + d)
        lab.extend([k] * len(d))
    total = 0.0
    for i in range(len(pts)):
        s = 0.0
        for j in range(len(pts)):
            if j != i and lab[i] != lab[j]:
                s += math.log(max(abs(pts[i]), abs(pts[j]), scale) / abs(pts[i] - pts[j]))
        total += math.exp(s)
    return math.log10(total) if total else 0.0


RADIUS_LADDER = (0.1, 0.2, 0.35, 0.5)


def radius_candidates(nodes, radius: float = DEFAULT_RADIUS, merge_tol: float = DEFAULT_MERGE_TOL,
                      scale: float = 0.0, min_digits: float = 2.0) -> list:
    """Clustering radii worth trying for ``nodes``.

    Just ``[radius]`` when the estimated cancellation (`cancellation_digits`)
    is at most ``min_digits``; otherwise ``radius`` followed by each radius of
    `RADIUS_LADDER` that yields a new partition.  Wider clusters trade
    cross-cluster cancellation for longer Taylor expansions, so which one
    is best depends on the kernel; callers pick by a residual they can
    compute (see `LineSet.growth` for sizing the expansions).
    """
    if len(nodes) < 2 or cancellation_digits(nodes, radius, merge_tol, scale) <= min_digits:
        return [radius]

    def partition(r):
        return tuple(len(d) for _, d in _clusters(nodes, r, merge_tol, scale))

    out, seen = [radius], {partition(radius)}
    for r in RADIUS_LADDER:
        if r > radius and partition(r) not in seen:
            seen.add(partition(r))
            out.append(r)
    return out


def _extra_terms(center, offsets, growth=0):
    """Taylor orders beyond len(offsets)-1 needed for the divided differences.

    Coefficients are assumed to decay like |center|^{-n} times a polynomial
    of degree ``growth`` in n; the tail of sum_n C(n+s, s) q^n with
    q = spread / |center| is pushed below 1e-17.
    """
    m = np.max(np.abs(offsets)) if len(offsets) else 0.0
    if m == 0.0:
        return 0
    q = 2.0 * m / max(abs(center), m)
    legacy = int(min(48, math.ceil(_LOG_EPS / math.log(min(q, 0.9))) + 8))
    q = m / max(abs(center), m)
    if q >= 0.5:
        return legacy
    s = len(offsets) - 1 + growth
    n, log_q = 1, math.log(q)
    while n < 400 and math.lgamma(n + s + 1) - math.lgamma(n + 1) - math.lgamma(s + 1) + n * log_q > _LOG_EPS:
        n += 1
    return max(legacy, n)


def _h_matrix(offsets, nmax):
    """H[k, n] = h_{n-k}(d_0..d_k); maps Taylor coefficients to divided differences."""
    p = len(offsets)
    dt = complex if np.iscomplexobj(offsets) else float
    out = np.zeros((p, nmax + 1), dtype=dt)
    if p == 0:
        return out
    h = offsets[0] ** np.arange(nmax + 1)
    for k in range(p):
        if k:
            # h_m(d_0..d_k) = h_m(d_0..d_{k-1}) + d_k h_{m-1}(d_0..d_k)
            new = np.empty(nmax + 1, dtype=dt)
            new[0] = 1.0
            for m in range(1, nmax + 1):
                new[m] = h[m] + offsets[k] * new[m - 1]
            h = new
        out[k, k:] = h[:nmax + 1 - k]
    return out


def _expand(lines: LineSet):
    """Return (groups, transform, phase, log|den|) for one side."""
    groups = []
    blocks = []
    pos = 0
    node_values = []
    cluster_of = []
    for ci, (c, d) in enumerate(_clusters(lines.nodes, lines.radius, lines.merge_tol, lines.scale)):
        p = len(d)
        nmax = p - 1 + _extra_terms(c, d, lines.growth)
        groups.append(LineGroup("node", nmax + 1, pos, center=c))
        blocks.append(_h_matrix(d, nmax))
        pos += nmax + 1
        node_values.extend(c + d)
        cluster_of.extend([ci] * p)
    if lines.n_infinite:
        groups.append(LineGroup("tail", lines.n_infinite, pos))
        blocks.append(np.eye(lines.n_infinite))
        pos += lines.n_infinite
    if lines.n_fixed:
        groups.append(LineGroup("fixed", lines.n_fixed, pos))
        blocks.append(np.eye(lines.n_fixed))
        pos += lines.n_fixed
    nrow = sum(b.shape[0] for b in blocks)
    dt = complex if any(b.dtype == complex for b in blocks) else float
    transform = np.zeros((nrow, pos), dtype=dt)
    r = c0 = 0
    for b in blocks:
        transform[r:r + b.shape[0], c0:c0 + b.shape[1]] = b
        r += b.shape[0]
        c0 += b.shape[1]
    # cross-cluster Vandermonde factors, in expanded order
    phase, logabs = 1.0 + 0j, 0.0
    xv = np.asarray(node_values)
    cl = np.asarray(cluster_of)
    for l in range(len(xv)):
        for j in range(l):
            if cl[j] != cl[l]:
                diff = xv[l] - xv[j]
                phase *= diff / abs(diff)
                logabs += math.log(abs(diff))
    p = lines.n_infinite
    if (p * (p - 1) // 2) % 2:
        phase = -phase
    return groups, transform, phase, logabs


class ConfluentLayout:
    """Expanded-line bookkeeping for one ratio det[A] / (Delta(rows) Delta(cols)).

    ``row_groups`` and ``col_groups`` describe the expanded lines a kernel
    must fill (see `LineGroup`); `reduce` maps the expanded matrix (or a
    stack of them) to the square matrix of divided differences, and
    `ratio` finishes the evaluation.
    """

    def __init__(self, rows: LineSet, cols: LineSet):
        if rows.dimension != cols.dimension:
            raise ValueError(f"ratio needs a square matrix: {rows.dimension} rows, {cols.dimension} columns")
        self.row_groups, self._rt, rph, rlog = _expand(rows)
        self.col_groups, self._ct, cph, clog = _expand(cols)
        self.den_phase = rph * cph
        self.den_log = rlog + clog
        self.dimension = rows.dimension

    @property
    def expanded_shape(self):
        return self._rt.shape[1], self._ct.shape[1]

    def reduce(self, big):
        big = np.asarray(big, dtype=complex)
        if big.shape[-2:] != self.expanded_shape:
            raise ValueError(f"kernel returned shape {big.shape[-2:]}, expected {self.expanded_shape}")
        return self._rt @ big @ self._ct.T

    def ratio(self, big, return_log: bool = False):
        ph, la = logdet(self.reduce(big))
        ph = ph / self.den_phase
        la = la - self.den_log
        if return_log:
            return ph, la
        return from_log(ph, la)


def confluent_det_ratio(build: Callable[[list, list], np.ndarray], rows: LineSet, cols: LineSet,
                        return_log: bool = False):
    """Evaluate lim det[A] / (Delta(row nodes) Delta(col nodes)).

    ``build(row_groups, col_groups)`` must return the expanded matrix whose
    entries are the mixed Taylor / tail / fixed coefficients described by
    the `LineGroup` objects (see there).  Returns a complex number, or
    ``(phase, logabs)`` when ``return_log`` is set.
    """
    layout = ConfluentLayout(rows, cols)
    return layout.ratio(build(layout.row_groups, layout.col_groups), return_log)


def replaced_ratios(mat, alt, lines, axis: int = 1):
    """det(mat with line j taken from alt) / det(mat) for each j in ``lines``.

    ``axis=1`` replaces columns, ``axis=0`` rows.
    """
    ph0, l0 = logdet(mat)
    out = []
    for j in lines:
        m = np.array(mat, dtype=complex)
        if axis == 1:
            m[:, j] = alt[:, j]
        else:
            m[j, :] = alt[j, :]
        ph, la = logdet(m)
        out.append(from_log(ph / ph0, la - l0))
    return np.array(out)


def assemble(row_groups, col_groups, block: Callable[[LineGroup, LineGroup], np.ndarray]) -> np.ndarray:
    """Helper for kernels: fill the expanded matrix block by block."""
    nr = sum(g.size for g in row_groups)
    nc = sum(g.size for g in col_groups)
    out = np.zeros((nr, nc), dtype=complex)
    for r in row_groups:
        for c in col_groups:
            out[r.start:r.start + r.size, c.start:c.start + c.size] = block(r, c)
    return out


@dataclass
class ConfluentRatioProblem:
    """Column functions f_i and the nodes x_j of det[f_i(x_j)] / Delta(x).

    ``columns(x, n)`` returns an ``(M, n+1)`` array whose column k holds
    f_i^{(k)}(x) / k!  for every function i.
    """

    columns: Callable[[float, int], np.ndarray]
    nodes: Sequence[float]
    radius: float = DEFAULT_RADIUS
    merge_tol: float = DEFAULT_MERGE_TOL

    @property
    def dimension(self):
        return len(self.nodes)


def _one_sided(problem, tail):
    p = 0 if tail is None else tail.shape[1]
    cols = LineSet(tuple(problem.nodes), p, 0, problem.radius, problem.merge_tol)
    if len(problem.nodes):
        M = np.asarray(problem.columns(problem.nodes[0], 0)).shape[0]
    else:
        M = tail.shape[0]
    if M != cols.dimension:
        raise ValueError(f"{M} column functions for a {cols.dimension}-node problem")

    def build(rgs, cgs):
        blocks = []
        for g in cgs:
            if g.kind == "node":
                blocks.append(np.asarray(problem.columns(g.center, g.size - 1)))
            else:
                blocks.append(tail)
        return np.concatenate(blocks, axis=1)

    return confluent_det_ratio(build, LineSet.fixed(M), cols)


def confluent_ratio(problem: ConfluentRatioProblem) -> complex:
    """lim det[f_i(x_j)] / Delta(x) with coincident nodes resolved.

    Repeated nodes are replaced by derivative columns (scaled by 1/k!), and
    close but distinct nodes by divided differences, so the result varies
    continuously with the nodes.
    """
    return _one_sided(problem, None)


def asymptotic_ratio(problem: ConfluentRatioProblem, tail) -> complex:
    """Ratio with ``tail.shape[1]`` extra nodes sent to infinity.

    ``tail[i, k]`` is the coefficient hat f_i^{(k)} in the expansion
    f_i(x) ~ x^{M-1} sum_k hat f_i^{(k)} x^{-k}; the finite nodes are
    ``problem.nodes``.
    """
    tail = np.asarray(tail)
    if tail.ndim != 2:
        raise ValueError("tail coefficients must be a 2-D array (functions x orders)")
    if tail.shape[1] == 0:
        return confluent_ratio(problem)
    return _one_sided(problem, tail)

"""Transfer operators on depth-k cylinder functions and their leading
spectral data.

Every operator here has the IFS form ``(B g)(w) = sum_j c[w, j] g(phi_j w)``
with ``phi_j w`` truncated to depth k, so it is stored as an (r**k, r)
coefficient table plus the matching table of source indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import sparse
from scipy.special import logsumexp

from .potentials import (
    MAX_EXPONENT,
    OverflowDiagnostic,
    PotentialFamily,
    WeightSystem,
    _words,
)
from .symbolic import CylinderFunction, CylinderMeasure, Word, branch_index, branch_table


#: smallest residual power iteration is asked to reach
RESIDUAL_FLOOR = 16 * np.finfo(float).eps


class ConvergenceError(RuntimeError):
    """Power iteration hit ``max_iter`` before reaching the tolerance."""

    def __init__(self, msg, primal_residual=None, dual_residual=None, iterations=None):
        super().__init__(msg)
        self.primal_residual = primal_residual
        self.dual_residual = dual_residual
        self.iterations = iterations


class BudgetError(RuntimeError):
    """Requested enumeration exceeds the configured cost budget."""


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    coeffs: np.ndarray
    src: np.ndarray
    r: int
    depth: int
    kind: str = "grand"

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (self.r**self.depth, self.r):
            raise ValueError(f"coefficient table has shape {c.shape}")
        if not np.all(c > 0) or not np.all(np.isfinite(c)):
            raise ValueError("transfer coefficients must be finite and strictly positive")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def size(self) -> int:
        return self.r**self.depth

    def apply(self, f):
        return apply(self, f)

    def apply_dual(self, nu: np.ndarray) -> np.ndarray:
        """Action on measures: (B* nu)(v) = sum_{phi_j w = v} c[w, j] nu(w)."""
        nu = np.asarray(nu, dtype=float)
        return np.bincount(self.src.ravel(), weights=(self.coeffs * nu[:, None]).ravel(),
                           minlength=self.size)

    def to_sparse(self) -> sparse.csr_matrix:
        rows = np.repeat(np.arange(self.size), self.r)
        return sparse.csr_matrix((self.coeffs.ravel(), (rows, self.src.ravel())),
                                 shape=(self.size, self.size))

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def scaled(self, s: float) -> "TransferMatrix":
        return TransferMatrix(self.coeffs * s, self.src, self.r, self.depth, self.kind)


def _from_exponents(ex: np.ndarray, r: int, depth: int, kind: str, N: int = 0):
    # ex has shape (r, r**depth): row j holds the exponent on the word j w
    if np.any(ex > MAX_EXPONENT):
        j, w = np.unravel_index(int(np.argmax(ex)), ex.shape)
        word = tuple(int(s) for s in _words(r, depth + 1)[j * r**depth + w])
        raise OverflowDiagnostic(N, word, float(ex[j, w]))
    return TransferMatrix(np.exp(ex).T, branch_table(r, depth), r, depth, kind)


def assemble_classical(family: PotentialFamily, N: int, beta: float, depth: int) -> TransferMatrix:
    """Ruelle operator of -beta A_N: coefficients exp(-beta A_N(jw))."""
    if N < 0 or beta <= 0:
        raise ValueError("need N >= 0 and beta > 0")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    r = family.r
    ex = -beta * family.table(N, depth + 1).reshape(r, r**depth)
    return _from_exponents(ex, r, depth, f"classical N={N}", N)


def assemble_grand(weights: WeightSystem) -> TransferMatrix:
    """B_q for a finite weight system (countable systems are grouped by symbol)."""
    q = weights.grouped()
    return TransferMatrix(q.T, branch_table(weights.r, weights.depth), weights.r,
                          weights.depth, "grand")


def apply(T: TransferMatrix, f) -> CylinderFunction | np.ndarray:
    if isinstance(f, CylinderFunction):
        if f.depth != T.depth or f.r != T.r:
            raise ValueError(f"depth mismatch: operator {T.depth}, function {f.depth}")
        return CylinderFunction(_apply(T, f.values), T.r, T.depth)
    f = np.asarray(f, dtype=float)
    if f.shape[0] != T.size:
        raise ValueError(f"depth mismatch: expected {T.size} entries, got {f.shape[0]}")
    return _apply(T, f)


def _apply(T: TransferMatrix, f: np.ndarray) -> np.ndarray:
    return np.einsum("wj,wj->w", T.coeffs, f[T.src])


@dataclass(frozen=True, eq=False)
class SpectralSolution:
    lam: float
    h: CylinderFunction
    nu: CylinderMeasure
    primal_residual: float
    dual_residual: float
    ratio_spread: float
    rate: float
    iterations: int
    dual_iterations: int
    residual_history: np.ndarray = field(repr=False, default=None)

    @property
    def log_lambda(self) -> float:
        return math.log(self.lam)

    def summary(self) -> dict:
        return {
            "lambda": self.lam,
            "log_lambda": self.log_lambda,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "ratio_spread": self.ratio_spread,
            "rate": self.rate,
            "iterations": self.iterations,
            "dual_iterations": self.dual_iterations,
            "nu_h": self.nu.integrate(self.h),
        }


def _rate(history: list[float]) -> float:
    res = np.asarray(history, dtype=float)
    res = res[res > 1e-300]
    if res.size < 3:
        return 0.0
    ratios = res[1:] / res[:-1]
    tail = ratios[-min(10, ratios.size):]
    return float(np.clip(np.median(tail), 0.0, 1.0))


def power_iterate(T: TransferMatrix, tol: float = 1e-10, max_iter: int = 100_000) -> SpectralSolution:
    """Leading eigen-triple (lambda, h, nu) of a positive transfer operator.

    ``tol`` is clipped below at RESIDUAL_FLOOR, the rounding level of one
    application.
    """
    tol = max(tol, RESIDUAL_FLOOR)
    f = np.ones(T.size)
    history = []
    lam = math.nan
    residual = math.inf
    spread = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        g = _apply(T, f)
        ratios = g / f
        lam = float(np.exp(np.mean(np.log(ratios))))
        residual = float(np.max(np.abs(g - lam * f)) / (lam * np.max(f)))
        spread = float(ratios.max() / ratios.min() - 1.0)
        history.append(residual)
        f = g / np.max(g)
        if residual <= tol:
            break
    else:
        raise ConvergenceError(f"primal iteration did not reach tol={tol:g}",
                               primal_residual=residual, iterations=max_iter)
    h = f
    # final Rayleigh-style estimate on the normalised iterate
    g = _apply(T, h)
    ratios = g / h
    lam = float(np.exp(np.mean(np.log(ratios))))
    residual = float(np.max(np.abs(g - lam * h)) / (lam * np.max(h)))
    spread = float(ratios.max() / ratios.min() - 1.0)

    nu = np.full(T.size, 1.0 / T.size)
    dual_res = math.inf
    dit = 0
    for dit in range(1, max_iter + 1):
        m = T.apply_dual(nu)
        dual_res = float(np.abs(m - lam * nu).sum() / lam)
        nu = m / m.sum()
        if dual_res <= tol:
            break
    else:
        raise ConvergenceError(f"dual iteration did not reach tol={tol:g}",
                               primal_residual=residual, dual_residual=dual_res,
                               iterations=max_iter)
    h = h / np.dot(nu, h)
    return SpectralSolution(
        lam=lam,
        h=CylinderFunction(h, T.r, T.depth),
        nu=CylinderMeasure(nu, T.r, T.depth),
        primal_residual=residual,
        dual_residual=dual_res,
        ratio_spread=spread,
        rate=_rate(history),
        iterations=it,
        dual_iterations=dit,
        residual_history=np.asarray(history),
    )


def dual_eigen_lambda(T: TransferMatrix, nu: CylinderMeasure, tol: float = 1e-8) -> float:
    """lambda = (B* nu)(1) for the normalised dual fixed point nu."""
    m = T.apply_dual(nu.weights)
    lam = float(m.sum())
    defect = float(np.abs(m / lam - nu.weights).sum())
    if defect > tol:
        raise ConvergenceError(f"measure is not a dual fixed point (defect {defect:.3g})")
    return lam


@dataclass
class PartitionSequence:
    log_Z: np.ndarray
    averages: np.ndarray

    @property
    def n(self) -> np.ndarray:
        return np.arange(1, self.log_Z.size + 1)


def _word_idx(w: Word | int, T: TransferMatrix) -> int:
    if isinstance(w, Word):
        if w.r != T.r:
            raise ValueError("alphabet size mismatch")
        return w.truncate(T.depth).index()
    return int(w)


def partition_iterate(T: TransferMatrix, n: int, w: Word | int = 0) -> PartitionSequence:
    """log (T^m 1)(w) and (1/m) log (T^m 1)(w) for m = 1..n, in log space."""
    if n < 1:
        raise ValueError("n must be >= 1")
    i = _word_idx(w, T)
    f = np.ones(T.size)
    logscale = 0.0
    out = np.empty(n)
    for m in range(n):
        f = _apply(T, f)
        s = f.max()
        f /= s
        logscale += math.log(s)
        out[m] = logscale + math.log(f[i])
    return PartitionSequence(out, out / np.arange(1, n + 1))


def integral_via_ratio(T: TransferMatrix, A: CylinderFunction, n: int,
                       w: Word | int = 0, history: bool = False):
    """(T^n A)(w) / (T^n 1)(w); converges to the eigenmeasure integral of A."""
    if A.depth != T.depth:
        raise ValueError("depth mismatch")
    i = _word_idx(w, T)
    a = np.array(A.values, dtype=float)
    one = np.ones(T.size)
    seq = np.empty(n)
    for m in range(n):
        a = _apply(T, a)
        one = _apply(T, one)
        s = one.max()
        a /= s
        one /= s
        seq[m] = a[i] / one[i]
    return seq if history else float(seq[-1])


@dataclass
class CountablePartition:
    log_Z: np.ndarray
    averages: np.ndarray
    running_inf: np.ndarray

    @property
    def pressure(self) -> float:
        return float(self.running_inf[-1])


def countable_log_partition(weights: WeightSystem, m: int, budget: float = 2e7) -> float:
    """log Z_m(Q) with the sup over x taken on depth-k words.

    Only the last min(m, k) indices of a word see x through the depth-k
    weights; those are enumerated explicitly and maximised over x. Earlier
    positions see a state fixed by the word, so they are summed by a
    dual-operator recursion over depth-k states.
    """
    if weights.kind != "countable":
        raise ValueError("countable partition needs a countable weight system")
    r, k = weights.r, weights.depth
    n_idx = weights.n_branches
    s = min(m, k)
    if s * math.log(n_idx) + k * math.log(r) > math.log(budget):
        raise BudgetError(
            f"enumerating {n_idx}**{s} suffixes x {r}**{k} points exceeds budget {budget:g}")
    logq = weights.log_q
    sym = np.arange(n_idx) % r
    x = np.arange(r**k)
    S = np.zeros((1, r**k))
    Y = x[None, :].copy()
    for _ in range(s):
        # prepend one more index on the left of the suffix
        S = (S[:, None, :] + logq[np.arange(n_idx)[None, :, None], Y[:, None, :]]).reshape(-1, r**k)
        Y = branch_index(sym[None, :, None], Y[:, None, :], r, k).reshape(-1, r**k)
    M = S.max(axis=1)
    if m <= k:
        return float(logsumexp(M))
    state = Y[:, 0]
    logv = np.full(r**k, -np.inf)
    for u in np.unique(state):
        logv[u] = logsumexp(M[state == u])
    G = weights.grouped()  # (r, r**k)
    src = branch_table(r, k)
    v_scale = np.nanmax(logv[np.isfinite(logv)])
    v = np.where(np.isfinite(logv), np.exp(logv - v_scale), 0.0)
    logscale = v_scale
    for _ in range(m - k):
        v = np.bincount(src.ravel(), weights=(G.T * v[:, None]).ravel(), minlength=r**k)
        t = v.sum()
        v /= t
        logscale += math.log(t)
    return float(logscale)


def countable_partition(weights: WeightSystem, n: int, budget: float = 2e7) -> CountablePartition:
    logs = np.array([countable_log_partition(weights, m, budget) for m in range(1, n + 1)])
    avg = logs / np.arange(1, n + 1)
    return CountablePartition(logs, avg, np.minimum.accumulate(avg))


def dense_spectrum(T: TransferMatrix):
    """Dense oracle: (spectral radius, right vector, left vector) via LAPACK."""
    from scipy import linalg

    D = T.to_dense()
    vals, vl, vr = linalg.eig(D, left=True, right=True)
    i = int(np.argmax(np.abs(vals)))
    lam = float(vals[i].real)
    h = np.abs(vr[:, i].real)
    nu = np.abs(vl[:, i].real)
    nu = nu / nu.sum()
    h = h / np.dot(nu, h)
    return lam, h, nu


def refinement_sequence(make_operator, depths: Iterable[int], tol: float = 1e-12) -> np.ndarray:
    """log lambda for each depth; ``make_operator(depth)`` builds the operator."""
    return np.array([power_iterate(make_operator(k), tol=tol).log_lambda for k in depths])

"""Potential families A_N, admissibility diagnostics, the grand-canonical
potential psi and the finite / countable IFS weight systems built from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

from .symbolic import (
    DIAMETER,
    CylinderFunction,
    Word,
    all_words,
    discrete_lipschitz,
    oscillation_profile,
)

#: exponents above this are reported instead of overflowing
MAX_EXPONENT = 700.0
#: hard cap on the number of particle numbers summed
MAX_TERMS = 100_000


class AdmissibilityError(ValueError):
    """Raised when a family cannot be certified for the requested (beta, mu)."""


class OverflowDiagnostic(ArithmeticError):
    """A summand exp(-beta (A_N(w) - mu N)) would overflow."""

    def __init__(self, N: int, word: tuple[int, ...], exponent: float):
        self.N = N
        self.word = word
        self.exponent = exponent
        super().__init__(f"exponent {exponent:.3g} > {MAX_EXPONENT} at N={N}, word={word}")


class MonotonicityError(ValueError):
    """Sampled increments A_{N+1} - A_N went negative."""


@dataclass(frozen=True, eq=False)
class PotentialFamily:
    """A family of potentials N -> A_N on the full shift over r symbols.

    ``energy(N, words)`` receives a symbol matrix (one word per row) and
    returns A_N on each row. ``M`` is the declared uniform Lipschitz bound,
    ``Kprime`` and ``delta`` the declared linear lower bound
    A_N >= Kprime * N + delta used to certify the particle-number tail.
    """

    energy: Callable[[int, np.ndarray], np.ndarray]
    r: int
    M: float
    Kprime: float
    delta: float | None = None
    label: str = "custom"
    monotone: bool = False

    def __post_init__(self):
        if self.delta is None:
            object.__setattr__(self, "delta", self.M * DIAMETER / 2)
        for name in ("M", "Kprime", "delta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"declared constant {name} must be finite")

    def table(self, N: int, depth: int) -> np.ndarray:
        """A_N on every depth-``depth`` word, in index order."""
        vals = np.asarray(self.energy(int(N), _words(self.r, depth)), dtype=float)
        return np.broadcast_to(vals, (self.r**depth,)).astype(float)

    def function(self, N: int, depth: int) -> CylinderFunction:
        return CylinderFunction(self.table(N, depth), self.r, depth)

    def evaluate(self, N: int, word: Word) -> float:
        if word.r != self.r:
            raise ValueError("alphabet size mismatch")
        row = np.array([word.symbols], dtype=int).reshape(1, len(word))
        return float(np.asarray(self.energy(int(N), row), dtype=float).reshape(-1)[0])

    def with_constants(self, **kwargs) -> "PotentialFamily":
        params = dict(energy=self.energy, r=self.r, M=self.M, Kprime=self.Kprime,
                      delta=self.delta, label=self.label, monotone=self.monotone)
        params.update(kwargs)
        return PotentialFamily(**params)


@lru_cache(maxsize=32)
def _words(r: int, depth: int) -> np.ndarray:
    w = all_words(r, depth)
    w.setflags(write=False)
    return w


def _observable(E, r: int):
    """Turn a CylinderFunction, scalar or callable into words -> values."""
    if isinstance(E, CylinderFunction):
        if E.r != r:
            raise ValueError("alphabet size mismatch")
        table, d = E.values, E.depth

        def evaluate(words):
            n, k = words.shape
            if k < d:
                words = np.hstack([words, np.zeros((n, d - k), dtype=int)])
            idx = np.zeros(n, dtype=np.int64)
            for col in range(d):
                idx = idx * r + words[:, col]
            return table[idx]

        return evaluate, float(table.min()), (discrete_lipschitz(E) if d >= 1 else 0.0)
    if callable(E):
        return E, None, None
    c = float(E)
    return (lambda words: np.full(words.shape[0], c)), c, 0.0


def _default_delta(floor: float, M: float) -> float:
    """delta for the bound A_0 > delta, given floor = min A_0.

    Uses M diam / 2 when the floor clears it, else half the floor. A floor
    <= 0 admits no strict certificate with delta >= 0; the floor itself is
    returned so the (non-strict) tail estimate stays valid.
    """
    half_diam = M * DIAMETER / 2
    if floor > half_diam:
        return half_diam
    return floor / 2 if floor > 0 else floor


def constant(c: float, r: int = 2, *, M: float = 0.0, Kprime: float = 0.0,
             delta: float | None = None) -> PotentialFamily:
    """A_N = c for every N."""
    c = float(c)
    if delta is None:
        delta = _default_delta(c, M)
    return PotentialFamily(lambda N, words: np.full(words.shape[0], c), r, M, Kprime,
                           delta, label=f"constant({c:g})", monotone=True)


def per_particle(E, r: int = 2, *, M: float | None = None, Kprime: float | None = None,
                 delta: float = 0.0, min_E: float | None = None) -> PotentialFamily:
    """A_N = N * E: every particle carries energy E(x).

    The Lipschitz constant of A_N is N Lip(E), so the family is uniformly
    Lipschitz only for constant E. The default M is Lip(E); ``check_h1``
    reports the violation for larger N.
    """
    f, emin, lip = _observable(E, r)
    emin = emin if min_E is None else min_E
    if M is None:
        if lip is None:
            raise ValueError("declare M for callable observables")
        M = lip
    if Kprime is None:
        if emin is None:
            raise ValueError("declare Kprime (or min_E) for callable observables")
        Kprime = emin
    monotone = emin is not None and emin >= 0
    return PotentialFamily(lambda N, words: N * np.asarray(f(words), dtype=float), r, M,
                           Kprime, delta, label="per_particle", monotone=monotone)


def shared(E, r: int = 2, *, M: float | None = None, Kprime: float | None = None,
           delta: float | None = None, min_E: float | None = None) -> PotentialFamily:
    """A_N = E / (N + 1)."""
    f, emin, lip = _observable(E, r)
    emin = emin if min_E is None else min_E
    if M is None:
        if lip is None:
            raise ValueError("declare M for callable observables")
        M = lip
    if delta is None:
        if emin is None:
            raise ValueError("declare delta (or min_E) for callable observables")
        delta = _default_delta(emin, M)
    if Kprime is None:
        if emin is None:
            raise ValueError("declare Kprime (or min_E) for callable observables")
        N = np.arange(1, 100_001, dtype=float)
        Kprime = float(np.min((emin / (N + 1) - delta) / N))
        Kprime -= 1e-9 * (1 + abs(Kprime))
    return PotentialFamily(lambda N, words: np.asarray(f(words), dtype=float) / (N + 1), r,
                           M, Kprime, delta, label="shared", monotone=False)


def affine(a: float, b: float, E=0.0, r: int = 2, *, M: float | None = None,
           Kprime: float | None = None, delta: float | None = None,
           min_E: float | None = None) -> PotentialFamily:
    """A_N = a N + b + E."""
    f, emin, lip = _observable(E, r)
    emin = emin if min_E is None else min_E
    if M is None:
        if lip is None:
            raise ValueError("declare M for callable observables")
        M = lip
    if Kprime is None:
        Kprime = float(a)
    if delta is None:
        if emin is None:
            raise ValueError("declare delta (or min_E) for callable observables")
        delta = _default_delta(b + emin, M)
    return PotentialFamily(lambda N, words: a * N + b + np.asarray(f(words), dtype=float),
                           r, M, Kprime, delta, label=f"affine({a:g},{b:g})",
                           monotone=a >= 0)


# ---------------------------------------------------------------------------
# admissibility

@dataclass
class CheckFragment:
    name: str
    verdict: str
    value: float
    details: dict = field(default_factory=dict)


@dataclass
class AdmissibilityReport:
    h1_max_observed_lip: float
    h2_root_margin: float
    h2_ratio_margin: float | None
    h3_violations: list
    n_max_used: int
    verdicts: dict
    notes: list = field(default_factory=list)

    @property
    def overall(self) -> str:
        v = self.verdicts.values()
        if "fail" in v:
            return "fail"
        if "inconclusive" in v:
            return "inconclusive"
        return "pass"

    def to_dict(self) -> dict:
        return {
            "h1_max_observed_lip": self.h1_max_observed_lip,
            "h2_root_margin": self.h2_root_margin,
            "h2_ratio_margin": self.h2_ratio_margin,
            "h3_violations": [[int(n), list(map(int, w))] for n, w in self.h3_violations],
            "n_max_used": self.n_max_used,
            "verdicts": dict(self.verdicts),
            "overall": self.overall,
            "notes": list(self.notes),
        }


def check_h1(family: PotentialFamily, depth: int, n_max: int) -> CheckFragment:
    """Uniform Lipschitz bound: max_N Lip(A_N) <= M over N <= n_max."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    lips = [discrete_lipschitz(family.table(N, depth), family.r, depth)
            for N in range(n_max + 1)]
    observed = max(lips)
    verdict = "pass" if observed <= family.M * (1 + 1e-12) + 1e-12 else "fail"
    return CheckFragment("H1", verdict, observed,
                         {"declared_M": family.M, "argmax_N": int(np.argmax(lips)),
                          "n_max": n_max, "depth": depth})


def check_h2_root(family: PotentialFamily, mu: float, w: Word, n_max: int) -> float:
    """Estimate limsup_N A_N(w)/N - mu from the window N in [n_max/2, n_max]."""
    if mu >= 0:
        raise ValueError("chemical potential must be negative")
    lo = max(1, n_max // 2)
    ratios = [family.evaluate(N, w) / N for N in range(lo, max(n_max, lo) + 1)]
    return max(ratios) - mu


def h2_root_margins(family: PotentialFamily, mu: float, depth: int, n_max: int) -> np.ndarray:
    """Root-test margin for every depth-``depth`` word."""
    if mu >= 0:
        raise ValueError("chemical potential must be negative")
    lo = max(1, n_max // 2)
    ratios = np.array([family.table(N, depth) / N for N in range(lo, max(n_max, lo) + 1)])
    return ratios.max(axis=0) - mu


def check_h2_ratio(family: PotentialFamily, mu: float, w: Word, n_max: int,
                   tol: float = 1e-12) -> float:
    """min_N A_{N+1}(w) - A_N(w) - mu for a family non-decreasing in N."""
    if mu >= 0:
        raise ValueError("chemical potential must be negative")
    values = np.array([family.evaluate(N, w) for N in range(n_max + 1)])
    inc = np.diff(values)
    if not family.monotone or np.any(inc < -tol):
        bad = int(np.argmin(inc)) if inc.size else 0
        raise MonotonicityError(
            f"{family.label}: A_N not non-decreasing (increment {inc[bad]:.3g} at N={bad})")
    return float(inc.min() - mu)


def check_h3(family: PotentialFamily, mu: float, depth: int, n_max: int) -> CheckFragment:
    """Strict bound A_N(w) > Kprime N + delta on all sampled (N, w)."""
    violations = []
    for N in range(n_max + 1):
        bad = np.nonzero(~(family.table(N, depth) > family.Kprime * N + family.delta))[0]
        words = _words(family.r, depth)
        violations.extend((N, tuple(int(s) for s in words[i])) for i in bad)
    if family.Kprime <= mu:
        verdict = "fail"
    else:
        verdict = "fail" if violations else "pass"
    return CheckFragment("H3", verdict, float(len(violations)),
                         {"violations": violations, "Kprime": family.Kprime,
                          "delta": family.delta, "mu": mu,
                          "delta_nonnegative": family.delta >= 0})


def tail_certificate_valid(family: PotentialFamily, depth: int, n_max: int) -> bool:
    """Non-strict A_N >= Kprime N + delta on the sampled range.

    This is what the geometric tail estimate actually uses."""
    return all(np.all(family.table(N, depth) >= family.Kprime * N + family.delta - 1e-12)
               for N in range(n_max + 1))


def admissibility_report(family: PotentialFamily, beta: float, mu: float, depth: int,
                         n_max: int = 40, margin_tol: float = 1e-9) -> AdmissibilityReport:
    h1 = check_h1(family, depth, n_max)
    margins = h2_root_margins(family, mu, depth, n_max)
    root_margin = float(margins.min())
    if root_margin > margin_tol:
        h2 = "pass"
    elif root_margin < -margin_tol:
        h2 = "fail"
    else:
        h2 = "inconclusive"
    notes = [f"H2 limsup estimated on N in [{max(1, n_max // 2)}, {n_max}] "
             f"over all depth-{depth} words only"]
    ratio_margin = None
    if family.monotone:
        words = _words(family.r, depth)
        try:
            ratio_margin = min(check_h2_ratio(family, mu, Word(w, family.r), n_max)
                               for w in words)
        except MonotonicityError as exc:
            notes.append(f"ratio test skipped: {exc}")
    h3 = check_h3(family, mu, depth, n_max)
    if h3.details["delta_nonnegative"]:
        notes.append(f"H3 certificate: Kprime={family.Kprime:g}, delta={family.delta:g}")
    else:
        notes.append(f"H3 certificate uses negative delta={family.delta:g}")
    return AdmissibilityReport(
        h1_max_observed_lip=h1.value,
        h2_root_margin=root_margin,
        h2_ratio_margin=ratio_margin,
        h3_violations=h3.details["violations"],
        n_max_used=n_max,
        verdicts={"H1": h1.verdict, "H2": h2, "H3": h3.verdict},
        notes=notes,
    )


# ---------------------------------------------------------------------------
# tail certificate and psi

def geometric_tail(beta: float, rate: float, delta: float, n_max: int) -> float:
    """sum_{N > n_max} exp(-beta (rate N + delta))."""
    log_tail = -beta * delta - beta * rate * (n_max + 1) - math.log1p(-math.exp(-beta * rate))
    return math.exp(log_tail) if log_tail < MAX_EXPONENT else math.inf


def truncation_bound(family: PotentialFamily | None, beta: float, mu: float, eps: float,
                     *, Kprime: float | None = None, delta: float | None = None,
                     max_terms: int = MAX_TERMS) -> int:
    """Smallest N_max whose geometric tail bound is <= eps."""
    Kp = family.Kprime if Kprime is None else Kprime
    dl = family.delta if delta is None else delta
    if beta <= 0 or eps <= 0:
        raise ValueError("beta and eps must be positive")
    rate = Kp - mu
    if rate <= 0:
        raise AdmissibilityError(f"no tail certificate: Kprime={Kp:g} <= mu={mu:g}")
    head = -beta * dl - math.log1p(-math.exp(-beta * rate)) - math.log(eps)
    n = max(0, math.ceil(head / (beta * rate)) - 1)
    while n > 0 and geometric_tail(beta, rate, dl, n - 1) <= eps:
        n -= 1
    while geometric_tail(beta, rate, dl, n) > eps:
        n += 1
    if n > max_terms:
        raise AdmissibilityError(
            f"tail certificate needs N_max={n} > {max_terms} terms (mu too close to Kprime)")
    return n


def _exponents(family: PotentialFamily, beta: float, mu: float, N: int, depth: int) -> np.ndarray:
    ex = -beta * (family.table(N, depth) - mu * N)
    if np.any(ex > MAX_EXPONENT) or np.any(np.isnan(ex)):
        i = int(np.nanargmax(np.where(np.isnan(ex), np.inf, ex)))
        raise OverflowDiagnostic(N, tuple(int(s) for s in _words(family.r, depth)[i]),
                                 float(ex[i]))
    return ex


def compensated_sum(terms) -> np.ndarray:
    """Neumaier summation along the first axis, in the given order."""
    total = None
    comp = None
    for t in terms:
        t = np.asarray(t, dtype=float)
        if total is None:
            total = t.copy()
            comp = np.zeros_like(total)
            continue
        s = total + t
        big = np.abs(total) >= np.abs(t)
        comp += np.where(big, (total - s) + t, (t - s) + total)
        total = s
    return total + comp


@dataclass(frozen=True, eq=False)
class GrandPotential:
    psi: CylinderFunction
    n_max: int
    tail_bound: float
    beta: float
    mu: float


def grand_potential(family: PotentialFamily, beta: float, mu: float, depth: int,
                    eps: float = 1e-12, n_max: int | None = None) -> GrandPotential:
    """psi(w) = sum_{N <= N_max} exp(-beta (A_N(w) - mu N)) on depth-k words."""
    if mu >= 0:
        raise AdmissibilityError("chemical potential must be negative")
    if n_max is None:
        n_max = truncation_bound(family, beta, mu, eps)
    rate = family.Kprime - mu
    tail = geometric_tail(beta, rate, family.delta, n_max) if rate > 0 else math.inf
    vals = compensated_sum(np.exp(_exponents(family, beta, mu, N, depth))
                           for N in range(n_max + 1))
    if not np.all(vals > 0):
        raise AdmissibilityError("grand-canonical potential underflowed to zero")
    return GrandPotential(CylinderFunction(vals, family.r, depth), n_max, tail, beta, mu)


# ---------------------------------------------------------------------------
# weight systems

@dataclass(frozen=True, eq=False)
class WeightSystem:
    """Weights of an IFS over the branch maps w -> (j mod r) w.

    ``log_q[j, w]`` is the log-weight of branch j on depth-k word w. For the
    finite kind j ranges over the alphabet and ``q`` holds the weights
    themselves (psi o phi_j); for the countable kind j ranges over
    0..J_max and particle number xi(j) = j // r.
    """

    kind: str
    beta: float
    mu: float
    r: int
    depth: int
    log_q: np.ndarray
    n_max: int
    tail_bound: float
    psi: GrandPotential | None = None
    q_values: np.ndarray | None = None
    label: str = ""

    @property
    def n_branches(self) -> int:
        return self.log_q.shape[0]

    @property
    def q(self) -> np.ndarray:
        return self.q_values if self.q_values is not None else np.exp(self.log_q)

    @property
    def j_max(self) -> int:
        return self.n_branches - 1

    def branch_symbol(self, j):
        return np.asarray(j) % self.r

    def weight(self, j: int) -> CylinderFunction:
        return CylinderFunction(self.q[j], self.r, self.depth)

    def log_weight(self, j: int) -> CylinderFunction:
        return CylinderFunction(self.log_q[j], self.r, self.depth)

    def grouped(self) -> np.ndarray:
        """Per-symbol weights sum_{j = a mod r} exp(log_q[j]); shape (r, r**k)."""
        if self.kind == "finite":
            return self.q
        out = []
        for a in range(self.r):
            rows = self.log_q[a::self.r]
            m = rows.max(axis=0)
            out.append(np.exp(m) * compensated_sum(np.exp(rows - m)))
        return np.array(out)


def xi(j, r: int):
    """Particle number carried by countable branch j."""
    j = np.asarray(j)
    return (j - j % r) // r


def finite_weights(family: PotentialFamily, beta: float, mu: float, depth: int,
                   eps: float = 1e-12, n_max: int | None = None) -> WeightSystem:
    """q_j = psi o phi_j on depth-k words.

    psi is tabulated one level deeper so that q_j(w) = psi(jw) is exact.
    """
    gp = grand_potential(family, beta, mu, depth + 1, eps, n_max)
    q = gp.psi.values.reshape(family.r, family.r**depth).copy()
    q.setflags(write=False)
    return WeightSystem("finite", beta, mu, family.r, depth, np.log(q), gp.n_max,
                        gp.tail_bound, psi=gp, q_values=q, label=family.label)


def countable_weights(family: PotentialFamily, beta: float, mu: float, depth: int,
                      j_max: int | None = None, eps: float = 1e-12) -> WeightSystem:
    """log q_j(w) = -beta (A_{xi(j)}((j mod r) w) - xi(j) mu), j = 0..J_max."""
    r = family.r
    if j_max is None:
        n_max = truncation_bound(family, beta, mu, eps)
        j_max = r * (n_max + 1) - 1
    n_full = (j_max + 1) // r - 1
    rows = []
    for N in range(j_max // r + 1):
        ex = _exponents(family, beta, mu, N, depth + 1).reshape(r, r**depth)
        rows.append(ex)
    log_q = np.concatenate(rows, axis=0)[: j_max + 1].copy()
    log_q.setflags(write=False)
    rate = family.Kprime - mu
    tail = r * geometric_tail(beta, rate, family.delta, n_full) if rate > 0 else math.inf
    return WeightSystem("countable", beta, mu, r, depth, log_q, n_full, tail,
                        label=family.label)


# ---------------------------------------------------------------------------
# regularity of the weights

@dataclass
class DiniResult:
    t: np.ndarray
    modulus: np.ndarray
    max_ratio: float
    integral: float


def dini_modulus_check(weights: WeightSystem, t_grid: np.ndarray | None = None) -> DiniResult:
    """Modulus of continuity rho(log q_j, t), maximised over branches."""
    if weights.kind != "finite":
        raise ValueError("Dini check is defined for finite weight systems")
    if t_grid is None:
        t_grid = np.linspace(0.0, 1.0, 20_001)
    t_grid = np.asarray(t_grid, dtype=float)
    r, k = weights.r, weights.depth
    osc = np.max([oscillation_profile(weights.log_q[j], r, k) for j in range(r)], axis=0)
    rho = np.zeros_like(t_grid)
    pos = t_grid > 0
    # d(u, v) <= t  <=>  first mismatch at n >= ceil(log2(1/t))
    n_t = np.ones(t_grid.shape, dtype=int) * (k + 1)
    n_t[pos] = np.maximum(1, np.ceil(-np.log2(t_grid[pos]) - 1e-12)).astype(int)
    inside = pos & (n_t <= k)
    rho[inside] = osc[n_t[inside] - 1]
    ratio = np.zeros_like(t_grid)
    ratio[pos] = rho[pos] / t_grid[pos]
    integral = float(trapezoid(ratio, t_grid))
    return DiniResult(t_grid, rho, float(ratio.max()), integral)


@dataclass
class HolderVariation:
    V: np.ndarray
    V_alpha: float
    summable: bool
    alpha: float


def holder_variation(weights: WeightSystem, n_max: int | None = None,
                     alpha: float = math.log(2)) -> HolderVariation:
    """V_n(Q) for n = 1..n_max on the depth-k representation.

    The argument of q_{w_1} is phi_{sigma(w)}(x), whose first n-1 symbols are
    fixed by w; the sup over x != y is the oscillation of q_{w_1} over a
    cylinder of length n-1, maximised over the branch index.
    """
    if weights.kind != "countable":
        raise ValueError("Holder variation is defined for countable weight systems")
    r, k = weights.r, weights.depth
    n_max = k if n_max is None else n_max
    osc = np.max([oscillation_profile(weights.log_q[j], r, k)
                  for j in range(weights.n_branches)], axis=0)
    V = np.zeros(n_max)
    for n in range(1, n_max + 1):
        if n <= k:
            V[n - 1] = osc[n - 1] * math.exp(alpha * (n - 1))
    summable = bool(math.isfinite(weights.tail_bound))
    return HolderVariation(V, float(V.max()) if V.size else 0.0, summable, alpha)

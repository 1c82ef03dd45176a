"""Grand-canonical statistics for scalar energy sequences, and the finite
canonical / maximum-entropy problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .potentials import AdmissibilityError, truncation_bound

#: Boltzmann constant in J/K
BOLTZMANN_SI = 1.38066e-23


class InfeasibleConstraint(ValueError):
    """MaxEnt constraint level outside the attainable range."""


@dataclass(frozen=True)
class GrandCanonicalEnsemble:
    """Particle-number ensemble with energies A_N.

    ``A`` maps an integer array of particle numbers to energies. The tail
    beyond N_max is certified by A_N >= Kprime N + delta with Kprime > mu.
    """

    beta: float
    mu: float
    A: Callable[[np.ndarray], np.ndarray]
    Kprime: float
    delta: float = 0.0
    eps: float = 1e-12
    V: float = 1.0
    k_B: float = 1.0
    label: str = "custom"

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.mu >= 0:
            raise AdmissibilityError("chemical potential must be negative")
        if self.V <= 0:
            raise ValueError("volume must be positive")

    @property
    def n_max(self) -> int:
        return truncation_bound(None, self.beta, self.mu, self.eps,
                                Kprime=self.Kprime, delta=self.delta)

    @property
    def temperature(self) -> float:
        return 1.0 / (self.k_B * self.beta)

    def replace(self, **kw) -> "GrandCanonicalEnsemble":
        params = dict(beta=self.beta, mu=self.mu, A=self.A, Kprime=self.Kprime,
                      delta=self.delta, eps=self.eps, V=self.V, k_B=self.k_B,
                      label=self.label)
        params.update(kw)
        return GrandCanonicalEnsemble(**params)

    def energies(self, n_max: int | None = None) -> np.ndarray:
        n_max = self.n_max if n_max is None else n_max
        return np.asarray(self.A(np.arange(n_max + 1)), dtype=float).reshape(-1)


def energy_per_particle(E: float, beta: float, mu: float, **kw) -> GrandCanonicalEnsemble:
    """A_N = N E."""
    return GrandCanonicalEnsemble(beta, mu, lambda N: N * float(E), Kprime=float(E),
                                  label=f"per_particle({E:g})", **kw)


def zero_energy(beta: float, mu: float, **kw) -> GrandCanonicalEnsemble:
    return GrandCanonicalEnsemble(beta, mu, lambda N: np.zeros(np.shape(N)), Kprime=0.0,
                                  label="zero", **kw)


def _log_terms(e: GrandCanonicalEnsemble, n_max: int | None = None) -> np.ndarray:
    n_max = e.n_max if n_max is None else n_max
    N = np.arange(n_max + 1)
    return e.beta * N * e.mu - e.beta * e.energies(n_max)


def grand_partition(e: GrandCanonicalEnsemble, n_max: int | None = None) -> float:
    """Z = sum_N exp(beta N mu) exp(-beta A_N), truncated with tail <= eps."""
    return math.fsum(np.exp(_log_terms(e, n_max)))


def log_grand_partition(e: GrandCanonicalEnsemble, n_max: int | None = None) -> float:
    return float(logsumexp(_log_terms(e, n_max)))


def particle_distribution(e: GrandCanonicalEnsemble, n_max: int | None = None) -> np.ndarray:
    """P_N = exp(beta N mu - beta A_N) / Z for N = 0..N_max."""
    lt = _log_terms(e, n_max)
    p = np.exp(lt - logsumexp(lt))
    return p / math.fsum(p)


@dataclass
class Derivatives:
    d_beta_fd: float
    d_beta_expect: float
    d_mu_fd: float
    d_mu_expect: float
    mean_N: float
    mean_A: float

    @property
    def gap_beta(self) -> float:
        return abs(self.d_beta_fd - self.d_beta_expect)

    @property
    def gap_mu(self) -> float:
        return abs(self.d_mu_fd - self.d_mu_expect)


def moments(e: GrandCanonicalEnsemble, n_max: int | None = None) -> tuple[float, float]:
    """(<N>, <A>) under the particle-number distribution."""
    n_max = e.n_max if n_max is None else n_max
    p = particle_distribution(e, n_max)
    N = np.arange(n_max + 1)
    return math.fsum(p * N), math.fsum(p * e.energies(n_max))


def log_partition_derivatives(e: GrandCanonicalEnsemble, step: float = 1e-4) -> Derivatives:
    """Central differences of log Z in beta and mu against the expectation forms
    mu <N> - <A> and beta <N>.

    The truncation level is frozen at the value for the shifted node with the
    slowest tail so both sides of each difference sum the same terms.
    """
    if e.beta - step <= 0 or e.mu + step >= 0:
        raise ValueError("step leaves the admissible region")
    n_max = max(e.replace(beta=e.beta - step).n_max, e.replace(mu=e.mu + step).n_max)
    mean_N, mean_A = moments(e, n_max)
    lz = lambda ens: log_grand_partition(ens, n_max)
    d_beta = (lz(e.replace(beta=e.beta + step)) - lz(e.replace(beta=e.beta - step))) / (2 * step)
    d_mu = (lz(e.replace(mu=e.mu + step)) - lz(e.replace(mu=e.mu - step))) / (2 * step)
    return Derivatives(d_beta, e.mu * mean_N - mean_A, d_mu, e.beta * mean_N, mean_N, mean_A)


def gas_pressure(e: GrandCanonicalEnsemble) -> float:
    """p = k_B T log Z / V."""
    return e.k_B * e.temperature * log_grand_partition(e) / e.V


def effective_particle_number(e: GrandCanonicalEnsemble) -> float:
    """N_eff with p V = k_B N_eff T; equals log Z."""
    return gas_pressure(e) * e.V / (e.k_B * e.temperature)


# ---------------------------------------------------------------------------
# finite canonical / MaxEnt

@dataclass(frozen=True)
class FiniteCanonical:
    A: tuple
    beta: float = 1.0

    def __init__(self, A, beta: float = 1.0):
        A = tuple(float(a) for a in A)
        if len(A) < 2:
            raise ValueError("need at least two states")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "beta", float(beta))

    @property
    def d(self) -> int:
        return len(self.A)

    @property
    def energies(self) -> np.ndarray:
        return np.array(self.A)


def canonical_distribution(c: FiniteCanonical, beta: float | None = None) -> np.ndarray:
    beta = c.beta if beta is None else beta
    ex = -beta * c.energies
    p = np.exp(ex - ex.max())
    return p / p.sum()


def canonical_log_partition(c: FiniteCanonical, beta: float | None = None) -> float:
    beta = c.beta if beta is None else beta
    return float(logsumexp(-beta * c.energies))


def shannon_entropy(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def mean_energy(c: FiniteCanonical, beta: float) -> float:
    return float(np.dot(canonical_distribution(c, beta), c.energies))


def maxent_solve(c: FiniteCanonical, alpha: float, xtol: float = 1e-12) -> tuple[np.ndarray, float]:
    """Maximum-entropy distribution with mean energy alpha, as canonical(beta)."""
    A = c.energies
    lo, hi = A.min(), A.max()
    if hi - lo == 0:
        if alpha == lo:
            return np.full(c.d, 1.0 / c.d), 0.0
        raise InfeasibleConstraint(f"constant energies {lo:g} cannot have mean {alpha:g}")
    if not lo < alpha < hi:
        raise InfeasibleConstraint(
            f"alpha={alpha:g} outside the open interval ({lo:g}, {hi:g})")
    f = lambda b: mean_energy(c, b) - alpha  # strictly decreasing in b
    B = 1.0
    while not (f(-B) > 0 > f(B)):
        B *= 2.0
        if B > 1e12:
            raise InfeasibleConstraint("could not bracket the multiplier")
    a, b = -B, B
    if f(0.0) == 0.0:
        return canonical_distribution(c, 0.0), 0.0
    while b - a > xtol * max(1.0, abs(a) + abs(b)):
        mid = 0.5 * (a + b)
        if f(mid) > 0:
            a = mid
        else:
            b = mid
        if mid in (a, b) and b - a <= 2 * np.spacing(mid):
            break
    beta = 0.5 * (a + b)
    return canonical_distribution(c, beta), beta


@dataclass
class FreeEnergyCheck:
    value: float
    minus_log_Z_over_beta: float
    minimality_gap: float


def free_energy(c: FiniteCanonical, p: np.ndarray, beta: float | None = None) -> float:
    beta = c.beta if beta is None else beta
    return float(np.dot(p, c.energies) - shannon_entropy(p) / beta)


def simplex_grid(d: int, step: float = 0.01) -> np.ndarray:
    """All points of the probability simplex with coordinates in step * N."""
    if d > 4:
        raise ValueError("simplex grid oracle is limited to d <= 4")
    n = int(round(1 / step))
    pts = []

    def rec(prefix, left, k):
        if k == 1:
            pts.append(prefix + [left])
            return
        for i in range(left + 1):
            rec(prefix + [i], left - i, k - 1)

    rec([], n, d)
    return np.array(pts, dtype=float) / n


def grid_entropies(P: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return -np.sum(np.where(P > 0, P * np.log(P), 0.0), axis=1)


def free_energy_check(c: FiniteCanonical, p: np.ndarray, step: float = 0.01) -> FreeEnergyCheck:
    """F(p) against -log Z / beta and the best simplex grid point."""
    if c.beta <= 0:
        raise ValueError("beta must be positive")
    F = free_energy(c, p)
    grid = simplex_grid(c.d, step)
    F_grid = grid @ c.energies - grid_entropies(grid) / c.beta
    return FreeEnergyCheck(F, -canonical_log_partition(c) / c.beta, float(F - F_grid.min()))

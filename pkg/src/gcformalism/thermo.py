"""Pressure, holonomic equilibrium measures, variational entropy and the
smoothness sweep over (beta, mu).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import logsumexp, softmax

from .potentials import (
    AdmissibilityError,
    OverflowDiagnostic,
    PotentialFamily,
    WeightSystem,
    finite_weights,
)
from .symbolic import CylinderFunction, CylinderMeasure, branch_table
from .transfer import (
    ConvergenceError,
    SpectralSolution,
    TransferMatrix,
    assemble_classical,
    assemble_grand,
    power_iterate,
)


# ---------------------------------------------------------------------------
# classical pressure

def classical_pressure(family: PotentialFamily, N: int, beta: float, depth: int,
                       tol: float = 1e-12) -> float:
    """P_N(beta) = log of the leading eigenvalue of the Ruelle operator of -beta A_N."""
    return power_iterate(assemble_classical(family, N, beta, depth), tol=tol).log_lambda


@dataclass
class MarkovCheck:
    log_lambda: float
    entropy: float
    mean_energy: float
    gap: float
    transitions: np.ndarray
    stationary: np.ndarray


def _two_symbol_table(family: PotentialFamily, N: int) -> np.ndarray:
    r = family.r
    t2 = family.table(N, 2)
    t3 = family.table(N, 3)
    if not np.allclose(np.repeat(t2, r), t3, rtol=0, atol=1e-12):
        raise ValueError("potential is not measurable on its first two symbols")
    return t2.reshape(r, r)  # [j, w] -> A(j w)


def markov_variational_check(family: PotentialFamily, N: int, beta: float) -> MarkovCheck:
    """|h(rho) - beta * int A_N d rho - log lambda| for the Markov equilibrium.

    Uses a dense eigensolver on the depth-1 reduction, where the
    equilibrium is an exact Markov chain and its entropy has a closed form.
    """
    r = family.r
    if r > 4:
        raise ValueError("Markov reduction check limited to r <= 4")
    A = _two_symbol_table(family, N)
    Mx = np.exp(-beta * A.T)  # [w, j]
    vals, vl, vr = linalg.eig(Mx, left=True, right=True)
    i = int(np.argmax(vals.real))
    lam = float(vals[i].real)
    h = np.abs(vr[:, i].real)
    nu = np.abs(vl[:, i].real)
    P = Mx * h[None, :] / (lam * h[:, None])
    pi = nu * h
    pi /= pi.sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(P > 0, P * np.log(P), 0.0)
    entropy = float(-np.sum(pi[:, None] * plogp))
    energy = float(np.sum(pi[:, None] * P * A.T))
    gap = abs(entropy - beta * energy - math.log(lam))
    return MarkovCheck(math.log(lam), entropy, energy, gap, P, pi)


# ---------------------------------------------------------------------------
# holonomic measures

@dataclass(frozen=True, eq=False)
class HolonomicMeasure:
    """Base measure on depth-k words plus branch kernel p_j(w).

    The one-step lift to depth k+1 puts mass base(w) p_j(w) on the word jw.
    """

    base: CylinderMeasure
    kernel: np.ndarray
    renormalisation: float = 0.0

    def __post_init__(self):
        K = np.array(self.kernel, dtype=float)
        if K.shape != (self.base.weights.size, self.base.r):
            raise ValueError(f"kernel shape {K.shape} does not match base")
        if np.any(K < 0) or np.max(np.abs(K.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("kernel rows must be probability vectors")
        K.setflags(write=False)
        object.__setattr__(self, "kernel", K)

    @property
    def r(self) -> int:
        return self.base.r

    @property
    def depth(self) -> int:
        return self.base.depth

    def lift(self) -> np.ndarray:
        """Weights on depth-(k+1) words, index j * r**k + w."""
        return (self.kernel * self.base.weights[:, None]).T.reshape(-1)

    def branch_integral(self, values: np.ndarray) -> float:
        """sum_w base(w) sum_j p_j(w) values[j, w]."""
        return float(np.sum(self.kernel.T * self.base.weights[None, :] * values))


def _row_normalise(K: np.ndarray) -> tuple[np.ndarray, float]:
    s = K.sum(axis=1)
    return K / s[:, None], float(np.max(np.abs(s - 1.0)))


def equilibrium_holonomic(solution: SpectralSolution, T: TransferMatrix | WeightSystem) -> HolonomicMeasure:
    """Equilibrium state: base ~ h nu, kernel p_j(w) = q_j(w) h(phi_j w) / (lambda h(w))."""
    if isinstance(T, WeightSystem):
        T = assemble_grand(T)
    h = solution.h.values
    K = T.coeffs * h[T.src] / (solution.lam * h[:, None])
    K, renorm = _row_normalise(K)
    base = CylinderMeasure(h * solution.nu.weights, T.r, T.depth)
    return HolonomicMeasure(base, K, renorm)


def stationary_base(kernel: np.ndarray, r: int, depth: int, tol: float = 1e-14,
                    max_iter: int = 1_000_000) -> CylinderMeasure:
    """Invariant distribution of the chain w -> phi_j w with probabilities p_j(w)."""
    n = r**depth
    src = branch_table(r, depth)
    if n <= 2048:
        P = np.zeros((n, n))
        np.add.at(P, (np.repeat(np.arange(n), r), src.ravel()), kernel.ravel())
        A = P.T - np.eye(n)
        A[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        pi = linalg.solve(A, b)
        return CylinderMeasure(np.clip(pi, 0.0, None), r, depth)
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        new = np.bincount(src.ravel(), weights=(kernel * pi[:, None]).ravel(), minlength=n)
        if np.abs(new - pi).sum() <= tol:
            pi = new
            break
        pi = new
    return CylinderMeasure(pi, r, depth)


def holonomic_from_kernel(kernel: np.ndarray, r: int, depth: int) -> HolonomicMeasure:
    K, renorm = _row_normalise(np.asarray(kernel, dtype=float))
    return HolonomicMeasure(stationary_base(K, r, depth), K, renorm)


def random_holonomic(rng: np.random.Generator, r: int, depth: int,
                     concentration: float = 1.0) -> HolonomicMeasure:
    K = rng.dirichlet(np.full(r, concentration), size=r**depth)
    K = np.clip(K, 1e-300, None)
    return holonomic_from_kernel(K, r, depth)


def perturb_kernel(m: HolonomicMeasure, rng: np.random.Generator, size: float = 0.2) -> HolonomicMeasure:
    """Re-weight the kernel by exp(size * noise) and recompute the invariant base."""
    K = m.kernel * np.exp(size * rng.standard_normal(m.kernel.shape))
    return holonomic_from_kernel(K, m.r, m.depth)


def holonomy_check(m: HolonomicMeasure, g: CylinderFunction | np.ndarray) -> float:
    """|int g(phi_{w_1} x) d nu_hat - int g d nu| on the one-step form."""
    vals = g.values if isinstance(g, CylinderFunction) else np.asarray(g, dtype=float)
    src = branch_table(m.r, m.depth)
    pushed = float(np.sum(m.base.weights[:, None] * m.kernel * vals[src]))
    return abs(pushed - float(np.dot(m.base.weights, vals)))


# ---------------------------------------------------------------------------
# variational entropy

@dataclass
class EntropyResult:
    value: float
    best_found: float
    bound: float
    status: str
    iterations: int
    starts: int


def _entropy_objective(u: np.ndarray, base: np.ndarray, lifted: np.ndarray):
    # u has shape (r, r**k): u[j, w] = log g(j w)
    lse = logsumexp(u, axis=0)
    F = float(np.dot(base, lse) - np.sum(lifted * u))
    s = softmax(u, axis=0)
    grad = base[None, :] * s - lifted
    # preconditioner: with diag(base * s) the scaled Hessian is I - 1 s^T
    hdiag = base[None, :] * s
    return F, grad, hdiag


def variational_entropy(m: HolonomicMeasure, seed: int = 0, restarts: int = 5,
                        max_iter: int = 10_000, gtol: float = 1e-20) -> EntropyResult:
    """inf_g int log(B_1 g / g) d nu over positive g one level finer than nu.

    g lives on depth-(k+1) words so that both B_1 g(w) = sum_j g(jw) and the
    integral of log g against the lifted measure are exact. The objective is
    convex in u = log g; each start runs gradient descent, scaled by
    diag(base * softmax(u)), with step halving.
    """
    r, k = m.r, m.depth
    base = m.base.weights
    lifted = m.lift().reshape(r, r**k)
    bound = math.log(r)
    rng = np.random.default_rng(seed)
    starts = [np.zeros((r, r**k))] + [rng.standard_normal((r, r**k)) for _ in range(restarts)]
    best = math.inf
    status = "max_iter"
    total_it = 0
    for u in starts:
        F, grad, hdiag = _entropy_objective(u, base, lifted)
        step = 1.0
        it = 0
        converged = False
        for it in range(1, max_iter + 1):
            direction = grad / np.maximum(hdiag, 1e-300 + 1e-12 * base[None, :])
            direction[:, base == 0] = 0.0
            decrement = float(np.sum(grad * direction))
            if decrement <= gtol:
                converged = True
                break
            while True:
                cand = u - step * direction
                Fc, gc, hc = _entropy_objective(cand, base, lifted)
                if Fc <= F or step < 1e-12:
                    break
                step *= 0.5
            if not math.isfinite(Fc):
                status = "diverged"
                break
            if F - Fc <= 4 * np.finfo(float).eps * max(1.0, abs(F)):
                # objective flat at rounding level
                converged = decrement <= 1e-10
                if Fc <= F:
                    u, F, grad, hdiag = cand, Fc, gc, hc
                break
            u, F, grad, hdiag = cand, Fc, gc, hc
            step = min(1.0, step * 2.0)
        total_it += it
        if math.isfinite(F) and F < best:
            best = F
            if converged:
                status = "converged"
    if not math.isfinite(best):
        return EntropyResult(bound, best, bound, "diverged", total_it, len(starts))
    return EntropyResult(min(best, bound), best, bound, status, total_it, len(starts))


def chain_entropy(m: HolonomicMeasure) -> float:
    """-sum_w base(w) sum_j p_j(w) log p_j(w)."""
    K = m.kernel
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(K > 0, K * np.log(K), 0.0)
    return float(-np.sum(m.base.weights[:, None] * plogp))


# ---------------------------------------------------------------------------
# grand-canonical pressure

@dataclass
class PressureReport:
    log_lambda: float
    h_v: float
    entropy_status: str
    int_log_psi: float
    identity_gap: float
    success: bool
    classical: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "log_lambda": self.log_lambda,
            "h_v": self.h_v,
            "entropy_status": self.entropy_status,
            "int_log_psi": self.int_log_psi,
            "identity_gap": self.identity_gap,
            "success": self.success,
            "classical": [list(row) for row in self.classical],
        }


def integrate_log_psi(m: HolonomicMeasure, weights: WeightSystem) -> float:
    """int log psi d nu, evaluated on the lifted measure where log psi(jw) = log q_j(w)."""
    log_q = np.log(weights.grouped()) if weights.kind != "finite" else weights.log_q
    return m.branch_integral(log_q)


def grand_pressure(solution: SpectralSolution, weights: WeightSystem, m: HolonomicMeasure,
                   entropy_tol: float = 1e-3, seed: int = 0, restarts: int = 5,
                   classical: list | None = None) -> PressureReport:
    ent = variational_entropy(m, seed=seed, restarts=restarts)
    ilp = integrate_log_psi(m, weights)
    gap = abs(ent.value + ilp - solution.log_lambda)
    return PressureReport(solution.log_lambda, ent.value, ent.status, ilp, gap,
                          gap <= entropy_tol, classical or [])


def classical_table(family: PotentialFamily, Ns, betas, depth: int, tol: float = 1e-12) -> list:
    return [(int(N), float(b), classical_pressure(family, N, b, depth, tol))
            for N in Ns for b in betas]


# ---------------------------------------------------------------------------
# derivative identity

@dataclass
class DerivativeIdentity:
    lhs: float
    rhs: float
    gap: float
    step: float


def derivative_identity(family: PotentialFamily, N: int, beta0: float, depth: int,
                        step: float = 1e-4, relative: bool = True,
                        tol: float = 0.0, max_iter: int = 100_000) -> DerivativeIdentity:
    """Central difference of lambda_{N, beta} against -int A_N d rho."""
    s = step * beta0 if relative else step
    if beta0 - s <= 0:
        raise ValueError("beta0 - step must stay positive")

    def solve(b):
        return power_iterate(assemble_classical(family, N, b, depth), tol=tol, max_iter=max_iter)

    sol0 = solve(beta0)
    lp = solve(beta0 + s).lam
    lm = solve(beta0 - s).lam
    lhs = (lp - lm) / (2 * s * sol0.lam)
    T = assemble_classical(family, N, beta0, depth)
    m = equilibrium_holonomic(sol0, T)
    A = family.table(N, depth + 1).reshape(family.r, family.r**depth)
    rhs = -m.branch_integral(A)
    return DerivativeIdentity(lhs, rhs, abs(lhs - rhs), s)


# ---------------------------------------------------------------------------
# sweep over (beta, mu)

@dataclass
class SweepResult:
    betas: np.ndarray
    mus: np.ndarray
    lam: np.ndarray
    log_lam: np.ndarray
    gap: np.ndarray
    status: np.ndarray
    d_beta: np.ndarray
    d2_beta: np.ndarray
    d_mu: np.ndarray
    d2_mu: np.ndarray

    def rows(self):
        for i, b in enumerate(self.betas):
            for j, m in enumerate(self.mus):
                yield {
                    "beta": float(b), "mu": float(m), "status": str(self.status[i, j]),
                    "lambda": float(self.lam[i, j]), "log_lambda": float(self.log_lam[i, j]),
                    "gap_estimate": float(self.gap[i, j]),
                    "d_beta": float(self.d_beta[i, j]), "d2_beta": float(self.d2_beta[i, j]),
                    "d_mu": float(self.d_mu[i, j]), "d2_mu": float(self.d2_mu[i, j]),
                }


def divided_differences(x: np.ndarray, y: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Central first and second divided differences along ``axis`` (NaN at edges)."""
    y = np.moveaxis(np.asarray(y, dtype=float), axis, 0)
    d1 = np.full(y.shape, np.nan)
    d2 = np.full(y.shape, np.nan)
    if y.shape[0] >= 3:
        xm, x0, xp = x[:-2], x[1:-1], x[2:]
        shape = (-1,) + (1,) * (y.ndim - 1)
        xm, x0, xp = xm.reshape(shape), x0.reshape(shape), xp.reshape(shape)
        ym, y0, yp = y[:-2], y[1:-1], y[2:]
        d1[1:-1] = (yp - ym) / (xp - xm)
        d2[1:-1] = 2 * ((yp - y0) / (xp - x0) - (y0 - ym) / (x0 - xm)) / (xp - xm)
    return np.moveaxis(d1, 0, axis), np.moveaxis(d2, 0, axis)


def _sweep_node(family, beta, mu, depth, eps, tol):
    if mu >= 0 or mu >= family.Kprime:
        return "inadmissible", math.nan, math.nan
    try:
        w = finite_weights(family, beta, mu, depth, eps)
    except AdmissibilityError:
        return "divergent", math.nan, math.nan
    except OverflowDiagnostic:
        return "overflow", math.nan, math.nan
    sol = power_iterate(assemble_grand(w), tol=tol)
    return "ok", sol.lam, sol.rate


def analyticity_sweep(family: PotentialFamily, betas, mus, depth: int, eps: float = 1e-12,
                      tol: float = 1e-12, threads: int = 1) -> SweepResult:
    betas = np.asarray(betas, dtype=float)
    mus = np.asarray(mus, dtype=float)
    for name, grid in (("beta", betas), ("mu", mus)):
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise ValueError(f"{name} grid must be strictly increasing")
    nodes = [(b, m) for b in betas for m in mus]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(lambda bm: _sweep_node(family, bm[0], bm[1], depth, eps, tol),
                                nodes))
    else:
        out = [_sweep_node(family, b, m, depth, eps, tol) for b, m in nodes]
    shape = (betas.size, mus.size)
    status = np.array([o[0] for o in out], dtype=object).reshape(shape)
    lam = np.array([o[1] for o in out]).reshape(shape)
    gap = np.array([o[2] for o in out]).reshape(shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_lam = np.log(lam)
    d_b, d2_b = divided_differences(betas, log_lam, 0)
    d_m, d2_m = divided_differences(mus, log_lam, 1)
    return SweepResult(betas, mus, lam, log_lam, gap, status, d_b, d2_b, d_m, d2_m)


def constant_family_log_lambda(c: float, r: int, beta, mu):
    """Closed form log lambda = log r - beta c - log(1 - e^{beta mu})."""
    beta = np.asarray(beta, dtype=float)
    mu = np.asarray(mu, dtype=float)
    return math.log(r) - beta * c - np.log1p(-np.exp(beta * mu))

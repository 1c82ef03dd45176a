import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gcformalism import grandstats as gs
from gcformalism import potentials as pot
from gcformalism import transfer as tr

E2 = math.exp(-2.0)


def energy_one():
    return gs.energy_per_particle(1.0, 1.0, -1.0)


def test_grand_partition_examples():
    assert gs.grand_partition(energy_one()) == pytest.approx(1 / (1 - E2), abs=1e-12)
    assert gs.grand_partition(gs.zero_energy(1.0, -1.0)) == pytest.approx(
        1 / (1 - math.exp(-1)), abs=1e-11)
    single = gs.GrandCanonicalEnsemble(1.0, -1.0, lambda N: np.where(N == 0, 0.0, 1e3 * N),
                                       Kprime=900.0)
    assert gs.grand_partition(single) == pytest.approx(1.0, abs=1e-300)
    assert gs.particle_distribution(single)[0] == 1.0


def test_ensemble_validation():
    with pytest.raises(pot.AdmissibilityError):
        gs.zero_energy(1.0, 0.0)
    with pytest.raises(ValueError):
        gs.zero_energy(-1.0, -1.0)
    with pytest.raises(ValueError):
        gs.zero_energy(1.0, -1.0, V=0.0)


def test_particle_distribution_geometric():
    e = energy_one()
    P = gs.particle_distribution(e)
    N = np.arange(P.size)
    np.testing.assert_allclose(P, (1 - E2) * np.exp(-2.0 * N), rtol=1e-10, atol=1e-300)
    assert P[0] == pytest.approx(0.8646647167633873, abs=1e-12)
    assert abs(math.fsum(P) - 1.0) <= 1e-12
    assert np.all(np.diff(P) < 0)
    # before renormalisation the mass defect is the truncated tail
    raw = np.exp(-2.0 * N) / (1 / (1 - E2))
    assert 1.0 - math.fsum(raw) <= e.eps


def test_moments_and_derivatives():
    e = energy_one()
    mean_N, mean_A = gs.moments(e)
    assert mean_N == pytest.approx(E2 / (1 - E2), abs=1e-10)
    d = gs.log_partition_derivatives(e, 1e-4)
    assert d.d_mu_expect == pytest.approx(0.1565176427496656, abs=1e-10)
    assert d.gap_beta <= 1e-6 and d.gap_mu <= 1e-6
    z = gs.log_partition_derivatives(gs.zero_energy(1.0, -1.0), 1e-4)
    assert z.d_beta_expect == pytest.approx(-z.mean_N) and z.gap_beta <= 1e-6
    with pytest.raises(ValueError):
        gs.log_partition_derivatives(gs.zero_energy(1.0, -1e-5), 1e-4)


def test_derivative_gaps_shrink_quadratically():
    e = gs.GrandCanonicalEnsemble(0.8, -0.7, lambda N: 0.3 * N + np.sqrt(N), Kprime=0.3)
    g1 = gs.log_partition_derivatives(e, 1e-3)
    g2 = gs.log_partition_derivatives(e, 5e-4)
    assert g1.gap_mu / g2.gap_mu >= 3.5 and g1.gap_beta / g2.gap_beta >= 3.5


def test_gas_pressure():
    e = energy_one()
    p = gs.gas_pressure(e)
    assert p == pytest.approx(math.log(1 / (1 - E2)), abs=1e-12)
    assert gs.gas_pressure(e.replace(V=2.0)) == pytest.approx(p / 2)
    assert gs.effective_particle_number(e) == pytest.approx(p * e.V * e.beta)
    negative = gs.GrandCanonicalEnsemble(1.0, -1.0, lambda N: 1.0 + N, Kprime=1.0, delta=1.0)
    assert gs.grand_partition(negative) < 1 and gs.gas_pressure(negative) < 0


def test_si_units():
    T, V = 300.0, 1e-3
    e = gs.energy_per_particle(1e-21, 1 / (gs.BOLTZMANN_SI * T), -4e-21, V=V,
                               k_B=gs.BOLTZMANN_SI)
    assert e.temperature == pytest.approx(T)
    assert gs.gas_pressure(e) == pytest.approx(
        gs.BOLTZMANN_SI * T * gs.log_grand_partition(e) / V)


@pytest.mark.parametrize("c,r", [(0.0, 2), (0.5, 3), (-0.2, 2)])
def test_bridge_to_dynamical_eigenvalue(c, r):
    beta, mu = 1.2, -0.8
    e = gs.GrandCanonicalEnsemble(beta, mu, lambda N: np.full(np.shape(N), c), Kprime=0.0,
                                  delta=min(c, 0.0))
    w = pot.finite_weights(pot.constant(c, r), beta, mu, 2)
    lam = tr.power_iterate(tr.assemble_grand(w), tol=1e-13).lam
    assert lam == pytest.approx(r * gs.grand_partition(e), rel=1e-12)


# --- finite canonical / MaxEnt ----------------------------------------------

def test_canonical_examples():
    np.testing.assert_allclose(gs.canonical_distribution(gs.FiniteCanonical([0, 0, 0])), 1 / 3)
    c = gs.FiniteCanonical([0.0, math.log(2)], 1.0)
    np.testing.assert_allclose(gs.canonical_distribution(c), [2 / 3, 1 / 3])
    A = gs.FiniteCanonical([0.3, 1.0, 0.1])
    np.testing.assert_allclose(gs.canonical_distribution(A, 1e-12), 1 / 3, rtol=1e-10)
    cold = gs.canonical_distribution(A, 1e4)
    assert cold[2] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        gs.FiniteCanonical([1.0])


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=6), st.floats(-20, 20),
       st.floats(0.01, 10))
def test_canonical_shift_invariance(A, shift, beta):
    p = gs.canonical_distribution(gs.FiniteCanonical(A, beta))
    q = gs.canonical_distribution(gs.FiniteCanonical([a + shift for a in A], beta))
    np.testing.assert_allclose(p, q, rtol=1e-12, atol=1e-300)


def test_maxent_examples():
    p, b = gs.maxent_solve(gs.FiniteCanonical([0.0, 1.0]), 0.5)
    assert b == 0.0
    np.testing.assert_allclose(p, 0.5)
    p, b = gs.maxent_solve(gs.FiniteCanonical([0.0, 1.0]), 1 / 3)
    assert b == pytest.approx(math.log(2), abs=1e-10)
    np.testing.assert_allclose(p, [2 / 3, 1 / 3], atol=1e-10)
    with pytest.raises(gs.InfeasibleConstraint):
        gs.maxent_solve(gs.FiniteCanonical([0.0, 1.0]), 1.0)
    with pytest.raises(gs.InfeasibleConstraint):
        gs.maxent_solve(gs.FiniteCanonical([2.0, 2.0]), 1.0)
    p, b = gs.maxent_solve(gs.FiniteCanonical([2.0, 2.0]), 2.0)
    np.testing.assert_allclose(p, 0.5)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=5, unique=True), st.floats(0.05, 0.95))
def test_maxent_hits_constraint(A, frac):
    lo, hi = min(A), max(A)
    if hi - lo < 1e-3:
        return
    alpha = lo + frac * (hi - lo)
    p, beta = gs.maxent_solve(gs.FiniteCanonical(A), alpha)
    assert float(np.dot(p, A)) == pytest.approx(alpha, abs=1e-10)


def grid_oracle(A, alpha, step=0.01, slack=2e-2):
    G = gs.simplex_grid(len(A), step)
    feasible = np.abs(G @ np.asarray(A) - alpha) <= slack
    H = gs.grid_entropies(G[feasible])
    return G[feasible][np.argmax(H)], H.max()


@pytest.mark.parametrize("seed", range(3))
def test_maxent_beats_grid(seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(0, 1, 3)
    alpha = float(A.min() + rng.uniform(0.2, 0.8) * (A.max() - A.min()))
    p, _ = gs.maxent_solve(gs.FiniteCanonical(A), alpha)
    best, h_best = grid_oracle(A, alpha, slack=2e-3)
    assert gs.shannon_entropy(p) >= h_best - 2e-2
    assert np.abs(best - p).sum() <= 2e-2 * 3


def test_free_energy():
    c = gs.FiniteCanonical([0.0, 0.0, 0.0], 2.0)
    fe = gs.free_energy_check(c, gs.canonical_distribution(c))
    assert fe.value == pytest.approx(-math.log(3) / 2)
    c = gs.FiniteCanonical([0.0, math.log(2)], 1.0)
    fe = gs.free_energy_check(c, gs.canonical_distribution(c))
    assert fe.value == pytest.approx(-math.log(1.5), abs=1e-12)
    assert fe.value == pytest.approx(fe.minus_log_Z_over_beta, abs=1e-12)
    assert fe.minimality_gap <= 1e-3
    with pytest.raises(ValueError):
        gs.free_energy_check(gs.FiniteCanonical([0, 1], 0.0), np.array([0.5, 0.5]))


def test_simplex_grid():
    G = gs.simplex_grid(3, 0.1)
    assert G.shape == (66, 3)
    np.testing.assert_allclose(G.sum(axis=1), 1.0)
    with pytest.raises(ValueError):
        gs.simplex_grid(5)

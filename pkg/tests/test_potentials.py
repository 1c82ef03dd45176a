import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gcformalism import potentials as pot
from gcformalism.symbolic import CylinderFunction, Word, all_words, discrete_lipschitz, prepend

GEOM1 = 1.0 / (1.0 - math.exp(-1.0))
GEOM2 = 1.0 / (1.0 - math.exp(-2.0))


def random_E(seed, r=2, depth=3, scale=1.0):
    rng = np.random.default_rng(seed)
    return CylinderFunction(scale * rng.uniform(0, 1, r**depth), r, depth)


def lipschitz_family(seed, r=2, depth=3):
    """A_N = N/2 + 0.3 + E with E of depth 3; uniformly Lipschitz in N."""
    return pot.affine(0.5, 0.3, random_E(seed, r, depth), r)


# --- admissibility -----------------------------------------------------------

def test_h1_examples():
    assert pot.check_h1(pot.constant(2.0), 3, 10).value == 0.0
    E = random_E(1)
    L = discrete_lipschitz(E)
    frag = pot.check_h1(pot.shared(E, 2, M=L), 4, 10)
    assert frag.value == pytest.approx(L) and frag.verdict == "pass"
    assert frag.details["argmax_N"] == 0
    assert pot.check_h1(pot.shared(E, 2, M=0.5 * L), 4, 10).verdict == "fail"
    adv = pot.PotentialFamily(lambda N, W: N * W[:, 0].astype(float), 2, 1.0, 0.0, 0.0)
    obs = [pot.check_h1(adv, 2, n).value for n in (2, 5, 10)]
    assert obs == sorted(obs) and obs[-1] > obs[0]
    assert pot.check_h1(adv, 2, 10).verdict == "fail"


def test_h2_root_examples():
    w = Word([0, 1], 2)
    assert pot.check_h2_root(pot.constant(0.0), -1.0, w, 40) == pytest.approx(1.0)
    assert pot.check_h2_root(pot.per_particle(1.0), -1.0, w, 40) == pytest.approx(2.0)
    bad = pot.affine(-2.0, 0.0)  # A_N = 2 mu N with mu = -1
    assert pot.check_h2_root(bad, -1.0, w, 40) == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        pot.check_h2_root(pot.constant(0.0), 0.5, w, 40)


def test_h2_ratio_examples():
    w = Word([1], 2)
    assert pot.check_h2_ratio(pot.per_particle(1.0), -1.0, w, 20) == pytest.approx(2.0)
    assert pot.check_h2_ratio(pot.constant(3.0), -1.0, w, 20) == pytest.approx(1.0)
    with pytest.raises(pot.MonotonicityError):
        pot.check_h2_ratio(pot.affine(-1.0, 0.0), -0.5, w, 20)


def test_h3_examples():
    ok = pot.constant(1.0, Kprime=-0.5, delta=0.5)
    assert pot.check_h3(ok, -1.0, 2, 30).verdict == "pass"
    fam = pot.per_particle(1.0, Kprime=0.5, delta=0.0)
    frag = pot.check_h3(fam, -1.0, 2, 10)
    assert frag.verdict == "fail"
    assert {n for n, _ in frag.details["violations"]} == {0}
    E = CylinderFunction([0.5, 0.6, 0.7, 0.9], 2, 2)
    sh = pot.shared(E, 2)
    assert E.values.min() > sh.delta == pytest.approx(sh.M * 0.25)
    assert pot.check_h3(sh, -1.0, 3, 50).verdict == "pass"


def test_h3_fails_when_kprime_below_mu():
    assert pot.check_h3(pot.constant(1.0, Kprime=-2.0), -1.0, 1, 5).verdict == "fail"


def test_admissibility_report_overall():
    rep = pot.admissibility_report(pot.constant(1.0), 1.0, -1.0, 3)
    assert rep.overall == "pass"
    assert rep.to_dict()["verdicts"] == {"H1": "pass", "H2": "pass", "H3": "pass"}
    # the zero family cannot satisfy the strict bound at N = 0 with delta >= 0
    assert pot.admissibility_report(pot.constant(0.0), 1.0, -1.0, 2).verdicts["H3"] == "fail"
    bad = pot.admissibility_report(pot.affine(-2.0, 0.0), 1.0, -1.0, 2)
    assert bad.verdicts["H2"] == "fail"


# --- truncation and psi ------------------------------------------------------

def test_truncation_bound_geometric():
    n = pot.truncation_bound(None, 1.0, -1.0, 1e-12, Kprime=0.0, delta=0.0)
    assert pot.geometric_tail(1.0, 1.0, 0.0, n) <= 1e-12
    assert pot.geometric_tail(1.0, 1.0, 0.0, n - 1) > 1e-12
    assert n == 28
    assert pot.truncation_bound(None, 1.0, -1.0, 10.0, Kprime=0.0, delta=0.0) == 0
    with pytest.raises(pot.AdmissibilityError):
        pot.truncation_bound(None, 1.0, -1.0, 1e-12, Kprime=-1.0, delta=0.0)


@given(st.floats(0.05, 5.0), st.floats(0.05, 3.0), st.floats(0.0, 2.0),
       st.floats(1e-14, 1e-3))
def test_truncation_bound_is_minimal_and_monotone_in_beta(beta, rate, delta, eps):
    n = pot.truncation_bound(None, beta, -rate, eps, Kprime=0.0, delta=delta, max_terms=10**7)
    assert pot.geometric_tail(beta, rate, delta, n) <= eps
    if n > 0:
        assert pot.geometric_tail(beta, rate, delta, n - 1) > eps
    n2 = pot.truncation_bound(None, 2 * beta, -rate, eps, Kprime=0.0, delta=delta,
                              max_terms=10**7)
    assert n2 <= n


def test_grand_potential_closed_forms():
    gp = pot.grand_potential(pot.constant(0.0), 1.0, -1.0, 3)
    np.testing.assert_allclose(gp.psi.values, GEOM1, atol=1e-11)
    assert gp.tail_bound <= 1e-12
    gp = pot.grand_potential(pot.per_particle(1.0), 1.0, -1.0, 3)
    np.testing.assert_allclose(gp.psi.values, GEOM2, atol=1e-12)


def test_grand_potential_single_term():
    fam = pot.PotentialFamily(lambda N, W: np.where(N == 0, 0.7, 500.0 * N) + 0 * W[:, 0],
                              2, 0.0, 400.0, 0.0)
    gp = pot.grand_potential(fam, 1.0, -1.0, 2)
    np.testing.assert_allclose(gp.psi.values, math.exp(-0.7), rtol=1e-14)


def test_grand_potential_overflow_names_offender():
    fam = pot.affine(1.0, -1000.0)
    with pytest.raises(pot.OverflowDiagnostic) as exc:
        pot.grand_potential(fam, 1.0, -1.0, 1, n_max=5)
    assert exc.value.N == 0


def test_tail_certificate_psi_stable():
    fam = lipschitz_family(3)
    gp = pot.grand_potential(fam, 1.0, -0.5, 3, eps=1e-12)
    more = pot.grand_potential(fam, 1.0, -0.5, 3, n_max=gp.n_max + 10)
    assert np.max(np.abs(more.psi.values - gp.psi.values)) <= 1e-12
    assert np.all(gp.psi.values > 0)


def test_psi_monotone_in_beta_and_mu():
    fam = lipschitz_family(4)
    psi = lambda b, m: pot.grand_potential(fam, b, m, 3, n_max=60).psi.values
    assert np.all(psi(1.5, -0.5) <= psi(1.0, -0.5))
    assert np.all(psi(1.0, -0.8) <= psi(1.0, -0.5))


# --- weights -----------------------------------------------------------------

def test_finite_weights_constant_family():
    w = pot.finite_weights(pot.constant(0.0), 1.0, -1.0, 2)
    np.testing.assert_allclose(w.q, GEOM1, atol=1e-11)


def test_finite_weights_compose_branch():
    fam = lipschitz_family(5)
    k = 3
    w = pot.finite_weights(fam, 1.0, -0.5, k)
    gp = w.psi
    rng = np.random.default_rng(0)
    for _ in range(10):
        j = int(rng.integers(2))
        x = Word(rng.integers(0, 2, k), 2)
        assert w.q[j, x.index()] == gp.psi(prepend(j, x))


def test_xi():
    assert [int(pot.xi(j, 2)) for j in range(6)] == [0, 0, 1, 1, 2, 2]
    assert int(pot.xi(7, 3)) == 2


@pytest.mark.parametrize("seed", range(4))
def test_countable_grouping_reproduces_finite(seed):
    fam = lipschitz_family(seed)
    fin = pot.finite_weights(fam, 1.0, -0.5, 3)
    cnt = pot.countable_weights(fam, 1.0, -0.5, 3)
    assert cnt.j_max == 2 * (fin.n_max + 1) - 1
    np.testing.assert_allclose(cnt.grouped(), fin.q, rtol=0, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_log_weight_lipschitz_bound(seed):
    fam = lipschitz_family(seed)
    beta, k = 1.3, 3
    w = pot.finite_weights(fam, beta, -0.5, k)
    for j in range(2):
        assert discrete_lipschitz(w.log_q[j], 2, k) <= beta * fam.M / 2 + fam.M * 2.0**-k
    cnt = pot.countable_weights(fam, beta, -0.5, k, j_max=21)
    sup = max(discrete_lipschitz(cnt.log_q[j], 2, k) for j in range(cnt.n_branches))
    assert sup <= beta * fam.M / 2 + fam.M * 2.0**-k


def test_dini_constant_and_lipschitz():
    d = pot.dini_modulus_check(pot.finite_weights(pot.constant(1.0), 1.0, -1.0, 3))
    assert d.max_ratio == 0.0 and d.integral == 0.0
    fam = lipschitz_family(7)
    d = pot.dini_modulus_check(pot.finite_weights(fam, 1.0, -0.5, 4))
    assert d.max_ratio <= fam.M / 2 + 1e-12
    assert d.integral <= fam.M / 2 + 1e-6
    # trapezoid on a piecewise-constant profile: compare with the exact integral
    t = d.t[1:]
    exact = np.sum(np.diff(d.t) * 0.5 * (d.modulus[1:] / t + np.r_[0, d.modulus[1:-1] / t[:-1]]))
    assert d.integral == pytest.approx(exact, rel=1e-9)


def test_holder_variation():
    cnt = pot.countable_weights(pot.constant(1.0), 1.0, -1.0, 3, j_max=9)
    assert np.all(pot.holder_variation(cnt).V == 0)
    fam = lipschitz_family(8)
    beta = 1.0
    cnt = pot.countable_weights(fam, beta, -0.5, 4)
    hv = pot.holder_variation(cnt, n_max=6)
    assert hv.V_alpha <= beta * fam.M / 2 * 0.5 + 1e-12
    assert hv.summable and hv.V[4:].tolist() == [0.0, 0.0]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.2, 3.0), st.floats(-2.0, -0.1))
def test_weights_positive_and_grouping_property(seed, beta, mu):
    fam = pot.shared(random_E(seed, 3, 2, scale=2.0), 3, delta=0.0)
    fin = pot.finite_weights(fam, beta, mu, 2)
    assert np.all(fin.q > 0)
    cnt = pot.countable_weights(fam, beta, mu, 2)
    np.testing.assert_allclose(cnt.grouped(), fin.q, rtol=1e-12, atol=1e-12)

import math

import numpy as np
import pytest

from posic.analysis import (
    alpha_bar_disturbed,
    alpha_bar_inf,
    bifurcation_sweep,
    compute_bounds,
    disturbance_admissible,
    eta_bar_inf,
    exponential_jacobian,
    k_bar_inf,
    k_bar_local,
    k_bar_nonlinear,
    local_stability,
    locus_endpoints,
    logistic_worst_matrix,
    m_matrix,
    rejection_check,
    root_locus,
    root_locus_gain,
    spr_test,
    xi_bar_inf,
)
from posic.builtins import example1, gene_expression, maturation, repressed_translation, sis, spr_network
from posic.controllers import Antithetic, ClosedLoop, Exponential, closed_loop_jacobian, positive_equilibrium
from posic.errors import AssumptionViolated, InadmissibleDisturbance
from posic.poly import Polynomial, poly_roots, positive_real_roots, routh_hurwitz
from posic.sysmodel import LtiSystem, dc_gain, is_hurwitz_matrix, transfer_function


def random_positive_system(rng, n):
    A = rng.uniform(0, 1, (n, n)) * (rng.uniform(size=(n, n)) < 0.6)
    np.fill_diagonal(A, 0.0)
    A -= np.diag(A.sum(axis=0) + rng.uniform(0.05, 1.0, n))
    B = rng.uniform(0, 1, n) * (rng.uniform(size=n) < 0.7)
    C = rng.uniform(0, 1, n) * (rng.uniform(size=n) < 0.7)
    B[rng.integers(n)] += 0.5
    C[rng.integers(n)] += 0.5
    return LtiSystem(A, B, C)


def random_systems(count, seed=3):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        s = random_positive_system(rng, int(rng.integers(1, 5)))
        if dc_gain(s) > 1e-3:
            out.append(s)
    return out


# -- verdicts and the M matrix ---------------------------------------------------------


def test_local_stability_classification():
    assert local_stability(np.diag([-1.0, -2.0])).classification == "stable"
    assert local_stability(np.diag([-1.0, 0.0])).classification == "marginal"
    assert local_stability(np.diag([-1.0, 0.1])).classification == "unstable"


def _example1_verdict(k, eta=1.0, mu=10.0):
    cl = ClosedLoop(example1(), Antithetic(mu=mu, k=k, eta=eta))
    return local_stability(closed_loop_jacobian(cl, positive_equilibrium(cl)))


def test_example1_stability_verdicts():
    assert _example1_verdict(1.0).stable
    assert _example1_verdict(2.2).classification == "unstable"


def test_m_matrix_char_poly_example1():
    k = 1.7
    np.testing.assert_allclose(np.poly(m_matrix(example1(), k)), [1, 2, 1, k], atol=1e-12)
    ev = np.sort(np.linalg.eigvals(m_matrix(gene_expression(1, 2, 1), 0.0)).real)
    np.testing.assert_allclose(ev, [-2, -1, 0], atol=1e-12)
    assert is_hurwitz_matrix(m_matrix(gene_expression(), 1.0))
    flipped = m_matrix(gene_expression(), 1.0, sign_flip=True)
    assert flipped[2, 1] == 1.0


# -- k bar --------------------------------------------------------------------------


def test_k_bar_inf_gene_expression_unit():
    r = k_bar_inf(gene_expression())
    assert r.value == pytest.approx(2.0, rel=1e-12)
    assert r.crossing_frequencies[0] == pytest.approx(1.0, rel=1e-12)
    assert r.validated


@pytest.mark.parametrize("g1,g2,k2", [(0.3, 4.0, 2.0), (7.0, 0.2, 0.15), (1.0, 9.0, 8.0)])
def test_k_bar_inf_gene_expression_closed_form(g1, g2, k2):
    r = k_bar_inf(gene_expression(g1, g2, k2))
    assert r.value == pytest.approx(g1 * g2 * (g1 + g2) / k2, rel=1e-10)
    assert r.crossing_frequencies[0] == pytest.approx(math.sqrt(g1 * g2), rel=1e-10)


def test_k_bar_inf_example1_routh():
    # Routh on s^3 + 2 s^2 + s + k: stable iff 0 < k < 2
    assert k_bar_inf(example1()).value == pytest.approx(2.0, abs=1e-8)
    assert routh_hurwitz(Polynomial([1.99, 1, 2, 1])) and not routh_hurwitz(Polynomial([2.01, 1, 2, 1]))


def test_k_bar_inf_spr_network_infinite():
    r = k_bar_inf(spr_network(2.0, 1.0, 1.0))
    assert math.isinf(r.value) and r.crossing_frequencies == ()


def test_k_bar_requires_assumption():
    with pytest.raises(AssumptionViolated):
        k_bar_inf(LtiSystem([[0.5]], [1.0], [1.0]))


def test_eta_bar_inf():
    assert eta_bar_inf(gene_expression(), 1.0) == pytest.approx(2.0)
    g1, g2, k2, mub = 0.5, 3.0, 2.0, 4.0
    assert eta_bar_inf(gene_expression(g1, g2, k2), mub) == pytest.approx(k2 * (g1 + g2) / (mub * g1 * g2))
    assert math.isinf(eta_bar_inf(spr_network(), 1.0))


def test_crossing_agrees_with_eigenvalues_on_random_systems():
    checked = 0
    for s in random_systems(120):
        k = k_bar_inf(s).value
        if math.isfinite(k):
            assert np.max(np.linalg.eigvals(m_matrix(s, 0.99 * k)).real) < 0
            assert np.max(np.linalg.eigvals(m_matrix(s, 1.01 * k)).real) > 0
            checked += 1
        else:
            for kk in (0.1, 10.0, 1e3):
                assert np.max(np.linalg.eigvals(m_matrix(s, kk)).real) < 0
    assert checked >= 5


def test_spr_consistency_on_random_systems():
    for s in random_systems(40, seed=11):
        assert spr_test(s).spr == math.isinf(k_bar_inf(s).value)


# -- SPR -----------------------------------------------------------------------------


def test_spr_examples():
    assert spr_test(spr_network(2.0, 1.0, 1.0)).spr
    r = spr_test(gene_expression())
    assert not r.spr and r.min_real_part_witness is not None
    assert spr_test(LtiSystem([[-3.0]], [2.0], [1.0])).spr


def test_spr_against_dense_sampling():
    w = np.logspace(-3, 3, 4000)
    for s in random_systems(25, seed=5):
        tf = transfer_function(s)
        re = np.real(tf(1j * w))
        verdict = spr_test(s).spr
        if np.min(re) < -1e-9:
            assert not verdict
        if verdict:
            assert np.all(re > 0)
    re_gene = np.real(transfer_function(gene_expression()).__call__(1j * w))
    assert np.min(re_gene) < 0  # sign change at w^2 = g1 g2


def test_spr_network_real_part_numerator():
    gamma, k1, k2 = 2.0, 1.0, 1.0
    tf = transfer_function(spr_network(gamma, k1, k2))
    for w in (0.1, 1.0, 5.0):
        D = tf.denominator(1j * w)
        lhs = np.real(tf(1j * w)) * abs(D) ** 2
        assert lhs == pytest.approx(gamma * w**2 + gamma * (gamma**2 - k1 * k2), rel=1e-10)


# -- alpha and xi -------------------------------------------------------------------------


def test_alpha_bar_gene_expression():
    g1, g2, mu = 0.4, 2.5, 3.0
    r = alpha_bar_inf(gene_expression(g1, g2, 1.7), mu)
    assert r.value == pytest.approx((g1 + g2) / mu, rel=1e-10)
    assert r.crossing_frequencies[0] == pytest.approx(math.sqrt(g1 * g2), rel=1e-10)


def test_alpha_bar_maturation():
    k2, k3, g1, g2, g3, mu = 1.3, 0.7, 0.5, 1.1, 2.0, 1.5
    r = alpha_bar_inf(maturation(1.0, k2, k3, g1, g2, g3), mu)
    S = g1 + g2 + g3 + k3
    expected = (g1 + g3) * (g1 + g2 + k3) * (g2 + g3 + k3) / (mu * S**2)
    assert r.value == pytest.approx(expected, rel=1e-9)
    assert r.crossing_frequencies[0] == pytest.approx(math.sqrt(g1 * g3 * (g2 + k3) / S), rel=1e-9)


def test_alpha_bar_first_order_infinite():
    assert math.isinf(alpha_bar_inf(LtiSystem([[-2.0]], [2.0], [1.0]), 1.0).value)


def test_alpha_bar_gain_robustness():
    ref = alpha_bar_inf(gene_expression(0.7, 1.9, 1.0), 1.0).value
    for k2 in (0.1, 10.0, 1000.0):
        assert alpha_bar_inf(gene_expression(0.7, 1.9, k2), 1.0).value == pytest.approx(ref, rel=1e-10)


def test_exponential_spectrum_independent_of_k():
    s = maturation()
    spectra = [np.sort_complex(np.linalg.eigvals(exponential_jacobian(s, 0.8, 1.0, k))) for k in (0.1, 1.0, 10.0)]
    np.testing.assert_allclose(spectra[0], spectra[1], atol=1e-10)
    np.testing.assert_allclose(spectra[0], spectra[2], atol=1e-10)


def test_alpha_bar_straddles_eigenvalues():
    for s in (gene_expression(), maturation(), example1()):
        a = alpha_bar_inf(s, 1.3).value
        assert is_hurwitz_matrix(exponential_jacobian(s, 0.99 * a, 1.3))
        assert not is_hurwitz_matrix(exponential_jacobian(s, 1.01 * a, 1.3))


def test_xi_bar():
    g1, g2, k2, beta = 0.6, 1.4, 2.2, 3.0
    assert xi_bar_inf(gene_expression(g1, g2, k2), 1.0, beta) == pytest.approx(
        4 * g1 * g2 * (g1 + g2) / (beta * k2), rel=1e-10
    )
    k2, k3, g1, g2, g3, beta = 1.3, 0.7, 0.5, 1.1, 2.0, 2.0
    S = g1 + g2 + g3 + k3
    expected = (4 / beta) * g1 * g3 * (g1 + g3) * (g2 + k3) * (g1 + g2 + k3) * (g2 + g3 + k3) / (k2 * k3 * S**2)
    assert xi_bar_inf(maturation(1.0, k2, k3, g1, g2, g3), 1.0, beta) == pytest.approx(expected, rel=1e-9)
    assert math.isinf(xi_bar_inf(spr_network(), 1.0, 1.0))


def test_xi_bar_is_logistic_matrix_threshold():
    s, beta = maturation(), 2.0
    xi = xi_bar_inf(s, 1.0, beta)
    assert is_hurwitz_matrix(logistic_worst_matrix(s, 0.99 * xi, beta))
    assert not is_hurwitz_matrix(logistic_worst_matrix(s, 1.01 * xi, beta))


def test_bound_identities():
    s, mu, beta = maturation(1, 2, 3, 0.5, 0.7, 0.9), 1.7, 2.5
    b = compute_bounds(s, mu, mu_bar=2.0, beta=beta)
    g = dc_gain(s)
    assert b.eta_bar_inf * 2.0 == g * g * b.k_bar_inf
    assert b.xi_bar_inf * g * beta == pytest.approx(4 * b.alpha_bar_inf * mu, rel=1e-15)


# -- disturbances ------------------------------------------------------------------------


def test_disturbance_admissibility():
    s = gene_expression(E=[1.0, 0.0])
    assert disturbance_admissible(s, 0.0, 1.0)
    assert not disturbance_admissible(s, 2.0, 1.0)
    assert disturbance_admissible(gene_expression(E=[0.0, 0.0]), 1e6, 1.0)


def test_alpha_bar_disturbed():
    s = gene_expression(E=[1.0, 0.0])
    a = alpha_bar_inf(s, 1.0).value
    assert alpha_bar_disturbed(s, 1.0, 0.0) == pytest.approx(a)
    assert alpha_bar_disturbed(s, 1.0, 0.5) == pytest.approx(2 * a)
    assert alpha_bar_disturbed(gene_expression(), 1.0, 5.0) == pytest.approx(a)
    with pytest.raises(InadmissibleDisturbance):
        alpha_bar_disturbed(s, 1.0, 2.0)


def test_rejection_check():
    s = gene_expression(E=[1.0, 0.0])
    aic = Antithetic(mu=1.0, k=1.0, eta=1.0)
    assert rejection_check(s, aic, 0.5).rejects
    assert rejection_check(s, Exponential(mu=1.0, k=1.0, alpha=1.0), 0.5).rejects
    assert not rejection_check(s, aic, 0.5, channel="controller").rejects
    with pytest.raises(InadmissibleDisturbance):
        rejection_check(s, aic, 2.0)


# -- nonlinear plants ---------------------------------------------------------------------


def test_k_bar_nonlinear():
    for mu in (10.0, 50.0, 90.0):
        r = k_bar_nonlinear(sis(1.0, 100.0), mu)
        assert math.isinf(r.value) and r.sign == "positive"
    r = k_bar_nonlinear(repressed_translation(), 0.5)
    assert math.isinf(r.value) and r.sign == "negative"
    s = gene_expression(0.5, 2.0, 1.5)
    r = k_bar_nonlinear(s.as_nonlinear(), 1.0)
    assert r.value == pytest.approx(k_bar_inf(s).value, rel=1e-6)


# -- root locus -------------------------------------------------------------------------


def test_root_locus_confinement():
    s = gene_expression()
    grid = np.logspace(-2, 6, 81)
    L1 = root_locus(s, 1.0, grid)
    assert max(np.max(r.real) for r in L1.branches) < 0
    L2 = root_locus(s, 2.5, grid)
    assert max(np.max(r.real) for r in L2.branches[-20:]) > 0
    assert L1.asymptote_centroid == pytest.approx(-1.0, abs=1e-12)


def test_locus_endpoints_and_centroid_oracle():
    s = gene_expression()
    end = np.sort_complex(locus_endpoints(s, 1.0))
    assert np.all(end.real < 0)
    last = root_locus(s, 1.0, [1e7]).branches[0]
    finite = np.sort_complex(last[np.abs(last) < 100])
    np.testing.assert_allclose(finite, end, atol=1e-4)
    # centroid oracle: sum of open-loop poles minus sum of zeros, from explicit roots
    tf = transfer_function(s)
    g, k = dc_gain(s), 1.0
    poles = np.concatenate([[0.0, -g * k], poly_roots(tf.denominator)])
    zeros = end
    assert root_locus(s, k, [1.0]).asymptote_centroid == pytest.approx(np.sum(poles).real - np.sum(zeros).real)


def test_root_locus_gain_mode_crosses_at_k_bar():
    s = gene_expression()
    eta = 1e4
    L = root_locus_gain(s, eta, [1.9, 2.1])
    assert np.max(L.branches[0].real) < 0 < np.max(L.branches[1].real)
    tf = transfer_function(s)
    theta = eta / dc_gain(s)
    zeros = poly_roots(tf.denominator.shift(1) + tf.numerator.scale(theta / dc_gain(s)))
    poles = np.concatenate([[-theta, 0.0], poly_roots(tf.denominator)])
    expected = (np.sum(poles) - np.sum(zeros)).real / (len(poles) - len(zeros))
    assert L.asymptote_centroid == pytest.approx(expected, rel=1e-9)


# -- sweeps and bisection -----------------------------------------------------------------


def test_bifurcation_sweep_gene_expression():
    kg = np.array([0.5, 1.0, 1.9, 2.5, 3.0])
    eg = np.array([0.1, 1.0, 1.9, 10.0, 1e3])
    res = bifurcation_sweep(gene_expression(), kg, eg, 1.0)
    stable = res.stable
    assert stable[kg < 2].all()
    assert stable[:, eg < 2].all()
    assert not stable[3, 4]
    par = bifurcation_sweep(gene_expression(), kg, eg, 1.0, workers=4)
    np.testing.assert_array_equal(par.max_real_part, res.max_real_part)


def test_sweep_boundary_approaches_k_bar():
    res = bifurcation_sweep(gene_expression(), np.linspace(1.5, 3.0, 61), [1e4], 1.0)
    assert res.boundary[0][1] == pytest.approx(2.0, abs=0.03)


def test_empty_sweep():
    res = bifurcation_sweep(gene_expression(), [], [1.0], 1.0)
    assert res.verdicts == [] and res.boundary == []


def _routh_threshold_example1(mu, eta):
    """Independent threshold: Routh test on the characteristic polynomial, bisected in k."""

    def stable(k):
        em = eta * mu
        return routh_hurwitz(Polynomial([k * em, k + em, 2 * k + 1 + 2 * em, 2 + k + em, 1.0]))

    lo, hi = 1e-3, 10.0
    while hi - lo > 1e-12:
        m = 0.5 * (lo + hi)
        lo, hi = (m, hi) if stable(m) else (lo, m)
    return lo


def test_k_bar_local_example1():
    kb = k_bar_local(example1(), 10.0, 1.0)
    # the eigenvalue verdict keeps a 1e-9 stability margin, hence the 1e-7 tolerance
    assert kb == pytest.approx(_routh_threshold_example1(10.0, 1.0), abs=1e-7)
    # at (mu, eta) = (10, 1) the Routh condition reduces to 8k^3 + 176k^2 + 758k - 2420 < 0
    root = positive_real_roots(Polynomial([-2420.0, 758.0, 176.0, 8.0]))[0]
    assert kb == pytest.approx(root, abs=1e-7)
    assert kb == pytest.approx(2.0862, abs=1e-4)
    assert _example1_verdict(0.99 * kb).stable
    assert not _example1_verdict(1.01 * kb).stable


def test_k_bar_local_tends_to_k_bar_inf():
    assert k_bar_local(gene_expression(), 1.0, 1e4) == pytest.approx(2.0, abs=1e-2)
    assert math.isinf(k_bar_local(gene_expression(), 1.0, 1.0, k_max=1e4))

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from posic.builtins import EXAMPLE1_NOTICE, build, example1, gene_expression, maturation, repressed_translation, sis
from posic.errors import AssumptionViolated, DimensionMismatch, NonMonotone, SingularA
from posic.sysmodel import (
    LtiSystem,
    NonlinearSystem,
    check_assumption1,
    dc_gain,
    is_internally_positive,
    is_metzler,
    linearize,
    normalized_transfer,
    require_assumption1,
    solve_steady_state,
    steady_state_map,
    transfer_function,
)


def random_positive_system(rng, n):
    A = rng.uniform(0, 1, (n, n))
    np.fill_diagonal(A, 0.0)
    A -= np.diag(A.sum(axis=0) + rng.uniform(0.1, 1.0, n))  # column diagonally dominant -> Hurwitz
    return LtiSystem(A, rng.uniform(0.1, 1, n), rng.uniform(0.1, 1, n))


def test_metzler():
    assert is_metzler([[-1, 2], [0, -3]])
    assert not is_metzler([[-1, -0.1], [0, -3]])


def test_builtins_are_positive_and_stable():
    for s in (example1(), gene_expression(), maturation()):
        assert is_internally_positive(s)
        assert check_assumption1(s).holds


def test_example1_carries_notice():
    assert EXAMPLE1_NOTICE in example1().notes
    np.testing.assert_array_equal(example1().A, [[-1, 0], [1, -1]])


def test_dc_gain_gene_expression():
    assert dc_gain(gene_expression(2.0, 3.0, 5.0)) == pytest.approx(5.0 / 6.0)


def test_dimension_checks():
    with pytest.raises(DimensionMismatch):
        LtiSystem([[-1, 0], [0, -1]], [1, 0, 0], [0, 1])


def test_singular_and_assumption_errors():
    with pytest.raises(SingularA):
        dc_gain(LtiSystem([[0.0]], [1.0], [1.0]))
    with pytest.raises(AssumptionViolated):
        require_assumption1(LtiSystem([[1.0]], [1.0], [1.0]))
    with pytest.raises(AssumptionViolated):
        require_assumption1(LtiSystem([[-1.0, 0], [0, -1]], [1.0, 0], [0, 1.0]))  # g = 0


def test_transfer_function_gene_expression():
    tf = transfer_function(gene_expression(2.0, 3.0, 5.0))
    # k2 / ((s+g1)(s+g2))
    assert tf.numerator.coeffs == pytest.approx((5.0,))
    assert tf.denominator.coeffs == pytest.approx((6.0, 5.0, 1.0))
    assert tf.relative_degree == 2
    nt = normalized_transfer(gene_expression(2.0, 3.0, 5.0))
    assert nt.dc_gain == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=1, max_value=5), st.integers(min_value=0, max_value=10**6))
def test_transfer_function_matches_linear_solve(n, seed):
    rng = np.random.default_rng(seed)
    s = random_positive_system(rng, n)
    tf = transfer_function(s)
    for z in (0.0, 0.5j, 1.0 + 2.0j, 3.0):
        direct = s.C @ np.linalg.solve(z * np.eye(n) - s.A, s.B)
        assert tf(z) == pytest.approx(direct, rel=1e-9, abs=1e-12)


def test_linearize_sis_closed_form():
    beta, N, mu = 1.0, 100.0, 50.0
    lin = linearize(sis(beta, N), [mu], beta * mu)
    assert lin.A[0, 0] == pytest.approx(beta * (mu - N))
    assert lin.B[0] == pytest.approx(N - mu)
    assert lin.C[0] == pytest.approx(1.0)


def test_linearize_repressed_translation():
    s = repressed_translation(1.0, 1.0, 1.0, 1.0)
    lin = linearize(s, [1.0, 0.5], 1.0)
    np.testing.assert_allclose(lin.A, [[-1, 0], [0.5, -1]], atol=1e-12)
    np.testing.assert_allclose(lin.B, [0, -0.25], atol=1e-12)


def test_finite_difference_linearization_matches_analytic():
    s = repressed_translation(2.0, 3.0, 1.5, 0.7)
    stripped = NonlinearSystem(dim=2, f=s.f, h=s.h, x_seed=s.x_seed, u_range=s.u_range)
    x, u = np.array([1.3, 2.0]), 0.8
    a, b = linearize(s, x, u), linearize(stripped, x, u)
    np.testing.assert_allclose(a.A, b.A, atol=1e-7)
    np.testing.assert_allclose(a.B, b.B, atol=1e-7)
    np.testing.assert_allclose(a.C, b.C, atol=1e-7)


def test_steady_state_map_directions():
    assert steady_state_map(sis()).direction == "increasing"
    m = steady_state_map(repressed_translation())
    assert m.direction == "decreasing"
    u = m.F_inverse(0.25)
    assert m.F(u) == pytest.approx(0.25, abs=1e-9)
    assert u == pytest.approx(3.0, rel=1e-8)


def test_steady_state_newton_matches_closed_form():
    s = repressed_translation(2.0, 3.0, 1.5, 0.7)
    stripped = NonlinearSystem(dim=2, f=s.f, h=s.h, x_seed=s.x_seed, u_range=s.u_range)
    np.testing.assert_allclose(solve_steady_state(stripped, 0.4), s.steady_state(0.4), rtol=1e-9)


def test_non_monotone_map():
    s = NonlinearSystem(dim=1, f=lambda x, u: np.array([-x[0] + (u - 1.0) ** 2]), h=lambda x: x[0], u_range=(0.0, 2.0))
    with pytest.raises(NonMonotone):
        steady_state_map(s)


def test_build_registry():
    assert build("gene_expression", gamma1=2.0).A[0, 0] == -2.0
    with pytest.raises(KeyError):
        build("nope")

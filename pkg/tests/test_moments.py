import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from polymoments.generator import GeneratorSpec, brownian_spec, build_dual_matrix, jacobi_spec
from polymoments.moments import conditional_moment, expm, moment_vector
from polymoments.polybasis import Polynomial, evaluate_basis

from strategies import valid_specs


def test_expm_zero_is_identity():
    np.testing.assert_array_equal(expm(np.zeros((4, 4)), 3.0), np.eye(4))


def test_expm_diagonal():
    np.testing.assert_allclose(expm(np.diag([-2.0, -6.0])), np.diag([math.exp(-2), math.exp(-6)]), rtol=1e-14)


def test_expm_jacobi_against_taylor_series():
    G = build_dual_matrix(jacobi_spec(), 2).entries
    series = np.zeros((3, 3))
    term = np.eye(3)
    for n in range(31):
        series += term
        term = term @ G / (n + 1)
    np.testing.assert_allclose(expm(G, 1.0), series, atol=1e-12)


def test_expm_rejects_bad_input():
    with pytest.raises(ValueError):
        expm(np.ones((2, 3)))
    with pytest.raises(ValueError):
        expm(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        expm(np.eye(2), -1.0)


@pytest.mark.parametrize("scale", [1e-3, 0.1, 1.0, 4.0, 30.0, 1e3])
def test_expm_matches_scipy(scale):
    rng = np.random.default_rng(7)
    A = rng.normal(size=(8, 8))
    A *= scale / np.linalg.norm(A, 1)
    ref = scipy.linalg.expm(A)
    assert np.max(np.abs(expm(A) - ref)) <= 1e-11 * np.max(np.abs(ref))


def test_expm_large_norm_stable_spectrum():
    # ||A||_1 = 1e4 with eigenvalues in [-1e4, 0]
    rng = np.random.default_rng(3)
    Q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
    lam = -np.array([0.0, 1.0, 10.0, 100.0, 1e3, 1e4])
    A = Q @ np.diag(lam) @ Q.T
    ref = scipy.linalg.expm(A)
    assert np.max(np.abs(expm(A) - ref)) <= 1e-11 * np.max(np.abs(ref))
    # a triangular generator like the dual matrices
    G = build_dual_matrix(jacobi_spec(), 12).entries * (1e4 / np.linalg.norm(build_dual_matrix(jacobi_spec(), 12).entries, 1))
    ref = scipy.linalg.expm(G)
    assert np.max(np.abs(expm(G) - ref)) <= 1e-11 * np.max(np.abs(ref))


def _jacobi_ode(y0, T):
    # m1' = 0, m2' = 2 m1 - 2 m2
    sol = solve_ivp(lambda t, m: [0.0, 2 * m[0] - 2 * m[1]], (0, T), [y0, y0 * y0], rtol=1e-12, atol=1e-14)
    return sol.y[:, -1]


def test_jacobi_second_moment():
    value = conditional_moment(jacobi_spec(), 2, [0.0, 0.0, 1.0], [0.5], 1.0)
    assert abs(value - (0.5 - 0.25 * math.exp(-2))) <= 1e-12
    assert value == pytest.approx(_jacobi_ode(0.5, 1.0)[1], abs=1e-10)


def test_jacobi_first_moment_constant():
    assert conditional_moment(jacobi_spec(), 2, [0.0, 1.0, 0.0], [0.3], 5.0) == pytest.approx(0.3, abs=1e-14)


def test_moment_vector_jacobi():
    np.testing.assert_allclose(moment_vector(jacobi_spec(), 2, [0.5], 0.0), [1.0, 0.5, 0.25], rtol=0, atol=0)
    m = moment_vector(jacobi_spec(), 2, [0.5], 1.0)
    np.testing.assert_allclose(m, [1.0, 0.5, 0.5 - 0.25 * math.exp(-2)], atol=1e-12)


def test_zero_generator_keeps_basis_values():
    y0 = np.array([0.3, -1.2])
    m = moment_vector(GeneratorSpec.zero(2), 3, y0, 7.0)
    np.testing.assert_allclose(m, evaluate_basis(build_dual_matrix(GeneratorSpec.zero(2), 3).basis, y0), rtol=1e-15)


def test_polynomial_argument_and_shape_check():
    y = Polynomial.variable(0, 1)
    assert conditional_moment(jacobi_spec(), 2, y * y, [0.5], 1.0) == pytest.approx(0.5 - 0.25 * math.exp(-2))
    with pytest.raises(ValueError):
        conditional_moment(jacobi_spec(), 2, [1.0, 0.0], [0.5], 1.0)
    G = build_dual_matrix(jacobi_spec(), 3)
    with pytest.raises(ValueError):
        conditional_moment(G, 2, [1.0, 0.0, 0.0], [0.5], 1.0)


def test_brownian_fourth_moment():
    # E[(y + B_T)^4] with y = 0 is 3 T^2
    assert conditional_moment(brownian_spec(1), 4, Polynomial.monomial((4,)), [0.0], 2.0) == pytest.approx(12.0, rel=1e-13)


def test_compound_poisson_fourth_moment():
    # Gaussian jumps at rate lam: kappa_2 = kappa_4 / 3 = lam t
    lam, T = 0.7, 1.3
    z = Polynomial.zero(1)
    spec = GeneratorSpec(1, [z], [[z]], {(2,): Polynomial.constant(lam, 1), (4,): Polynomial.constant(3 * lam, 1)})
    value = conditional_moment(spec, 4, Polynomial.monomial((4,)), [0.0], T)
    assert value == pytest.approx(3 * lam * T + 3 * (lam * T) ** 2, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(valid_specs(), st.integers(1, 3), st.floats(0.0, 2.0), st.data())
def test_dual_bidual_adjoint(spec, k, T, data):
    G = build_dual_matrix(spec, k)
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    a = rng.normal(size=G.size)
    y0 = rng.uniform(-1, 1, size=spec.dim)
    H = evaluate_basis(G.basis, y0)
    lhs = H @ (expm(G.entries, T) @ a)
    rhs = a @ moment_vector(G, k, y0, T)
    scale = np.abs(expm(G.entries, T)).sum() * np.abs(a).max() * np.abs(H).max()
    assert abs(lhs - rhs) <= 1e-10 * max(scale, 1.0)


@settings(max_examples=30, deadline=None)
@given(valid_specs(), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_semigroup_law(spec, s, t):
    G = build_dual_matrix(spec, 3).entries
    lhs = expm(G, s + t)
    rhs = expm(G, s) @ expm(G, t)
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.max(np.abs(lhs)))


@settings(max_examples=30, deadline=None)
@given(valid_specs(), st.floats(0.0, 3.0))
def test_constant_preserved(spec, T):
    E = expm(build_dual_matrix(spec, 3).entries.T, T)
    np.testing.assert_allclose(E[0], np.eye(E.shape[0])[0], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(valid_specs(), st.integers(1, 3), st.floats(0.0, 1.5))
def test_truncation_levels_consistent(spec, j, T):
    Gk = build_dual_matrix(spec, 4)
    Gj = build_dual_matrix(spec, j)
    n = Gj.size
    top = expm(Gk.entries, T)[:n, :n]
    assert np.max(np.abs(top - expm(Gj.entries, T))) <= 1e-10 * max(1.0, np.max(np.abs(top)))

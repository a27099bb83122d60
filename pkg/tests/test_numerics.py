import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dabdyn.exceptions import DegeneratePolynomialError, DomainError, IntegrationBlowupError
from dabdyn.numerics import (
    eigenvalues,
    jacobian_fd,
    numerical_rank,
    quadratic_roots_complex,
    rk4_step,
    sort_spectrum,
)
from dabdyn.stability import zero_dynamics_coefficients

finite = st.floats(-10, 10, allow_nan=False)
cplx = st.builds(complex, finite, finite)


def random_matrix(seed, n, complex_=False):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    if complex_:
        a = a + 1j * rng.normal(size=(n, n))
    return a


# -- eigenvalues ---------------------------------------------------------------

def test_eigen_diagonal():
    assert np.array_equal(eigenvalues(np.diag([1.0, 2.0, 3.0])), [3, 2, 1])


def test_eigen_rotation():
    lam = eigenvalues(np.array([[0.0, -1.0], [1.0, 0.0]]))
    assert lam == pytest.approx([1j, -1j], abs=1e-12)


def test_eigen_companion():
    roots = [2, -3, 1j, -1j]
    coeffs = np.poly(roots)
    C = np.zeros((4, 4), dtype=complex)
    C[0, :] = -coeffs[1:]
    C[1:, :-1] = np.eye(3)
    lam = eigenvalues(C.real if np.allclose(C.imag, 0) else C)
    assert lam == pytest.approx([2, 1j, -1j, -3], abs=1e-8)
    for z in lam:
        assert abs(np.polyval(coeffs, z)) < 1e-8


def test_eigen_errors():
    with pytest.raises(DomainError):
        eigenvalues(np.zeros((2, 3)))
    with pytest.raises(DomainError):
        eigenvalues(np.eye(17))
    with pytest.raises(DomainError):
        eigenvalues(np.array([[np.nan]]))


def test_sort_order_ties():
    lam = sort_spectrum([1 - 2j, 1 + 2j, 3, -1])
    assert list(lam) == [3, 1 + 2j, 1 - 2j, -1]


@given(st.integers(0, 10**6), st.integers(1, 8), st.booleans())
def test_eigen_trace_and_determinant(seed, n, complex_):
    a = random_matrix(seed, n, complex_)
    lam = eigenvalues(a)
    assert lam.size == n
    scale = 1.0 + np.linalg.norm(a, 2)
    assert np.sum(lam) == pytest.approx(np.trace(a), abs=1e-8 * scale)
    assert np.prod(lam) == pytest.approx(np.linalg.det(a), abs=1e-8 * scale ** n)


@given(st.integers(0, 10**6), st.integers(1, 8))
def test_eigen_conjugate_pairs_for_real_input(seed, n):
    lam = eigenvalues(random_matrix(seed, n))
    assert sorted(lam, key=lambda z: (z.real, z.imag)) == pytest.approx(
        sorted(lam.conjugate(), key=lambda z: (z.real, z.imag)))


@given(st.integers(0, 10**6), st.integers(1, 6))
def test_eigen_similarity_invariance(seed, n):
    rng = np.random.default_rng(seed)
    a = np.diag(rng.uniform(-5, 5, n)) + 0.3 * rng.normal(size=(n, n))
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    P = q @ np.diag(rng.uniform(0.5, 2.0, n))
    b = np.linalg.solve(P, a @ P)
    la, lb = eigenvalues(a), eigenvalues(b)
    # match each eigenvalue to its nearest counterpart
    for z in la:
        assert np.min(np.abs(lb - z)) < 1e-7 * (1 + np.linalg.norm(a, 2))


# -- rank ----------------------------------------------------------------------

def test_rank_examples():
    assert numerical_rank(np.eye(5)) == 5
    u, v = np.arange(1.0, 6.0), np.array([2.0, -1.0, 0.5])
    assert numerical_rank(np.outer(u, v)) == 1
    assert numerical_rank(np.zeros((3, 3))) == 0


def test_rank_tolerance_domain():
    with pytest.raises(DomainError):
        numerical_rank(np.eye(2), 0.0)
    with pytest.raises(DomainError):
        numerical_rank(np.eye(2), 1.0)


@given(st.integers(0, 10**6), st.integers(1, 6), st.integers(1, 6), st.floats(1e-6, 1e6))
def test_rank_invariance(seed, r, c, scale):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(0, min(r, c) + 1))
    m = rng.normal(size=(r, k)) @ rng.normal(size=(k, c))
    base = numerical_rank(m)
    assert base == k
    assert numerical_rank(m[rng.permutation(r)][:, rng.permutation(c)]) == base
    assert numerical_rank(scale * m) == base


# -- RK4 -----------------------------------------------------------------------

def test_rk4_constant():
    x = np.array([1.0, -2.0])
    assert np.array_equal(rk4_step(lambda t, y: np.zeros(2), x, 0.0, 0.1), x)


def test_rk4_exponential():
    x = rk4_step(lambda t, y: -y, np.array([1.0]), 0.0, 0.1)
    assert x[0] == pytest.approx(0.9048375, abs=1e-7)
    assert abs(x[0] - math.exp(-0.1)) < 1e-6


def test_rk4_oscillator_energy():
    def rhs(t, y):
        return np.array([y[1], -y[0]])

    x = np.array([1.0, 0.0])
    n = 1000
    dt = 2 * math.pi / n
    for k in range(n):
        x = rk4_step(rhs, x, k * dt, dt)
    assert abs(0.5 * (x @ x) - 0.5) / 0.5 < 1e-9


def test_rk4_refinement_order():
    def rhs(t, y):
        return np.array([y[1], -y[0] + math.cos(2 * t)])

    def run(n):
        x, dt = np.array([1.0, 0.0]), 1.0 / n
        for k in range(n):
            x = rk4_step(rhs, x, k * dt, dt)
        return x

    ref = run(4096)
    e1 = np.linalg.norm(run(16) - ref)
    e2 = np.linalg.norm(run(32) - ref)
    assert 12.0 < e1 / e2 < 20.0


def test_rk4_errors():
    with pytest.raises(DomainError):
        rk4_step(lambda t, y: y, np.ones(1), 0.0, 0.0)
    with pytest.raises(IntegrationBlowupError):
        rk4_step(lambda t, y: y * np.inf, np.ones(1), 0.0, 0.1)


# -- finite-difference Jacobian ------------------------------------------------

def test_jacobian_fd_linear():
    A = random_matrix(3, 4)
    assert np.allclose(jacobian_fd(lambda x: A @ x, np.ones(4)), A, atol=1e-6)


def test_jacobian_fd_hand_derivative():
    J = jacobian_fd(lambda x: np.array([x[0] ** 2, x[0] * x[1]]), np.array([1.0, 1.0]))
    assert np.allclose(J, [[2, 0], [1, 1]], atol=1e-6)


# -- complex quadratic ---------------------------------------------------------

def test_quadratic_examples():
    assert sorted(quadratic_roots_complex(1, 0, 1), key=lambda z: z.imag) == pytest.approx([-1j, 1j])
    r = quadratic_roots_complex(1, -(3 + 1j), (2 + 1j) * 1)
    assert sorted(r, key=abs) == pytest.approx([1, 2 + 1j], abs=1e-12)


def test_quadratic_degenerate():
    with pytest.raises(DegeneratePolynomialError):
        quadratic_roots_complex(0, 1, 1)


def test_quadratic_zero_dynamics_roots_stable(params):
    _, (a0, a1, b1, a2, b2) = zero_dynamics_coefficients(params)
    roots = quadratic_roots_complex(a0, complex(a1, b1), complex(a2, b2))
    assert all(z.real < 0 for z in roots)


@given(cplx.filter(lambda z: abs(z) > 1e-3), cplx, cplx)
@settings(max_examples=300)
def test_quadratic_vieta(a0, a1, a2):
    z1, z2 = quadratic_roots_complex(a0, a1, a2)
    scale = max(abs(a0), abs(a1), abs(a2))
    for z in (z1, z2):
        assert abs(a0 * z * z + a1 * z + a2) <= 1e-12 * scale * max(1.0, abs(z)) ** 2 * 10
    assert z1 + z2 == pytest.approx(-a1 / a0, rel=1e-12, abs=1e-12 * scale / abs(a0))
    assert z1 * z2 == pytest.approx(a2 / a0, rel=1e-12, abs=1e-12 * scale / abs(a0))


@given(cplx, cplx)
def test_quadratic_round_trip(r1, r2):
    z = quadratic_roots_complex(1, -(r1 + r2), r1 * r2)
    scale = 1 + abs(r1) + abs(r2)
    got = sorted(z, key=lambda w: (round(w.real, 6), round(w.imag, 6)))
    want = sorted([r1, r2], key=lambda w: (round(w.real, 6), round(w.imag, 6)))
    # double roots lose half the digits
    tol = 1e-9 * scale if abs(r1 - r2) > 1e-3 else 1e-6 * scale
    assert min(abs(got[0] - want[0]) + abs(got[1] - want[1]),
               abs(got[0] - want[1]) + abs(got[1] - want[0])) < tol

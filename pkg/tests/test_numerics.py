import numpy as np
import pytest

from qtraj.numerics import (DimensionError, SingularMatrixError, left_mult,
                            mat_exp, right_mult, solve_linear, unvec, vec)


def taylor_exp(m, t, terms=50):
    """Truncated Taylor series with compensated (Kahan) summation."""
    m = np.asarray(m, dtype=complex)
    term = np.eye(m.shape[0], dtype=complex)
    total = np.zeros_like(term)
    comp = np.zeros_like(term)
    for k in range(terms):
        y = term - comp
        new = total + y
        comp = (new - total) - y
        total = new
        term = term @ (t * m) / (k + 1)
    return total


def adjugate_solve_3x3(a, b):
    """Closed-form 3x3 solve via the cofactor (adjugate) formula."""
    a = np.asarray(a, dtype=complex)
    det = (a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
           - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
           + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]))
    cof = np.empty((3, 3), dtype=complex)
    for i in range(3):
        for j in range(3):
            minor = np.delete(np.delete(a, i, axis=0), j, axis=1)
            cof[i, j] = (-1) ** (i + j) * (minor[0, 0] * minor[1, 1]
                                           - minor[0, 1] * minor[1, 0])
    return (cof.T @ np.asarray(b, dtype=complex)) / det


def test_exp_of_zero_is_identity():
    assert np.array_equal(mat_exp(np.zeros((3, 3))), np.eye(3))


def test_exp_of_diagonal():
    out = mat_exp(np.diag([-1.0, -2.0]), 1.0)
    assert np.allclose(out, np.diag([np.exp(-1.0), np.exp(-2.0)]), atol=1e-14)


def test_exp_matches_taylor_oracle(rng):
    m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    ours = mat_exp(m, 0.3)
    oracle = taylor_exp(m, 0.3)
    assert np.max(np.abs(ours - oracle)) < 1e-10


def test_exp_semigroup_property(rng):
    for _ in range(5):
        m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        m *= 5.0 / np.linalg.norm(m, 2)
        s, t = rng.uniform(0.1, 1.0, size=2)
        lhs = mat_exp(m, s + t)
        rhs = mat_exp(m, s) @ mat_exp(m, t)
        assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_exp_rejects_non_square():
    with pytest.raises(DimensionError):
        mat_exp(np.zeros((2, 3)))


def test_exp_rejects_nonfinite_scale():
    with pytest.raises(ValueError):
        mat_exp(np.eye(2), np.inf)


def test_solve_identity(rng):
    b = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    assert np.allclose(solve_linear(np.eye(4), b), b, atol=1e-14)


def test_solve_diagonal():
    x = solve_linear(np.diag([2.0, 4.0]), np.array([2.0, 4.0]))
    assert np.allclose(x, [1.0, 1.0], atol=1e-14)


def test_solve_bloch_matrix_vs_adjugate_oracle(fig1_params):
    from qtraj.lindblad import bloch_matrix
    a = bloch_matrix(fig1_params)
    b = np.array([0.0, 0.0, 1.0])
    assert np.max(np.abs(solve_linear(a, b) - adjugate_solve_3x3(a, b))) < 1e-10


def test_solve_recovers_input(rng):
    for _ in range(5):
        m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        m += 4.0 * np.eye(4)
        x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        assert np.max(np.abs(solve_linear(m, m @ x) - x)) < 1e-10


def test_solve_residual_contract(rng):
    m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    b = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    x = solve_linear(m, b)
    resid = np.linalg.norm(m @ x - b)
    bound = 1e-10 * (np.linalg.norm(m) * np.linalg.norm(x) + np.linalg.norm(b))
    assert resid <= bound


def test_solve_singular_raises():
    m = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularMatrixError):
        solve_linear(m, np.array([1.0, 1.0]))


def test_solve_dimension_mismatch():
    with pytest.raises(DimensionError):
        solve_linear(np.eye(3), np.ones(2))


def test_vec_multiplication_conventions(rng):
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    rho = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    assert np.allclose(unvec(left_mult(a) @ vec(rho), 3), a @ rho)
    assert np.allclose(unvec(right_mult(b) @ vec(rho), 3), rho @ b)

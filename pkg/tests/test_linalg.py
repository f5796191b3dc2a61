import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from platoonctl.linalg import (
    NotPositiveDefinite,
    SingularMatrix,
    chol,
    eig_sym,
    is_neg_def,
    jacobi_eig_sym,
    kron,
    solve_linear,
)

finite_entries = st.floats(-10.0, 10.0, allow_nan=False, allow_infinity=False)


def small_matrix(rows, cols):
    return arrays(np.float64, (rows, cols), elements=finite_entries)


class TestKron:
    def test_identity_times_scalar_block(self):
        out = kron(np.eye(2), [[5.0]])
        np.testing.assert_allclose(out, np.diag([5.0, 5.0]))

    def test_output_selector_rows(self):
        # I_n (x) [1,0,0] picks the first component of every 3-state block
        n = 3
        c = kron(np.eye(n), np.array([[1.0, 0.0, 0.0]]))
        assert c.shape == (3, 9)
        x = np.arange(9.0)
        np.testing.assert_allclose(c @ x, [0.0, 3.0, 6.0])

    def test_hand_expanded_2x2(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        b = np.array([[0.0, 1.0], [1.0, 0.0]])
        expected = np.array(
            [
                [0.0, 1.0, 0.0, 2.0],
                [1.0, 0.0, 2.0, 0.0],
                [0.0, 3.0, 0.0, 4.0],
                [3.0, 0.0, 4.0, 0.0],
            ]
        )
        np.testing.assert_allclose(kron(a, b), expected)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            kron(np.array([[np.inf]]), np.eye(2))

    @settings(max_examples=50, deadline=None)
    @given(small_matrix(2, 3), small_matrix(3, 2), small_matrix(3, 2))
    def test_bilinearity(self, a, b, c):
        lhs = kron(a, b + c)
        rhs = kron(a, b) + kron(a, c)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + np.abs(rhs).max()))


class TestEigSym:
    def test_diagonal(self):
        res = eig_sym(np.diag([3.0, 1.0, 2.0]))
        np.testing.assert_allclose(res.eigenvalues, [1.0, 2.0, 3.0])

    def test_two_by_two_hand_values(self):
        # char poly (2-l)^2 - 1 -> l in {1, 3}
        res = eig_sym(np.array([[2.0, 1.0], [1.0, 2.0]]))
        np.testing.assert_allclose(res.eigenvalues, [1.0, 3.0], atol=1e-12)

    def test_reconstruction_random_12x12(self):
        rng = np.random.default_rng(7)
        m = rng.normal(size=(12, 12))
        m = 0.5 * (m + m.T)
        w, v = eig_sym(m)
        rebuilt = v @ np.diag(w) @ v.T
        assert np.linalg.norm(rebuilt - m) <= 1e-8 * np.linalg.norm(m)
        np.testing.assert_allclose(v.T @ v, np.eye(12), atol=1e-8)

    def test_eigenvalue_sum_equals_trace(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            m = rng.normal(size=(8, 8))
            m = m + m.T
            w, _ = eig_sym(m)
            assert abs(w.sum() - np.trace(m)) <= 1e-9 * max(1.0, abs(np.trace(m)))

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            eig_sym(np.ones((2, 3)))

    def test_jacobi_cross_check(self):
        rng = np.random.default_rng(3)
        m = rng.normal(size=(6, 6))
        m = m + m.T
        ref = jacobi_eig_sym(m)
        fast = eig_sym(m)
        np.testing.assert_allclose(ref.eigenvalues, fast.eigenvalues, atol=1e-9)
        rebuilt = ref.eigenvectors @ np.diag(ref.eigenvalues) @ ref.eigenvectors.T
        np.testing.assert_allclose(rebuilt, m, atol=1e-9)


class TestDefiniteness:
    def test_negative_identity(self):
        assert is_neg_def(-np.eye(3), margin=0.5)

    def test_zero_matrix_is_not_strictly_negative(self):
        assert not is_neg_def(np.zeros((3, 3)), margin=0.0)

    def test_margin_boundary(self):
        assert not is_neg_def(-0.4 * np.eye(2), margin=0.5)


class TestChol:
    def test_identity(self):
        np.testing.assert_allclose(chol(np.eye(4)), np.eye(4))

    def test_hand_factorization(self):
        l = chol(np.array([[4.0, 2.0], [2.0, 3.0]]))
        np.testing.assert_allclose(l, [[2.0, 0.0], [1.0, np.sqrt(2.0)]])

    def test_indefinite_reports_pivot(self):
        with pytest.raises(NotPositiveDefinite) as exc:
            chol(np.array([[1.0, 2.0], [2.0, 1.0]]))
        assert exc.value.pivot == 2

    def test_reconstruction(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=(9, 9))
        m = a @ a.T + 9 * np.eye(9)
        l = chol(m)
        assert np.linalg.norm(l @ l.T - m) <= 1e-9 * np.linalg.norm(m)

    def test_consistency_with_neg_def_test(self):
        # chol succeeds on m exactly when -m fails the strict negativity test
        rng = np.random.default_rng(11)
        for _ in range(25):
            a = rng.normal(size=(5, 5))
            m = 0.5 * (a + a.T)
            try:
                chol(m)
                pd = True
            except NotPositiveDefinite:
                pd = False
            assert pd == is_neg_def(-m, margin=0.0)


class TestSolveLinear:
    def test_identity(self):
        b = np.array([1.0, -2.0, 3.0])
        np.testing.assert_allclose(solve_linear(np.eye(3), b), b)

    def test_known_inverse(self):
        a = np.array([[2.0, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 8.0]])
        b = np.array([2.0, 2.0, 2.0])
        np.testing.assert_allclose(solve_linear(a, b), [1.0, 0.5, 0.25])

    def test_residual_bound(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(7, 7)) + 7 * np.eye(7)
        b = rng.normal(size=(7, 3))
        x = solve_linear(a, b)
        res = np.linalg.norm(a @ x - b)
        bound = 1e-8 * (np.linalg.norm(a) * np.linalg.norm(x) + np.linalg.norm(b))
        assert res <= bound

    def test_rank_deficient_rejected(self):
        a = np.array([[1.0, 2.0], [0.0, 0.0]])
        with pytest.raises(SingularMatrix):
            solve_linear(a, np.ones(2))

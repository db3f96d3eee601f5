import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cleandecomp.errors import BlockMismatch, DimensionMismatch, InvalidTolerance, NonFiniteEntries, NotHermitian
from cleandecomp.kernel import (
    DEFAULT_TOL,
    BlockOperator,
    ToleranceProfile,
    as_matrix,
    corner_inverse,
    hermitian_eig,
    lift_blockwise,
    operator_norm,
    polar,
    rank,
    smallest_singular_value,
    svd,
)
from cleandecomp.lattice import left_projection, right_projection

from conftest import e, ginibre, rank_forced, unitary


def herm_eigs_closed_form(A):
    """Eigenvalues of a 2x2 or 3x3 Hermitian matrix from the characteristic polynomial."""
    A = np.asarray(A, dtype=complex)
    if A.shape == (2, 2):
        a, d, b = A[0, 0].real, A[1, 1].real, A[0, 1]
        mid, rad = (a + d) / 2, np.hypot((a - d) / 2, abs(b))
        return np.array([mid - rad, mid + rad])
    q = np.trace(A).real / 3
    p1 = abs(A[0, 1]) ** 2 + abs(A[0, 2]) ** 2 + abs(A[1, 2]) ** 2
    p2 = sum((A[i, i].real - q) ** 2 for i in range(3)) + 2 * p1
    p = np.sqrt(p2 / 6)
    if p == 0:
        return np.full(3, q)
    B = (A - q * np.eye(3)) / p
    r = np.clip(np.linalg.det(B).real / 2, -1, 1)
    phi = np.arccos(r) / 3
    hi = q + 2 * p * np.cos(phi)
    lo = q + 2 * p * np.cos(phi + 2 * np.pi / 3)
    return np.array(sorted([lo, 3 * q - hi - lo, hi]))


class TestToleranceProfile:
    def test_defaults(self):
        t = ToleranceProfile()
        assert t.rank_cutoff(4) == 4 * 2.0**-45

    @pytest.mark.parametrize("field", ["projection_tol", "generic_tol", "tie_tol"])
    @pytest.mark.parametrize("value", [0.0, -1e-3, 1.0, 2.0])
    def test_rejects_out_of_range(self, field, value):
        with pytest.raises(InvalidTolerance):
            ToleranceProfile(**{field: value})

    def test_rank_cutoff_not_below_eps(self):
        with pytest.raises(InvalidTolerance):
            ToleranceProfile(rank_cutoff_rel=1e-20)

    def test_round_trip(self):
        t = ToleranceProfile(rank_cutoff_rel=1e-12, projection_tol=1e-10)
        assert ToleranceProfile.from_dict(t.to_dict()) == t


class TestAsMatrix:
    def test_rectangular(self):
        with pytest.raises(DimensionMismatch):
            as_matrix(np.zeros((2, 3)))

    def test_empty(self):
        with pytest.raises(DimensionMismatch):
            as_matrix(np.zeros((0, 0)))

    def test_nan(self):
        with pytest.raises(NonFiniteEntries):
            as_matrix([[np.nan, 0], [0, 1]])


class TestHermitianEig:
    def test_diagonal(self):
        w, V = hermitian_eig(np.diag([0.3, 0.7]))
        np.testing.assert_allclose(w, [0.3, 0.7])
        np.testing.assert_allclose(V, np.eye(2), atol=1e-15)

    def test_pauli_x(self):
        w, _ = hermitian_eig([[0, 1], [1, 0]])
        np.testing.assert_allclose(w, [-1, 1], atol=1e-15)

    def test_not_hermitian(self):
        with pytest.raises(NotHermitian):
            hermitian_eig([[0, 1], [0, 0]])

    def test_random_5x5_reconstruction(self, rng):
        G = ginibre(rng, 5)
        M = G + G.conj().T
        w, V = hermitian_eig(M)
        res = operator_norm(V @ np.diag(w) @ V.conj().T - M)
        assert res <= 5 * DEFAULT_TOL.rank_cutoff(5) * operator_norm(M)
        assert operator_norm(V.conj().T @ V - np.eye(5)) <= DEFAULT_TOL.projection_tol

    @pytest.mark.parametrize("n", [2, 3])
    def test_matches_characteristic_polynomial(self, rng, n):
        for _ in range(200):
            G = ginibre(rng, n)
            M = G + G.conj().T
            w, _ = hermitian_eig(M)
            np.testing.assert_allclose(w, herm_eigs_closed_form(M), atol=1e-12 * max(1, operator_norm(M)))


class TestSvd:
    def test_zero(self):
        _, s, _ = svd(np.zeros((3, 3)))
        assert np.all(s == 0)
        assert rank(np.zeros((3, 3))) == 0

    def test_nilpotent(self):
        U, s, V = svd(e(1, 2))
        np.testing.assert_allclose(s, [1, 0])
        assert rank(e(1, 2)) == 1
        np.testing.assert_allclose(U @ np.diag(s) @ V.conj().T, e(1, 2), atol=1e-15)

    def test_unitary(self, rng):
        _, s, _ = svd(unitary(rng, 6))
        np.testing.assert_allclose(s, np.ones(6), atol=1e-14)


class TestNorms:
    def test_projection_has_norm_one(self, rng):
        P = left_projection(ginibre(rng, 5, 2)).matrix
        assert abs(operator_norm(P) - 1) < 1e-14

    def test_two_e12(self):
        assert operator_norm(2 * e(1, 2)) == pytest.approx(2)
        assert smallest_singular_value(2 * e(1, 2)) == 0

    def test_identity(self):
        assert operator_norm(np.eye(4)) == 1
        assert smallest_singular_value(np.eye(4)) == 1

    def test_norm_matches_gram_eigenvalue(self, rng):
        # independent route: sqrt of the top eigenvalue of M^* M
        for n in range(1, 12):
            M = ginibre(rng, n) * rng.uniform(0.1, 10)
            oracle = np.sqrt(np.linalg.eigvalsh(M.conj().T @ M)[-1])
            assert abs(operator_norm(M) - oracle) <= 1e-12 * oracle


class TestPolar:
    def test_invertible_gives_unitary(self, rng):
        W, A = polar(ginibre(rng, 4))
        np.testing.assert_allclose(W.conj().T @ W, np.eye(4), atol=1e-13)

    def test_nilpotent(self):
        W, A = polar(e(1, 2))
        np.testing.assert_allclose(A, np.diag([0, 1]), atol=1e-15)
        np.testing.assert_allclose(W, e(1, 2), atol=1e-15)

    def test_projection(self):
        P = np.full((2, 2), 0.5)
        W, A = polar(P)
        np.testing.assert_allclose(W, P, atol=1e-15)
        np.testing.assert_allclose(A, P, atol=1e-15)

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(1, 8), r=st.integers(0, 8), seed=st.integers(0, 2**32 - 1))
    def test_properties(self, n, r, seed):
        rng = np.random.default_rng(seed)
        r = min(r, n)
        M = rank_forced(rng, n, r) @ ginibre(rng, n)
        W, A = polar(M)
        assert operator_norm(M - W @ A) <= n * DEFAULT_TOL.rank_cutoff(n) * max(operator_norm(M), 1e-300) + 1e-300
        tol = DEFAULT_TOL.projection_tol
        assert operator_norm(W.conj().T @ W - right_projection(M).matrix) <= tol
        assert operator_norm(W @ W.conj().T - left_projection(M).matrix) <= tol


class TestCornerInverse:
    def test_diag(self):
        np.testing.assert_allclose(corner_inverse(np.diag([2, 0])), np.diag([0.5, 0]))

    def test_identity(self):
        np.testing.assert_allclose(corner_inverse(np.eye(3)), np.eye(3))

    def test_nilpotent(self):
        T = e(1, 2)
        S = corner_inverse(T)
        np.testing.assert_allclose(S, e(2, 1), atol=1e-15)
        np.testing.assert_allclose(S @ T, e(2, 2), atol=1e-15)
        np.testing.assert_allclose(T @ S, e(1, 1), atol=1e-15)

    @pytest.mark.parametrize("n", [1, 2, 5, 9, 16])
    def test_corner_identities(self, rng, n):
        tol = DEFAULT_TOL.projection_tol
        for trial in range(40):
            r = trial % (n + 1)
            T = rank_forced(rng, n, r) if trial % 2 else rank_forced(rng, n, r) @ ginibre(rng, n)
            S = corner_inverse(T)
            L, R = left_projection(T).matrix, right_projection(T).matrix
            assert operator_norm(S @ T - R) <= tol
            assert operator_norm(T @ S - L) <= tol
            assert operator_norm(R @ S @ L - S) <= tol * max(1, operator_norm(S))


class TestBlocks:
    def test_empty_block_list(self):
        with pytest.raises(BlockMismatch):
            BlockOperator([])

    def test_mismatched_dims(self):
        X = BlockOperator([np.eye(2), np.eye(1)])
        Y = BlockOperator([np.eye(1), np.eye(2)])
        with pytest.raises(BlockMismatch):
            lift_blockwise(np.add, X, Y)

    def test_per_block_equals_factor_call(self):
        X = BlockOperator([e(1, 2), [[0.3]]])
        out = lift_blockwise(corner_inverse, X)
        np.testing.assert_allclose(out.blocks[0], corner_inverse(e(1, 2)))
        np.testing.assert_allclose(out.blocks[1], corner_inverse([[0.3]]))

    def test_dense_round_trip(self, rng):
        X = BlockOperator([ginibre(rng, 2), ginibre(rng, 3)])
        Y = BlockOperator.from_dense(X.dense(), X.block_dims)
        for a, b in zip(X.blocks, Y.blocks):
            np.testing.assert_array_equal(a, b)
        assert X.dim == 5
        np.testing.assert_array_equal(X.central_projection(0) + X.central_projection(1), np.eye(5))

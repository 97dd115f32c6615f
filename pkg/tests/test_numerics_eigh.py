import numpy as np
import pytest

from bladenv.errors import ConvergenceError, ValidationError
from bladenv.numerics import eigh_symmetric, symmetrize


def random_symmetric(n, seed):
    rng = np.random.Generator(np.random.Philox(seed))
    a = rng.standard_normal((n, n))
    return a + a.T


class TestEighSymmetric:
    def test_matches_lapack_eigenvalues(self):
        # numpy's eigh is the independent reference implementation
        for seed, n in ((0, 2), (1, 3), (2, 7), (3, 24), (4, 60)):
            a = random_symmetric(n, seed)
            vals, _ = eigh_symmetric(a)
            ref = np.linalg.eigvalsh(a)[::-1]
            assert np.max(np.abs(vals - ref)) < 1e-10 * max(1.0, np.abs(ref).max())

    def test_reconstruction_and_orthogonality(self):
        a = random_symmetric(40, 11)
        vals, vecs = eigh_symmetric(a)
        n = a.shape[0]
        assert np.max(np.abs(vecs.T @ vecs - np.eye(n))) < 1e-10
        recon = vecs @ np.diag(vals) @ vecs.T
        assert np.max(np.abs(a - recon)) < 1e-8 * max(1.0, np.abs(a).max())

    def test_descending_order(self):
        vals, _ = eigh_symmetric(random_symmetric(15, 5))
        assert np.all(np.diff(vals) <= 1e-12)

    def test_sign_convention(self):
        # largest-magnitude component of every eigenvector is nonnegative
        _, vecs = eigh_symmetric(random_symmetric(12, 9))
        for j in range(vecs.shape[1]):
            col = vecs[:, j]
            assert col[np.argmax(np.abs(col))] >= 0.0

    def test_deterministic(self):
        a = random_symmetric(20, 3)
        first = eigh_symmetric(a)
        second = eigh_symmetric(a)
        assert np.array_equal(first.eigenvalues, second.eigenvalues)
        assert np.array_equal(first.eigenvectors, second.eigenvectors)

    def test_symmetrizes_input(self):
        rng = np.random.Generator(np.random.Philox(8))
        a = rng.standard_normal((6, 6))
        vals, _ = eigh_symmetric(a)
        ref = np.linalg.eigvalsh(0.5 * (a + a.T))[::-1]
        assert np.allclose(vals, ref, atol=1e-10)

    def test_diagonal_matrix(self):
        vals, vecs = eigh_symmetric(np.diag([3.0, -1.0, 2.0]))
        assert np.array_equal(vals, [3.0, 2.0, -1.0])
        assert np.array_equal(np.abs(vecs), np.eye(3)[:, [0, 2, 1]])

    def test_zero_matrix(self):
        vals, vecs = eigh_symmetric(np.zeros((4, 4)))
        assert np.array_equal(vals, np.zeros(4))
        assert np.array_equal(vecs, np.eye(4))

    def test_identical_eigenvalues(self):
        vals, vecs = eigh_symmetric(np.eye(5) * 2.5)
        assert np.allclose(vals, 2.5)
        assert np.max(np.abs(vecs.T @ vecs - np.eye(5))) < 1e-12

    def test_rejects_nonsquare(self):
        with pytest.raises(ValidationError):
            eigh_symmetric(np.ones((2, 3)))

    def test_rejects_nonfinite(self):
        a = np.eye(3)
        a[0, 1] = np.nan
        with pytest.raises(ValidationError):
            eigh_symmetric(a)

    def test_nonconvergence_raises(self):
        a = random_symmetric(8, 2)
        with pytest.raises(ConvergenceError):
            eigh_symmetric(a, max_sweeps=0)


def test_symmetrize_exact():
    a = np.array([[1.0, 2.0], [4.0, 3.0]])
    s = symmetrize(a)
    assert np.array_equal(s, s.T)
    assert np.array_equal(s, [[1.0, 3.0], [3.0, 3.0]])

import numpy as np
import pytest
from scipy.optimize import linprog

from bladenv.errors import ResidualInfeasibleWarning, ValidationError
from bladenv.numerics import bpdn_solve


def sparse_problem(n_rows, n_cols, support, coeffs, seed):
    rng = np.random.Generator(np.random.Philox(seed))
    psi = rng.standard_normal((n_rows, n_cols)) / np.sqrt(n_rows)
    truth = np.zeros(n_cols)
    truth[support] = coeffs
    return psi, truth, psi @ truth


def l1_reference(psi, f):
    """Equality-constrained minimum-l1 solution through an LP split a = p - q."""
    n = psi.shape[1]
    a_eq = np.hstack([psi, -psi])
    res = linprog(
        np.ones(2 * n),
        A_eq=a_eq,
        b_eq=f,
        bounds=[(0.0, None)] * (2 * n),
        method="highs",
    )
    assert res.status == 0
    return res.x[:n] - res.x[n:]


class TestBpdnSolve:
    def test_zero_when_bound_exceeds_signal(self):
        rng = np.random.Generator(np.random.Philox(1))
        psi = rng.standard_normal((10, 20))
        f = rng.standard_normal(10)
        a = bpdn_solve(psi, f, epsilon=np.linalg.norm(f) * 1.001)
        assert np.array_equal(a, np.zeros(20))

    def test_zero_signal(self):
        psi = np.eye(5)
        a = bpdn_solve(psi, np.zeros(5), epsilon=0.0)
        assert np.array_equal(a, np.zeros(5))

    def test_sparse_recovery(self):
        psi, truth, f = sparse_problem(30, 80, [4, 17, 51], [1.5, -2.0, 0.7], 42)
        a = bpdn_solve(psi, f, epsilon=1e-8)
        assert np.max(np.abs(a - truth)) < 1e-4
        # feasibility holds to the documented 1e-6 relative margin
        assert np.linalg.norm(psi @ a - f) <= 1e-8 + 1.1e-6 * np.linalg.norm(f)

    def test_objective_matches_lp_reference(self):
        # with a tiny residual bound the l1 objective approaches the
        # equality-constrained optimum computed by an LP solver
        rng = np.random.Generator(np.random.Philox(7))
        psi = rng.standard_normal((12, 30)) / np.sqrt(12)
        truth = np.zeros(30)
        truth[[2, 9, 20]] = [1.0, -0.5, 2.0]
        f = psi @ truth
        a = bpdn_solve(psi, f, epsilon=1e-9)
        ref = l1_reference(psi, f)
        assert np.abs(a).sum() <= np.abs(ref).sum() + 1e-4

    def test_feasibility_of_returned_point(self):
        psi, _, f = sparse_problem(40, 100, [3, 30, 77], [0.8, 1.2, -0.3], 5)
        eps = 1e-3
        a = bpdn_solve(psi, f, epsilon=eps)
        assert np.linalg.norm(psi @ a - f) <= eps + 1.1e-6 * np.linalg.norm(f)

    def test_looser_bound_never_increases_l1(self):
        psi, _, f = sparse_problem(25, 60, [1, 22, 40], [2.0, -1.0, 0.5], 9)
        norms = []
        for eps in (1e-6, 1e-3, 1e-1):
            a = bpdn_solve(psi, f, epsilon=eps)
            norms.append(np.abs(a).sum())
        assert norms[0] >= norms[1] - 1e-6
        assert norms[1] >= norms[2] - 1e-6

    def test_unachievable_bound_warns_and_falls_back(self):
        # an inconsistent overdetermined system cannot reach residual zero
        rng = np.random.Generator(np.random.Philox(3))
        psi = rng.standard_normal((30, 4))
        f = rng.standard_normal(30)
        with pytest.warns(ResidualInfeasibleWarning):
            a = bpdn_solve(psi, f, epsilon=1e-12, max_iter=300)
        ls, *_ = np.linalg.lstsq(psi, f, rcond=None)
        assert np.allclose(a, ls, atol=1e-12)

    def test_deterministic(self):
        psi, _, f = sparse_problem(20, 50, [0, 10, 33], [1.0, 1.0, 1.0], 13)
        first = bpdn_solve(psi, f, epsilon=1e-6)
        second = bpdn_solve(psi, f, epsilon=1e-6)
        assert np.array_equal(first, second)

    def test_scale_invariance(self):
        # normalization makes the solution commute with rescaling of f
        psi, _, f = sparse_problem(20, 50, [5, 25, 45], [1.0, -2.0, 0.4], 21)
        base = bpdn_solve(psi, f, epsilon=1e-6)
        scaled = bpdn_solve(psi, 1e4 * f, epsilon=1e-2)
        assert np.max(np.abs(scaled - 1e4 * base)) < 1e-3 * np.max(np.abs(scaled))

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValidationError):
            bpdn_solve(np.ones((3, 2)), np.ones(4), epsilon=0.1)

    def test_rejects_negative_epsilon(self):
        with pytest.raises(ValidationError):
            bpdn_solve(np.eye(2), np.ones(2), epsilon=-1.0)

    def test_rejects_nonfinite(self):
        psi = np.eye(3)
        f = np.array([1.0, np.inf, 0.0])
        with pytest.raises(ValidationError):
            bpdn_solve(psi, f, epsilon=0.1)

import logging

import numpy as np
import pytest

from conftest import small_problem
from dslearn.dual import (DualProblem, SingularSystemError, build_dual, gamma_from_alpha,
                          inverse_system, solve_box_qp)


def lagrangian_at_minimizer(p, alpha):
    """Reference value of the Lagrangian minimized over Phi and xi.

    With ``gamma = C* - alpha`` the slack terms cancel, so only the Phi part
    is left; its minimizer solves the normal equations directly.
    """
    X, y, w, b = p["X"], p["y"], p["w"], p["b"]
    G = X @ X.T
    M = G + p["lambda1"] * np.diag(p["reweight"]) + p["lambda2"] * p["L"]
    u = X @ (alpha * y)
    phi = np.linalg.solve(M, G + 0.5 * np.outer(u, w))
    value = (np.sum((X.T - X.T @ phi) ** 2)
             + p["lambda1"] * np.sum(p["reweight"][:, None] * phi ** 2)
             + p["lambda2"] * np.trace(phi.T @ p["L"] @ phi)
             - alpha @ (y * (w @ phi.T @ X + b) - 1.0))
    return value, phi


def dual_of(p):
    return build_dual(p["X"], p["y"], p["w"], p["b"], p["reweight"], p["lambda1"],
                      p["lambda2"], p["L"], p["c_star"])


class TestBuildDual:
    def test_zero_w_gives_zero_K(self, problem):
        problem["w"] = np.zeros_like(problem["w"])
        assert np.all(dual_of(problem).K == 0)

    @pytest.mark.parametrize("seed", range(5))
    def test_symmetric(self, seed):
        p = small_problem(seed, m=5, n=4)
        K = dual_of(p).K
        np.testing.assert_allclose(K, K.T, rtol=0, atol=1e-9 * np.abs(K).max())

    @pytest.mark.parametrize("seed", range(5))
    def test_negative_semidefinite(self, seed):
        K = dual_of(small_problem(seed, m=8, n=6)).K
        assert np.linalg.eigvalsh(K).max() <= 1e-9 * np.abs(K).max()

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_lagrangian(self, seed):
        p = small_problem(seed, m=4 + seed % 8, n=3 + seed % 5)
        d = dual_of(p)
        rng = np.random.default_rng(100 + seed)
        for _ in range(3):
            alpha = rng.uniform(0, p["c_star"], len(p["y"]))
            ref, _ = lagrangian_at_minimizer(p, alpha)
            assert d.value(alpha) == pytest.approx(ref, rel=1e-6, abs=1e-9)

    def test_singular_system(self):
        X = np.zeros((3, 2))
        with pytest.raises(SingularSystemError, match="regularize"):
            build_dual(X, np.array([1.0, -1.0]), np.ones(3), 0.0, np.zeros(3), 0.0, 0.0,
                       np.zeros((3, 3)), 1.0)

    def test_ridge_fallback_handles_near_singular(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(5, 3))
        M = X @ X.T
        inv = inverse_system(M, M)
        assert np.all(np.isfinite(inv))


class TestSolveBoxQP:
    @staticmethod
    def make(K, q, c):
        K = np.asarray(K, dtype=float)
        return DualProblem(K, np.asarray(q, dtype=float), c, 0.0, np.eye(1), np.eye(1))

    def test_interior(self):
        sol = solve_box_qp(self.make(-2 * np.eye(2), [1, 1], 1.0))
        np.testing.assert_allclose(sol.alpha, [0.5, 0.5])

    def test_clipped(self):
        sol = solve_box_qp(self.make(-2 * np.eye(2), [1, 1], 0.3))
        np.testing.assert_allclose(sol.alpha, [0.3, 0.3])
        np.testing.assert_allclose(sol.gamma, [0.0, 0.0], atol=1e-15)

    @pytest.mark.parametrize("seed", range(3))
    def test_grid_oracle(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(4, 4))
        K = -(A @ A.T + 0.5 * np.eye(4))
        q = rng.normal(size=4) * 2
        prob = self.make(K, q, 1.0)
        sol = solve_box_qp(prob, tol=1e-10)
        g = np.linspace(0.0, 1.0, 101)
        best, arg = -np.inf, None
        grid = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)
        for a0 in g:
            pts = np.column_stack([np.full(len(grid), a0), grid])
            vals = 0.5 * np.einsum("ij,jk,ik->i", pts, K, pts) + pts @ q
            i = int(vals.argmax())
            if vals[i] > best:
                best, arg = vals[i], pts[i]
        assert np.max(np.abs(sol.alpha - arg)) <= 0.02
        assert sol.dual_value >= best - 1e-12

    def test_box_feasible_every_iterate(self):
        rng = np.random.default_rng(5)
        A = rng.normal(size=(12, 12))
        prob = self.make(-(A @ A.T), rng.normal(size=12) * 5, 0.7)
        seen = []
        solve_box_qp(prob, callback=lambda a: seen.append(a.copy()))
        assert seen
        for a in seen:
            assert np.all(a >= 0) and np.all(a <= 0.7)

    def test_deterministic(self):
        p = small_problem(3, m=8, n=7)
        a = solve_box_qp(dual_of(p)).alpha
        b = solve_box_qp(dual_of(p)).alpha
        assert np.array_equal(a, b)

    def test_larger_box_never_lowers_value(self):
        p = small_problem(4, m=8, n=7)
        values = []
        for c in (0.1, 0.5, 1.0, 2.0):
            p["c_star"] = c
            values.append(solve_box_qp(dual_of(p), tol=1e-10).dual_value)
        assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))

    def test_not_concave_warns(self, caplog):
        with caplog.at_level(logging.WARNING, logger="dslearn.dual"):
            sol = solve_box_qp(self.make(np.diag([1.0, -1.0]), [0.1, 0.1], 1.0))
        assert "dual not concave" in caplog.text
        assert np.all((sol.alpha >= 0) & (sol.alpha <= 1))

    @pytest.mark.parametrize("seed", range(5))
    def test_weak_duality(self, seed):
        p = small_problem(seed, m=7, n=6)
        sol = solve_box_qp(dual_of(p), tol=1e-10)
        rng = np.random.default_rng(seed)
        X, y = p["X"], p["y"]
        for _ in range(5):
            phi = rng.normal(size=(7, 7))
            xi = np.maximum(0.0, 1 - y * (p["w"] @ phi.T @ X + p["b"]))
            primal = (np.sum((X.T - X.T @ phi) ** 2)
                      + p["lambda1"] * np.sum(p["reweight"][:, None] * phi ** 2)
                      + p["lambda2"] * np.trace(phi.T @ p["L"] @ phi) + p["c_star"] * xi.sum())
            assert primal - sol.dual_value >= -1e-6 * max(1.0, abs(primal))


class TestGamma:
    def test_zero(self):
        np.testing.assert_array_equal(gamma_from_alpha([0.0, 0.0], 1.5), [1.5, 1.5])

    def test_full(self):
        np.testing.assert_array_equal(gamma_from_alpha([1.5, 1.5], 1.5), [0.0, 0.0])

    def test_mixed(self):
        np.testing.assert_array_equal(gamma_from_alpha([0.5, 1.5], 2.0), [1.5, 0.5])

    @pytest.mark.parametrize("alpha", [[-0.1, 0.0], [0.0, 2.1]])
    def test_out_of_box(self, alpha):
        with pytest.raises(ValueError):
            gamma_from_alpha(alpha, 2.0)

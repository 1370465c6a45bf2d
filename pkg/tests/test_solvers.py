import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from expostdp.data import from_arrays
from expostdp.errors import ConvergenceError
from expostdp.solvers import (
    BallQuadratic,
    minimize_ball_quadratic,
    minimize_logistic,
    logistic_objective,
    project_to_ball,
    ridge_objective,
)


def _dataset(X, y, task="regression"):
    return from_arrays(np.asarray(X, float), np.asarray(y, float), task)


def naive_ridge(X, y, theta, lam):
    n = len(y)
    total = 0.0
    for i in range(n):
        pred = sum(X[i][j] * theta[j] for j in range(len(theta)))
        total += (y[i] - pred) ** 2
    return total / (2 * n) + lam * sum(t * t for t in theta) / 2


def naive_logistic(X, y, theta, lam):
    n = len(y)
    total = 0.0
    for i in range(n):
        pred = sum(X[i][j] * theta[j] for j in range(len(theta)))
        total += math.log(1 + math.exp(-y[i] * pred))
    return total / n + lam * sum(t * t for t in theta) / 2


class TestObjectives:
    def test_ridge_zero_hypothesis(self):
        ds = _dataset([[0.5, 0.2], [0.1, 0.3]], [0.4, -0.6])
        assert ridge_objective(ds, np.zeros(2), 0.0) == pytest.approx((0.4**2 + 0.6**2) / 4)

    def test_ridge_exact_fit(self):
        ds = _dataset([[1.0, 0.0]], [1.0])
        assert ridge_objective(ds, np.array([1.0, 0.0]), 0.0) == 0.0

    def test_ridge_matches_naive_loop(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(-0.2, 0.2, size=(7, 3))
        y = rng.uniform(-1, 1, size=7)
        theta = rng.normal(size=3)
        ds = _dataset(X, y)
        assert ridge_objective(ds, theta, 0.3) == pytest.approx(
            naive_ridge(X, y, theta, 0.3), abs=1e-12
        )

    def test_logistic_zero_hypothesis(self):
        ds = _dataset([[0.4, 0.1], [0.2, 0.2]], [1.0, -1.0], "classification")
        assert logistic_objective(ds, np.zeros(2), 0.1) == pytest.approx(math.log(2))

    def test_logistic_opposite_labels_same_point(self):
        ds = _dataset([[0.5], [0.5]], [1.0, -1.0], "classification")
        theta = np.array([2.0])
        expect = (math.log(1 + math.exp(-1.0)) + math.log(1 + math.exp(1.0))) / 2 + 0.05 * 4.0
        assert logistic_objective(ds, theta, 0.1) == pytest.approx(expect, rel=1e-12)

    def test_logistic_matches_naive_loop(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(-0.2, 0.2, size=(9, 4))
        y = np.where(rng.uniform(size=9) < 0.5, -1.0, 1.0)
        theta = rng.normal(size=4)
        ds = _dataset(X, y, "classification")
        assert logistic_objective(ds, theta, 0.2) == pytest.approx(
            naive_logistic(X, y, theta, 0.2), abs=1e-12
        )

    def test_dimension_mismatch(self):
        ds = _dataset([[0.5, 0.2]], [0.4])
        with pytest.raises(ValueError):
            ridge_objective(ds, np.zeros(3), 0.1)
        with pytest.raises(ValueError):
            logistic_objective(ds, np.zeros(3), 0.1)

    def test_logistic_stable_at_extreme_margins(self):
        ds = _dataset([[1.0]], [1.0], "classification")
        assert logistic_objective(ds, np.array([800.0]), 0.0) == 0.0
        assert logistic_objective(ds, np.array([-800.0]), 0.0) == pytest.approx(800.0)


def kkt_residual(problem, theta):
    """Independent KKT check: recover mu from stationarity, measure all conditions."""
    A, b, R = problem.A, problem.b, problem.radius
    norm = np.linalg.norm(theta)
    if norm < R * (1 - 1e-6) or norm == 0.0:
        mu = 0.0
    else:
        mu = max(0.0, float((b @ theta - theta @ A @ theta) / (theta @ theta)))
    stationarity = np.linalg.norm((A + mu * np.eye(len(b))) @ theta - b)
    feasibility = max(0.0, norm - R)
    psd = max(0.0, -float(np.linalg.eigvalsh(A + mu * np.eye(len(b))).min()))
    return max(stationarity, feasibility, psd - 1e-9)


def grid_oracle_2d(problem, resolution=1e-3):
    """Dense search over the disk plus its boundary circle."""
    R = problem.radius
    xs = np.arange(-R, R + resolution, resolution)
    gx, gy = np.meshgrid(xs, xs)
    inside = gx**2 + gy**2 <= R * R
    pts = np.stack([gx[inside], gy[inside]], axis=1)
    angles = np.arange(0.0, 2 * math.pi, resolution)
    ring = R * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    pts = np.vstack([pts, ring])
    A, b = problem.A, problem.b
    vals = 0.5 * np.einsum("ni,ij,nj->n", pts, A, pts) - pts @ b
    return float(vals.min())


class TestBallQuadratic:
    def test_interior_zero(self):
        h = minimize_ball_quadratic(BallQuadratic(np.eye(2), np.zeros(2), 1.0))
        assert np.allclose(h.theta, 0.0)

    def test_boundary_isotropic(self):
        b = np.array([1.2, 1.6])  # norm 2 = 2R
        h = minimize_ball_quadratic(BallQuadratic(np.eye(2), b, 1.0))
        assert np.allclose(h.theta, b / 2.0, atol=1e-10)

    def test_indefinite_hard_case_value(self):
        problem = BallQuadratic(np.diag([1.0, -1.0]), np.zeros(2), 1.0)
        h = minimize_ball_quadratic(problem)
        assert problem.value(h.theta) == pytest.approx(-0.5, abs=1e-10)
        assert abs(h.theta[1]) == pytest.approx(1.0, abs=1e-10)

    def test_grid_oracle_agreement(self):
        rng = np.random.default_rng(7)
        for _ in range(8):
            A = rng.normal(size=(2, 2))
            A = (A + A.T) / 2
            problem = BallQuadratic(A, rng.normal(size=2), 1.0)
            h = minimize_ball_quadratic(problem)
            assert abs(problem.value(h.theta) - grid_oracle_2d(problem)) <= 1e-3

    @pytest.mark.parametrize("seed", range(20))
    def test_random_kkt(self, seed):
        rng = np.random.default_rng(seed)
        p = int(rng.integers(1, 7))
        A = rng.normal(size=(p, p))
        A = (A + A.T) / 2
        problem = BallQuadratic(A, rng.normal(size=p), float(rng.uniform(0.3, 3.0)))
        h = minimize_ball_quadratic(problem)
        assert kkt_residual(problem, h.theta) <= 1e-8
        assert np.linalg.norm(h.theta) <= problem.radius + 1e-8

    def test_engineered_hard_case(self):
        # b orthogonal to the bottom eigenspace of an indefinite quadratic
        rng = np.random.default_rng(3)
        q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
        w = np.array([-2.0, -2.0, 1.0, 3.0])
        A = q @ np.diag(w) @ q.T
        b = q @ np.array([0.0, 0.0, 0.4, -0.2])
        problem = BallQuadratic((A + A.T) / 2, b, 2.0)
        h = minimize_ball_quadratic(problem)
        assert kkt_residual(problem, h.theta) <= 1e-8
        assert np.linalg.norm(h.theta) == pytest.approx(2.0, abs=1e-8)

    def test_near_hard_case(self):
        rng = np.random.default_rng(4)
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        A = q @ np.diag([-1.0, 0.5, 2.0]) @ q.T
        b = q @ np.array([1e-11, 0.3, 0.1])
        problem = BallQuadratic((A + A.T) / 2, b, 1.0)
        h = minimize_ball_quadratic(problem)
        assert kkt_residual(problem, h.theta) <= 1e-8

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            BallQuadratic(np.array([[1.0, 0.5], [0.0, 1.0]]), np.zeros(2), 1.0)

    def test_rejects_bad_radius(self):
        with pytest.raises(ValueError):
            BallQuadratic(np.eye(2), np.zeros(2), 0.0)

    @given(
        Z=hnp.arrays(np.float64, (3, 3), elements=st.floats(-5, 5)),
        theta=hnp.arrays(np.float64, (3,), elements=st.floats(-5, 5)),
    )
    @settings(max_examples=100, deadline=None)
    def test_symmetrization_is_noop_on_quadratic_form(self, Z, theta):
        sym = (Z + Z.T) / 2.0
        assert theta @ Z @ theta == pytest.approx(theta @ sym @ theta, rel=1e-9, abs=1e-9)


class TestMinimizeLogistic:
    def test_symmetric_pair_gives_zero(self):
        ds = _dataset([[0.5, 0.1], [0.5, 0.1]], [1.0, -1.0], "classification")
        h = minimize_logistic(ds, 0.5, tol=1e-10)
        assert np.allclose(h.theta, 0.0, atol=1e-8)

    def test_matches_1d_bisection_oracle(self):
        X = np.array([[0.8], [0.6], [-0.9], [0.4], [-0.5]])
        y = np.array([1.0, -1.0, -1.0, 1.0, 1.0])
        ds = _dataset(X, y, "classification")
        lam = 0.3

        def deriv(t):
            margins = y * (X[:, 0] * t)
            return float(np.mean(-y * X[:, 0] / (1 + np.exp(margins)))) + lam * t

        lo, hi = -50.0, 50.0
        for _ in range(200):
            mid = (lo + hi) / 2
            if deriv(mid) > 0:
                hi = mid
            else:
                lo = mid
        h = minimize_logistic(ds, lam, tol=1e-10)
        assert h.theta[0] == pytest.approx((lo + hi) / 2, abs=1e-6)

    def test_norm_bound(self):
        rng = np.random.default_rng(5)
        for lam in (0.01, 0.1, 1.0):
            X = rng.uniform(-0.3, 0.3, size=(50, 4))
            X /= np.maximum(1.0, np.abs(X).sum(axis=1, keepdims=True))
            y = np.where(rng.uniform(size=50) < 0.5, -1.0, 1.0)
            ds = _dataset(X, y, "classification")
            h = minimize_logistic(ds, lam, tol=1e-8)
            assert h.norm <= math.sqrt(2 * math.log(2) / lam)

    def test_gradient_certificate(self):
        ds = _dataset(np.random.default_rng(6).uniform(-0.2, 0.2, (30, 3)),
                      np.where(np.random.default_rng(7).uniform(size=30) < 0.5, -1.0, 1.0),
                      "classification")
        tol = 1e-7
        h = minimize_logistic(ds, 0.05, tol=tol)
        from expostdp.solvers import _logistic_value_grad

        _, grad = _logistic_value_grad(ds, h.theta, 0.05)
        assert np.linalg.norm(grad) <= tol

    def test_iteration_cap_raises(self):
        ds = _dataset([[0.9, 0.0], [0.0, 0.9]], [1.0, -1.0], "classification")
        with pytest.raises(ConvergenceError) as err:
            minimize_logistic(ds, 0.001, tol=1e-14, max_iter=2)
        assert err.value.gradient_norm is not None

    def test_lambda_must_be_positive(self):
        ds = _dataset([[0.5]], [1.0], "classification")
        with pytest.raises(ValueError):
            minimize_logistic(ds, 0.0)

    def test_pointwise_lipschitz_probe(self):
        # per-sample logistic loss is 1-Lipschitz in theta when ||x||_1 <= 1
        rng = np.random.default_rng(8)
        for _ in range(200):
            x = rng.normal(size=4)
            x /= max(1.0, np.abs(x).sum())
            y = 1.0 if rng.uniform() < 0.5 else -1.0
            t1, t2 = rng.normal(size=4), rng.normal(size=4)
            l1 = math.log(1 + math.exp(-y * float(x @ t1)))
            l2 = math.log(1 + math.exp(-y * float(x @ t2)))
            assert abs(l1 - l2) <= np.linalg.norm(t1 - t2) + 1e-12


class TestProjectToBall:
    def test_inside_untouched(self):
        v = np.array([0.3, 0.4])
        assert project_to_ball(v, 1.0) is v

    def test_outside_scaled(self):
        v = np.array([3.0, 4.0])
        out = project_to_ball(v, 1.0)
        assert np.linalg.norm(out) == pytest.approx(1.0)
        assert np.allclose(out, v / 5.0)

"""Deterministic optimization: ball-constrained quadratics and logistic fits.

The ridge step of the private pipelines minimizes a quadratic built from
*noisy* second moments over an L2 ball.  The noise can make the quadratic
indefinite, so this is a genuine trust-region subproblem; we solve it by
eigendecomposition plus safeguarded root finding on the shift parameter
(More-Sorensen style), with explicit handling of the hard case where the
linear term is orthogonal to the bottom eigenspace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ConvergenceError

__all__ = [
    "Hypothesis",
    "BallQuadratic",
    "ridge_objective",
    "logistic_objective",
    "minimize_ball_quadratic",
    "minimize_logistic",
    "project_to_ball",
]

DEFAULT_KKT_TOL = 1e-8
DEFAULT_GRAD_TOL = 1e-8
MAX_ITERATIONS = 100_000


@dataclass(frozen=True)
class Hypothesis:
    """Weight vector together with the norm cap implied by the regularizer."""

    theta: np.ndarray
    norm_cap: float

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.theta))


def project_to_ball(theta: np.ndarray, radius: float) -> np.ndarray:
    """Scale ``theta`` down onto the L2 ball of the given radius (no-op inside)."""
    norm = np.linalg.norm(theta)
    if norm <= radius or norm == 0.0:
        return theta
    return theta * (radius / norm)


def ridge_objective(dataset: Dataset, theta, lam: float) -> float:
    """Regularized least-squares loss (1/2n)||y - X theta||^2 + lam ||theta||^2 / 2."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (dataset.p,):
        raise ValueError(f"theta shape {theta.shape} does not match p={dataset.p}")
    resid = dataset.y - dataset.X @ theta
    return float(resid @ resid / (2.0 * dataset.n) + 0.5 * lam * (theta @ theta))


def logistic_objective(dataset: Dataset, theta, lam: float) -> float:
    """Regularized logistic loss (1/n) sum log(1 + exp(-y x.theta)) + lam ||theta||^2 / 2."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (dataset.p,):
        raise ValueError(f"theta shape {theta.shape} does not match p={dataset.p}")
    margins = dataset.y * (dataset.X @ theta)
    return float(np.logaddexp(0.0, -margins).mean() + 0.5 * lam * (theta @ theta))


@dataclass(frozen=True)
class BallQuadratic:
    """Minimize 0.5 theta' A theta - b' theta subject to ||theta|| <= radius.

    ``A`` must be symmetric to machine precision but may be indefinite.
    """

    A: np.ndarray
    b: np.ndarray
    radius: float

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        if b.shape != (A.shape[0],):
            raise ValueError(f"b shape {b.shape} does not match A shape {A.shape}")
        asym = np.abs(A - A.T).max(initial=0.0)
        scale = max(1.0, np.abs(A).max(initial=0.0))
        if asym > 1e-8 * scale:
            raise ValueError(f"A is not symmetric: max asymmetry {asym:.3g}")
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    def value(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        return float(0.5 * theta @ self.A @ theta - self.b @ theta)


def _ridge_problem(dataset: Dataset, Z: np.ndarray, z: np.ndarray, lam: float) -> BallQuadratic:
    """Ball quadratic for the (possibly noisy) ridge moments Z ~ X'X, z ~ X'y."""
    n = dataset.n
    A = (Z + Z.T) / (2.0 * n) + lam * np.eye(dataset.p)
    return BallQuadratic(A, np.asarray(z, dtype=float) / n, math.sqrt(1.0 / lam))


def minimize_ball_quadratic(problem: BallQuadratic, tol: float = DEFAULT_KKT_TOL) -> Hypothesis:
    """Global minimizer of a ball-constrained quadratic via eigendecomposition.

    Returns theta satisfying the trust-region KKT system
    (A + mu I) theta = b, mu >= 0, ||theta|| <= radius,
    mu (||theta|| - radius) = 0, A + mu I PSD, with residual at most ``tol``.
    The hard case (b orthogonal to the bottom eigenspace of an indefinite A)
    is resolved exactly by adding a bottom-eigenvector component.
    """
    if not (math.isfinite(tol) and tol > 0):
        raise ValueError(f"tolerance must be positive, got {tol}")
    A = (problem.A + problem.A.T) / 2.0
    b, R = problem.b, problem.radius
    if b.shape[0] == 1:
        return Hypothesis(_solve_1d(float(A[0, 0]), float(b[0]), R), R)
    w, Q = np.linalg.eigh(A)
    beta = Q.T @ b
    wmin = float(w[0])

    if wmin > 0:
        theta = Q @ (beta / w)
        if np.linalg.norm(theta) <= R:
            return Hypothesis(theta, R)

    mu_floor = max(0.0, -wmin)

    def pseudo_solution():
        """Bottom-eigenspace split at the shift floor mu = -wmin."""
        scale = max(1.0, float(np.abs(w).max()))
        bottom = w - wmin <= 1e-12 * scale
        rest = ~bottom
        resid = float(np.linalg.norm(beta[bottom]))
        if rest.any():
            part = Q[:, rest] @ (beta[rest] / (w[rest] + mu_floor))
        else:
            part = np.zeros_like(b)
        return bottom, part, float(np.linalg.norm(part)), resid

    if wmin <= 0:
        bottom, part, part_norm, resid_bottom = pseudo_solution()
        if resid_bottom <= tol * max(1.0, float(np.linalg.norm(b))) and part_norm <= R:
            # Hard case: stationarity already holds at the shift floor.  A
            # strictly negative wmin forces the boundary, reached along a
            # bottom eigenvector; wmin == 0 admits the interior solution.
            if wmin < 0:
                tau = math.sqrt(max(R * R - part_norm * part_norm, 0.0))
                part = part + tau * Q[:, bottom][:, 0]
            return Hypothesis(part, R)

    beta_sq = beta * beta

    def phi(mu: float) -> float:
        d = w + mu
        if np.any(d <= 0):
            return math.inf
        return math.sqrt(float(beta_sq @ (1.0 / (d * d))))

    lo, hi = mu_floor, max(1.0, 2.0 * mu_floor)
    while phi(hi) >= R:
        hi = 2.0 * hi + 1.0
        if hi > 1e300:
            raise ConvergenceError("trust-region shift search diverged")
    # Safeguarded Newton on 1/phi (concave increasing), bisection fallback.
    mu = 0.5 * (lo + hi)
    for _ in range(200):
        d = w + mu
        inv_sq = 1.0 / (d * d)
        ph = math.sqrt(float(beta_sq @ inv_sq))
        if abs(ph - R) <= 1e-13 * max(1.0, R):
            break
        if ph >= R:
            lo = mu
        else:
            hi = mu
        slope = float(beta_sq @ (inv_sq / d)) / ph**3  # d(1/phi)/dmu
        nxt = mu - (1.0 / ph - 1.0 / R) / slope if slope > 0 else 0.5 * (lo + hi)
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if nxt == mu or not lo < hi:
            break
        mu = nxt
    theta = Q @ (beta / (w + mu))

    # Near the hard case the norm is a cliff in mu and bisection can stall
    # above tol; patch with a bottom eigenvector at the shift floor, where
    # the stationarity residual is the (tiny) bottom component of b.
    if wmin <= 0 and abs(np.linalg.norm(theta) - R) > 0.5 * tol * max(1.0, R):
        bottom, part, part_norm, _ = pseudo_solution()
        if part_norm < R:
            tau = math.sqrt(max(R * R - part_norm * part_norm, 0.0))
            theta = part + tau * Q[:, bottom][:, 0]
    return Hypothesis(theta, R)


def _solve_1d(a: float, b: float, R: float) -> np.ndarray:
    """Exact scalar trust-region solution: clip the stationary point or pick the boundary."""
    if a > 0 and abs(b / a) <= R:
        return np.array([b / a])
    if b == 0.0:
        return np.array([0.0 if a >= 0 else R])
    return np.array([math.copysign(R, b)])


def _logistic_value_grad(dataset: Dataset, theta: np.ndarray, lam: float):
    margins = dataset.y * (dataset.X @ theta)
    value = float(np.logaddexp(0.0, -margins).mean() + 0.5 * lam * (theta @ theta))
    # sigma(-m) computed stably on both tails
    sig = np.where(margins >= 0, np.exp(-np.maximum(margins, 0)) / (1.0 + np.exp(-np.maximum(margins, 0))),
                   1.0 / (1.0 + np.exp(np.minimum(margins, 0))))
    grad = -(dataset.X.T @ (dataset.y * sig)) / dataset.n + lam * theta
    return value, grad


def minimize_logistic(
    dataset: Dataset,
    lam: float,
    tol: float = DEFAULT_GRAD_TOL,
    theta0: np.ndarray | None = None,
    max_iter: int = MAX_ITERATIONS,
) -> Hypothesis:
    """Unconstrained regularized logistic minimizer via gradient descent.

    Full-batch descent with Armijo backtracking, stopping when the gradient
    norm falls below ``tol``; by lam-strong convexity this certifies
    L(theta) - L(theta*) <= tol**2 / (2 lam).  Raises
    :class:`ConvergenceError` (carrying the final gradient norm) if the
    iteration cap is hit first.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    theta = np.zeros(dataset.p) if theta0 is None else np.asarray(theta0, dtype=float).copy()
    value, grad = _logistic_value_grad(dataset, theta, lam)
    gnorm = float(np.linalg.norm(grad))
    step = 1.0
    for _ in range(max_iter):
        if gnorm <= tol:
            return Hypothesis(theta, math.sqrt(2.0 * math.log(2.0) / lam))
        step = min(step * 2.0, 1e8)
        # Armijo with a rounding allowance: near the optimum the true decrease
        # falls below float resolution of the value while the iterates are
        # still well resolved, so the gradient norm stays the certificate.
        slack = 4.0 * np.finfo(float).eps * abs(value)
        while True:
            candidate = theta - step * grad
            cand_value, cand_grad = _logistic_value_grad(dataset, candidate, lam)
            if cand_value <= value - 1e-4 * step * gnorm * gnorm + slack:
                break
            step *= 0.5
            if step < 1e-20:
                raise ConvergenceError(
                    f"line search failed at gradient norm {gnorm:.3g}", gradient_norm=gnorm
                )
        theta, value, grad = candidate, cand_value, cand_grad
        gnorm = float(np.linalg.norm(grad))
    raise ConvergenceError(
        f"no convergence within {max_iter} iterations; gradient norm {gnorm:.3g}",
        gradient_norm=gnorm,
    )

"""Private ERM mechanisms and their noise-reduction pipelines.

Two base mechanisms are provided: covariance perturbation for ridge
regression (Laplace noise on the second moments X'X and X'y, then a
ball-constrained solve) and output perturbation for regularized logistic
regression (Laplace noise on the exact minimizer).  On top of each sits a
noise-reduction pipeline -- a correlated chain of increasingly accurate
hypotheses tested by interactive above-threshold -- whose realized privacy
loss is the testing loss plus the grid level actually reached.  Closed-form
inversions of the worst-case utility bounds give the "theory" epsilon for
comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import data as _data
from .accountant import ExPostRecord, expost_loss
from .data import Dataset
from .iat import IatConfig, iat_epsilon_for, run_iat
from .laplace import PrivacyGrid, RandomSource, noise_reduce
from .solvers import (
    BallQuadratic,
    Hypothesis,
    logistic_objective,
    minimize_ball_quadratic,
    minimize_logistic,
    project_to_ball,
    ridge_objective,
)

__all__ = [
    "NoisyCovariance",
    "SensitivitySpec",
    "PipelineResult",
    "ridge_query_sensitivity",
    "logistic_query_sensitivity",
    "ridge_norm_cap",
    "logistic_norm_cap",
    "second_moments",
    "perturb_second_moments",
    "solve_ridge_moments",
    "covariance_perturb",
    "covnr",
    "output_perturb_logistic",
    "output_perturb_ridge",
    "outputnr",
    "theory_epsilon",
]

MOMENT_SENSITIVITY = 2.0  # entrywise L1 change of X'X (and of X'y) under one row swap
THEORY_METHODS = ("cov-ridge", "out-ridge", "out-logistic")


def ridge_norm_cap(lam: float) -> float:
    """Norm bound sqrt(1/lam) on the ridge minimizer over valid data."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return math.sqrt(1.0 / lam)


def logistic_norm_cap(lam: float) -> float:
    """Norm bound sqrt(2 ln 2 / lam) on the regularized logistic minimizer."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return math.sqrt(2.0 * math.log(2.0) / lam)


def ridge_query_sensitivity(lam: float, n: int) -> float:
    """L1 sensitivity (sqrt(1/lam) + 1)**2 / n of the ridge excess-risk query."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return (math.sqrt(1.0 / lam) + 1.0) ** 2 / n


def logistic_query_sensitivity(lam: float, n: int) -> float:
    """L1 sensitivity 2 ln((1+e^M)/(1+e^-M)) / n of the logistic excess-risk query.

    M is the logistic norm cap; the log ratio is evaluated stably and tends
    to M for large M.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    M = logistic_norm_cap(lam)
    log_ratio = float(np.logaddexp(0.0, M) - np.logaddexp(0.0, -M))
    return 2.0 * log_ratio / n


@dataclass(frozen=True)
class SensitivitySpec:
    """The three L1 sensitivities a pipeline relies on."""

    query_delta: float
    moment_delta: float
    solution_delta: float

    def __post_init__(self):
        if min(self.query_delta, self.moment_delta, self.solution_delta) <= 0:
            raise ValueError("sensitivities must be positive")


def ridge_sensitivities(lam: float, n: int) -> SensitivitySpec:
    cap = ridge_norm_cap(lam)
    return SensitivitySpec(
        query_delta=ridge_query_sensitivity(lam, n),
        moment_delta=MOMENT_SENSITIVITY,
        solution_delta=(cap + 1.0) * math.sqrt(1.0 / (n * lam)),
    )


def logistic_sensitivities(lam: float, n: int, p: int) -> SensitivitySpec:
    return SensitivitySpec(
        query_delta=logistic_query_sensitivity(lam, n),
        moment_delta=MOMENT_SENSITIVITY,
        solution_delta=2.0 * math.sqrt(p) / (n * lam),
    )


@dataclass(frozen=True)
class NoisyCovariance:
    """Perturbed second moments (Z ~ X'X, z ~ X'y) released at one privacy level."""

    Z: np.ndarray
    z: np.ndarray
    level: float

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=float)
        z = np.asarray(self.z, dtype=float)
        if Z.ndim != 2 or Z.shape[0] != Z.shape[1] or z.shape != (Z.shape[0],):
            raise ValueError(f"inconsistent moment shapes {Z.shape}, {z.shape}")
        if not self.level > 0:
            raise ValueError(f"privacy level must be positive, got {self.level}")
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "z", z)


def second_moments(dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    return dataset.X.T @ dataset.X, dataset.X.T @ dataset.y


def perturb_second_moments(dataset: Dataset, eps: float, rng: RandomSource) -> NoisyCovariance:
    """Entrywise Lap(4/eps) noise on X'X and X'y; eps-private jointly."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    XtX, Xty = second_moments(dataset)
    scale = 4.0 / eps
    Z = XtX + rng.laplace(scale, size=XtX.shape)
    z = Xty + rng.laplace(scale, size=Xty.shape)
    return NoisyCovariance(Z, z, eps)


def solve_ridge_moments(Z, z, n: int, lam: float, tol: float = 1e-8) -> Hypothesis:
    """Ball-constrained ridge solve from (possibly noisy) second moments.

    The quadratic is symmetrized first, which leaves the objective
    unchanged, and minimized over the ball of radius sqrt(1/lam).
    """
    Z = np.asarray(Z, dtype=float)
    z = np.asarray(z, dtype=float)
    p = z.shape[0]
    A = (Z + Z.T) / (2.0 * n) + lam * np.eye(p)
    return minimize_ball_quadratic(BallQuadratic(A, z / n, ridge_norm_cap(lam)), tol=tol)


def ridge_optimum(dataset: Dataset, lam: float, tol: float = 1e-8) -> Hypothesis:
    """Constrained ridge minimizer on the exact moments."""
    XtX, Xty = second_moments(dataset)
    return solve_ridge_moments(XtX, Xty, dataset.n, lam, tol=tol)


def covariance_perturb(
    dataset: Dataset,
    eps: float,
    lam: float,
    rng: RandomSource,
    *,
    moments: tuple[np.ndarray, np.ndarray] | None = None,
    tol: float = 1e-8,
) -> Hypothesis:
    """eps-private ridge hypothesis via covariance perturbation.

    ``moments`` may carry precomputed (X'X, X'y) to avoid recomputing them
    across repeated calls on the same dataset.
    """
    dataset.require_finalized(_data.REGRESSION)
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    XtX, Xty = second_moments(dataset) if moments is None else moments
    scale = 4.0 / eps
    Z = XtX + rng.laplace(scale, size=XtX.shape)
    z = Xty + rng.laplace(scale, size=Xty.shape)
    return solve_ridge_moments(Z, z, dataset.n, lam, tol=tol)


def output_perturb_logistic(
    dataset: Dataset,
    eps: float,
    lam: float,
    rng: RandomSource,
    *,
    theta_star: np.ndarray | None = None,
    tol: float = 1e-6,
) -> Hypothesis:
    """eps-private logistic hypothesis via output perturbation.

    Adds iid Lap(2 sqrt(p) / (n lam eps)) noise per coordinate of the exact
    minimizer (solved here unless ``theta_star`` is supplied).
    """
    dataset.require_finalized(_data.CLASSIFICATION)
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if theta_star is None:
        theta_star = minimize_logistic(dataset, lam, tol=tol).theta
    r = 2.0 * math.sqrt(dataset.p) / (dataset.n * lam * eps)
    noisy = theta_star + rng.laplace(r, size=theta_star.shape)
    return Hypothesis(noisy, logistic_norm_cap(lam))


def output_perturb_ridge(
    dataset: Dataset,
    eps: float,
    lam: float,
    rng: RandomSource,
    *,
    theta_star: np.ndarray | None = None,
    tol: float = 1e-8,
) -> Hypothesis:
    """eps-private ridge hypothesis via output perturbation (theory-curve reference).

    Noise scale (sqrt(1/lam) + 1) sqrt(p/(n lam)) / eps per coordinate on
    the constrained minimizer.
    """
    dataset.require_finalized(_data.REGRESSION)
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if theta_star is None:
        theta_star = ridge_optimum(dataset, lam, tol=tol).theta
    r = (ridge_norm_cap(lam) + 1.0) * math.sqrt(dataset.p / (dataset.n * lam)) / eps
    noisy = theta_star + rng.laplace(r, size=theta_star.shape)
    return Hypothesis(noisy, ridge_norm_cap(lam))


@dataclass
class PipelineResult:
    """Outcome of a noise-reduction pipeline run.

    ``stop_index`` is the 1-based grid level accepted by the accuracy test,
    or ``None`` when every level was rejected; then ``hypothesis`` is
    withheld (``None``) unless the run was asked to release the non-private
    optimum.  ``hypotheses_generated`` counts how many candidate solves were
    actually materialized, which never exceeds the stopping index.
    """

    stop_index: int | None
    hypothesis: Hypothesis | None
    record: ExPostRecord
    hypotheses_generated: int
    halted_query: float | None = None


def covnr(
    dataset: Dataset,
    grid: PrivacyGrid,
    alpha: float,
    gamma: float,
    lam: float,
    rng: RandomSource,
    *,
    release_nonprivate: bool = False,
    tol: float = 1e-8,
) -> PipelineResult:
    """Noise-reduction pipeline over covariance perturbation for ridge.

    Builds two correlated chains at half budget each (the moments X'X and
    X'y both move by at most 2 in entrywise L1 under a row swap), solves the
    ball-constrained quadratic lazily per level, and streams the excess-risk
    queries into above-threshold at threshold -alpha/2.  Halting at level k
    costs eps_test + eps_k; rejection of every level costs infinity and the
    exact optimum is withheld by default.
    """
    dataset.require_finalized(_data.REGRESSION)
    _check_pipeline_args(alpha, gamma, lam)
    T = len(grid)
    n = dataset.n
    delta_q = ridge_query_sensitivity(lam, n)
    eps_test = iat_epsilon_for(delta_q, T, gamma, alpha)

    XtX, Xty = second_moments(dataset)
    theta_star = solve_ridge_moments(XtX, Xty, n, lam, tol=tol)
    loss_star = ridge_objective(dataset, theta_star.theta, lam)

    half = grid.halved()
    chain_Z = noise_reduce(XtX, MOMENT_SENSITIVITY, half, rng.fork(0))
    chain_z = noise_reduce(Xty, MOMENT_SENSITIVITY, half, rng.fork(1))

    generated: list[Hypothesis] = []

    def stream():
        for t in range(T):
            hyp = solve_ridge_moments(chain_Z.values[t], chain_z.values[t], n, lam, tol=tol)
            generated.append(hyp)
            yield loss_star - ridge_objective(dataset, hyp.theta, lam)

    config = IatConfig(eps_test, -alpha / 2.0, delta_q, T, gamma)
    outcome = run_iat(config, stream(), rng.fork(2))
    return _finish_pipeline(outcome, generated, theta_star, eps_test, grid, release_nonprivate)


def outputnr(
    dataset: Dataset,
    grid: PrivacyGrid,
    alpha: float,
    gamma: float,
    lam: float,
    rng: RandomSource,
    *,
    release_nonprivate: bool = False,
) -> PipelineResult:
    """Noise-reduction pipeline over output perturbation for logistic regression.

    Runs the correlated chain directly on the exact minimizer with
    sensitivity 2 sqrt(p) / (n lam); every released candidate is projected
    onto the ball of radius sqrt(2 ln 2 / lam) when its norm exceeds it, so
    the excess-risk queries keep their stated sensitivity.
    """
    dataset.require_finalized(_data.CLASSIFICATION)
    _check_pipeline_args(alpha, gamma, lam)
    T = len(grid)
    n, p = dataset.n, dataset.p
    delta_q = logistic_query_sensitivity(lam, n)
    eps_test = iat_epsilon_for(delta_q, T, gamma, alpha)

    solver_tol = min(1e-6, math.sqrt(lam * alpha / 100.0))
    theta_star = minimize_logistic(dataset, lam, tol=solver_tol)
    loss_star = logistic_objective(dataset, theta_star.theta, lam)
    cap = logistic_norm_cap(lam)

    chain = noise_reduce(theta_star.theta, 2.0 * math.sqrt(p) / (n * lam), grid, rng.fork(0))

    generated: list[Hypothesis] = []

    def stream():
        for t in range(T):
            hyp = Hypothesis(project_to_ball(chain.values[t], cap), cap)
            generated.append(hyp)
            yield loss_star - logistic_objective(dataset, hyp.theta, lam)

    config = IatConfig(eps_test, -alpha / 2.0, delta_q, T, gamma)
    outcome = run_iat(config, stream(), rng.fork(2))
    return _finish_pipeline(outcome, generated, theta_star, eps_test, grid, release_nonprivate)


def _check_pipeline_args(alpha: float, gamma: float, lam: float) -> None:
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")


def _finish_pipeline(outcome, generated, theta_star, eps_test, grid, release_nonprivate) -> PipelineResult:
    if outcome.halted:
        k = outcome.stop_index
        return PipelineResult(
            stop_index=k,
            hypothesis=generated[k - 1],
            record=expost_loss(k, eps_test, grid),
            hypotheses_generated=len(generated),
            halted_query=outcome.value,
        )
    return PipelineResult(
        stop_index=None,
        hypothesis=theta_star if release_nonprivate else None,
        record=expost_loss(None, eps_test, grid),
        hypotheses_generated=len(generated),
        halted_query=None,
    )


def theory_epsilon(method: str, alpha: float, n: int, p: int, lam: float) -> float:
    """Smallest eps whose worst-case utility bound guarantees expected excess risk alpha.

    ``cov-ridge`` inverts the covariance-perturbation bound, ``out-ridge``
    the ridge output-perturbation bound, and ``out-logistic`` solves the
    quadratic (in 1/eps) logistic output-perturbation bound for its positive
    root.
    """
    if method not in THEORY_METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {THEORY_METHODS}")
    if not (alpha > 0 and n >= 1 and p >= 1 and lam > 0):
        raise ValueError("alpha, n, p, lambda must all be positive")
    if method == "cov-ridge":
        return 4.0 * math.sqrt(2.0) * (2.0 * math.sqrt(p / lam) + p / lam) / (n * alpha)
    if method == "out-ridge":
        cap = ridge_norm_cap(lam)
        return math.sqrt((1.0 / n + lam) * (cap + 1.0) ** 2 * p**2 / (n * lam * alpha))
    # out-logistic: a u^2 + b u - alpha = 0 with u = 1/eps
    a = 4.0 * p**2 / (n**2 * lam)
    b = 2.0 * math.sqrt(2.0) * p / (n * lam)
    u = (-b + math.sqrt(b * b + 4.0 * a * alpha)) / (2.0 * a)
    return 1.0 / u

"""Doubling-search baseline over a black-box private ERM mechanism.

Unlike noise reduction, each step draws fresh independent noise: the
mechanism is re-run at eps_1, 2 eps_1, 4 eps_1, ... and a fresh Laplace
accuracy test is paid for at every step, so the realized privacy loss is the
sum over all steps taken.  That accumulation is the baseline's defining
cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from . import data as _data
from .accountant import DoublingSchedule, ExPostRecord, doubling_record
from .data import Dataset
from .laplace import RandomSource, sample_laplace
from .mechanisms import (
    covariance_perturb,
    logistic_norm_cap,
    logistic_query_sensitivity,
    output_perturb_logistic,
    ridge_norm_cap,
    ridge_optimum,
    ridge_query_sensitivity,
    second_moments,
)
from .solvers import Hypothesis, logistic_objective, minimize_logistic, project_to_ball, ridge_objective

__all__ = ["DoublingRun", "DoublingResult", "doubling_run"]

MECHANISMS = ("covariance", "output-logistic")


@dataclass
class DoublingRun:
    """Trace of one doubling search: per-test loss and the noisy test values."""

    schedule: DoublingSchedule
    per_test_eps: float
    trace: list[tuple[int, float, float]] = field(default_factory=list)


@dataclass
class DoublingResult:
    """`stop_index == schedule.steps + 1` marks exhaustion; the hypothesis is
    then withheld unless the run was asked to release the exact optimum."""

    stop_index: int
    hypothesis: Hypothesis | None
    record: ExPostRecord
    run: DoublingRun


def doubling_run(
    dataset: Dataset,
    schedule: DoublingSchedule,
    mechanism: str | Callable[..., Hypothesis],
    alpha: float,
    gamma: float,
    lam: float,
    rng: RandomSource,
    *,
    release_nonprivate: bool = False,
) -> DoublingResult:
    """Run the doubling baseline until a hypothesis passes the accuracy test.

    ``mechanism`` is ``"covariance"`` or ``"output-logistic"`` (dispatched
    internally, sharing the exact optimum across steps), or any callable
    ``f(dataset, eps, lam, rng) -> Hypothesis`` producing an eps-private
    hypothesis.  Each step t generates a hypothesis at eps_t, rescales it
    onto the task's norm ball if needed, and tests its excess risk with
    fresh Lap(alpha / (2 ln(T/gamma))) noise against -alpha/2.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if dataset.task == _data.REGRESSION:
        objective = ridge_objective
        cap = ridge_norm_cap(lam)
        delta_q = ridge_query_sensitivity(lam, dataset.n)
        theta_star = ridge_optimum(dataset, lam)
        moments = second_moments(dataset)
        if mechanism == "covariance":
            mechanism = lambda ds, eps, lm, r: covariance_perturb(ds, eps, lm, r, moments=moments)
        elif mechanism == "output-logistic":
            raise ValueError("output-logistic mechanism requires a classification dataset")
    else:
        objective = logistic_objective
        cap = logistic_norm_cap(lam)
        delta_q = logistic_query_sensitivity(lam, dataset.n)
        solver_tol = min(1e-6, math.sqrt(lam * alpha / 100.0))
        theta_star = minimize_logistic(dataset, lam, tol=solver_tol)
        if mechanism == "output-logistic":
            star = theta_star.theta
            mechanism = lambda ds, eps, lm, r: output_perturb_logistic(ds, eps, lm, r, theta_star=star)
        elif mechanism == "covariance":
            raise ValueError("covariance mechanism requires a regression dataset")
    if isinstance(mechanism, str):
        raise ValueError(f"unknown mechanism {mechanism!r}; expected one of {MECHANISMS}")

    T = schedule.steps
    test_scale = alpha / (2.0 * math.log(T / gamma))
    run = DoublingRun(schedule, per_test_eps=delta_q / test_scale)
    loss_star = objective(dataset, theta_star.theta, lam)
    test_rng = rng.fork(0)

    for k in range(1, T + 1):
        eps_k = schedule.epsilon_at(k)
        hyp = mechanism(dataset, eps_k, lam, rng.fork(k))
        theta = project_to_ball(hyp.theta, cap)
        query = loss_star - objective(dataset, theta, lam)
        noisy = query + sample_laplace(test_scale, test_rng)
        run.trace.append((k, eps_k, noisy))
        if noisy >= -alpha / 2.0:
            record = doubling_record(k, delta_q, schedule, gamma, alpha)
            return DoublingResult(k, Hypothesis(theta, cap), record, run)

    record = doubling_record(T + 1, delta_q, schedule, gamma, alpha)
    released = theta_star if release_nonprivate else None
    return DoublingResult(T + 1, released, record, run)

"""Accuracy-first private empirical risk minimization.

Given a target excess risk, the pipelines in this package search for the
empirically smallest privacy loss that meets it: hypotheses are generated
along a correlated noise-reduction chain (so releasing a prefix costs only
its last level) and tested by an interactive above-threshold run, yielding
an *ex-post* privacy guarantee for the level actually reached.  Covariance
perturbation covers ridge regression and output perturbation covers
regularized logistic regression; a fresh-noise doubling search and inverted
worst-case utility bounds serve as baselines.
"""

from .accountant import (
    DoublingSchedule,
    ExPostRecord,
    doubling_loss,
    doubling_rate_overhead,
    doubling_record,
    expost_loss,
)
from .baselines import DoublingResult, DoublingRun, doubling_run
from .data import Dataset, from_arrays, load_csv, renormalize_l1, synth_logistic, synth_ridge, transform_log1p
from .errors import ConfigError, ConvergenceError, DataError
from .experiment import ExperimentConfig, SyntheticSpec, TrialRecord, build_grid, run_experiment
from .iat import IatConfig, IatResult, iat_epsilon_for, run_iat
from .laplace import NoiseChain, PrivacyGrid, RandomSource, laplace_density, noise_reduce, sample_laplace
from .mechanisms import (
    NoisyCovariance,
    PipelineResult,
    SensitivitySpec,
    covariance_perturb,
    covnr,
    logistic_query_sensitivity,
    output_perturb_logistic,
    output_perturb_ridge,
    outputnr,
    ridge_query_sensitivity,
    theory_epsilon,
)
from .plots import emit_plots
from .solvers import (
    BallQuadratic,
    Hypothesis,
    logistic_objective,
    minimize_ball_quadratic,
    minimize_logistic,
    ridge_objective,
)

__version__ = "0.1.0"

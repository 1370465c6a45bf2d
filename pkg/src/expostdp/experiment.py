"""Experiment harness: configuration, trial sweeps, records, and summaries.

A sweep runs ``trials`` independent repetitions of every configured approach
at every target accuracy alpha, writing one JSON record per trial plus an
aggregate summary.  Per-trial randomness is keyed purely by
(config seed, approach, alpha index, trial index), so reordering the sweep
or re-running it reproduces every trial bit-for-bit; records are emitted in
a fixed (approach, alpha, trial) order regardless of completion order.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import data as _data
from .accountant import DoublingSchedule
from .baselines import doubling_run
from .data import Dataset, load_csv, renormalize_l1, synth_logistic, synth_ridge, transform_log1p
from .errors import ConfigError, DataError
from .laplace import PrivacyGrid, RandomSource
from .mechanisms import (
    covariance_perturb,
    covnr,
    output_perturb_logistic,
    outputnr,
    ridge_optimum,
    theory_epsilon,
)
from .solvers import logistic_objective, minimize_logistic, ridge_objective

__all__ = [
    "APPROACHES",
    "SyntheticSpec",
    "ExperimentConfig",
    "TrialRecord",
    "build_grid",
    "run_experiment",
    "aggregate_records",
    "read_records",
]

APPROACHES = ("noise-reduction", "doubling", "theory", "fixed-eps")
# Stream ids are fixed by name, not by position in the config, so that the
# set of configured approaches never changes any trial's randomness.
_APPROACH_STREAMS = {name: i for i, name in enumerate(APPROACHES)}


@dataclass(frozen=True)
class SyntheticSpec:
    """Synthetic dataset request: kind 'ridge' or 'logistic', size, and noise."""

    kind: str
    n: int
    p: int
    noise: float = 0.1

    def __post_init__(self):
        if self.kind not in ("ridge", "logistic"):
            raise ConfigError(f"unknown synthetic kind {self.kind!r}")
        if self.n < 1 or self.p < 1:
            raise ConfigError("synthetic n and p must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one sweep; serializable to/from JSON."""

    task: str
    lam: float
    alpha_grid: tuple[float, ...]
    gamma: float = 0.1
    trials: int = 40
    seed: int = 0
    grid_t: int = 1000
    eps_min: float | None = None
    eps_max: float | None = None
    approaches: tuple[str, ...] = ("noise-reduction", "doubling", "theory")
    fixed_eps: float | None = None
    release_nonprivate: bool = False
    synthetic: SyntheticSpec | None = None
    dataset_path: str | None = None
    label_column: str | int | None = None
    drop_columns: tuple = ()
    log1p_columns: tuple = ()
    log1p_label: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.task not in (_data.REGRESSION, _data.CLASSIFICATION):
            raise ConfigError(f"unknown task {self.task!r}")
        if not self.lam > 0:
            raise ConfigError(f"lambda must be positive, got {self.lam}")
        grid = tuple(float(a) for a in self.alpha_grid)
        object.__setattr__(self, "alpha_grid", grid)
        if not grid or any(a <= 0 for a in grid) or any(x >= y for x, y in zip(grid, grid[1:])):
            raise ConfigError("alpha grid must be positive and strictly ascending")
        if not 0 < self.gamma < 1:
            raise ConfigError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.grid_t < 2:
            raise ConfigError(f"grid size must be >= 2, got {self.grid_t}")
        approaches = tuple(self.approaches)
        object.__setattr__(self, "approaches", approaches)
        unknown = [a for a in approaches if a not in APPROACHES]
        if unknown or not approaches:
            raise ConfigError(f"approaches must be a nonempty subset of {APPROACHES}, got {approaches}")
        if "fixed-eps" in approaches and not (self.fixed_eps and self.fixed_eps > 0):
            raise ConfigError("fixed-eps approach requires a positive fixed_eps")
        if (self.synthetic is None) == (self.dataset_path is None):
            raise ConfigError("exactly one of synthetic or dataset_path must be set")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        synth = raw.pop("synthetic", None)
        if synth is not None:
            synth = SyntheticSpec(**synth)
        known = {f for f in ExperimentConfig.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("alpha_grid", "approaches", "drop_columns", "log1p_columns"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return ExperimentConfig(synthetic=synth, **raw)

    def theory_method(self) -> str:
        return "cov-ridge" if self.task == _data.REGRESSION else "out-logistic"


@dataclass
class TrialRecord:
    """One row of the sweep output.

    ``eps_*`` fields follow the accountant; bottoms carry infinite totals
    and no released hypothesis.  ``wall_clock`` is diagnostic only and is
    excluded from the serialized record so reruns stay byte-identical.
    """

    approach: str
    alpha: float
    trial: int
    stop_index: int | None
    eps_test: float
    eps_generate: float
    eps_total: float
    risk_factor: float
    excess_risk: float | None
    hypothesis_norm: float | None
    bottom: bool
    error: str | None = None
    wall_clock: float = 0.0

    def to_json(self) -> str:
        payload = asdict(self)
        payload.pop("wall_clock")
        return json.dumps(payload, sort_keys=True)


def build_grid(
    n: int,
    p: int,
    lam: float,
    alpha: float,
    method: str,
    T: int,
    eps_min: float | None = None,
    eps_max: float | None = None,
) -> PrivacyGrid:
    """Geometric privacy ladder with T points, most private level first.

    Defaults span [1/n, 4 * theory_epsilon(method, ...)]; consecutive ratios
    are constant and both endpoints are hit exactly.
    """
    if T < 2:
        raise ConfigError(f"grid needs at least 2 points, got T={T}")
    lo = 1.0 / n if eps_min is None else float(eps_min)
    hi = 4.0 * theory_epsilon(method, alpha, n, p, lam) if eps_max is None else float(eps_max)
    if not (lo > 0 and math.isfinite(lo)):
        raise ConfigError(f"eps_min must be positive and finite, got {lo}")
    if not lo < hi:
        raise ConfigError(f"degenerate grid span [{lo:.3g}, {hi:.3g}]")
    return PrivacyGrid(tuple(np.geomspace(lo, hi, T)))


def _make_dataset(config: ExperimentConfig) -> Dataset:
    if config.synthetic is not None:
        spec = config.synthetic
        if spec.kind == "ridge":
            return synth_ridge(spec.n, spec.p, spec.noise, seed=config.seed)
        return synth_logistic(spec.n, spec.p, spec.noise, seed=config.seed)
    label = config.label_column if config.label_column is not None else -1
    if label == -1:
        # default: last column is the label
        with open(config.dataset_path, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
        label = len(header) - 1
    ds = load_csv(
        config.dataset_path,
        label_column=label,
        drop_columns=config.drop_columns,
        task=config.task,
    )
    if config.log1p_columns or config.log1p_label:
        ds = transform_log1p(ds, columns=config.log1p_columns, label=config.log1p_label)
    return renormalize_l1(ds)


@dataclass
class _Context:
    """Objects shared (read-only) by all trials of a sweep."""

    config: ExperimentConfig
    dataset: Dataset
    loss_star: float
    grids: dict[float, PrivacyGrid] = field(default_factory=dict)

    @property
    def objective(self):
        return ridge_objective if self.config.task == _data.REGRESSION else logistic_objective


def _prepare(config: ExperimentConfig) -> _Context:
    dataset = _make_dataset(config)
    if dataset.task != config.task:
        raise ConfigError(f"dataset task {dataset.task} does not match config task {config.task}")
    if config.task == _data.REGRESSION:
        star = ridge_optimum(dataset, config.lam)
        loss_star = ridge_objective(dataset, star.theta, config.lam)
    else:
        tol = min(1e-6, math.sqrt(config.lam * min(config.alpha_grid) / 100.0))
        star = minimize_logistic(dataset, config.lam, tol=tol)
        loss_star = logistic_objective(dataset, star.theta, config.lam)
    ctx = _Context(config, dataset, loss_star)
    for alpha in config.alpha_grid:
        ctx.grids[alpha] = build_grid(
            dataset.n, dataset.p, config.lam, alpha, config.theory_method(),
            config.grid_t, config.eps_min, config.eps_max,
        )
    return ctx


def _run_trial(ctx: _Context, approach: str, alpha_index: int, trial: int) -> TrialRecord:
    config = ctx.config
    alpha = config.alpha_grid[alpha_index]
    rng = RandomSource(config.seed, (_APPROACH_STREAMS[approach], alpha_index, trial))
    started = time.perf_counter()
    try:
        rec = _dispatch(ctx, approach, alpha, rng)
    except Exception as exc:  # per-trial failures must not abort the sweep
        rec = TrialRecord(
            approach, alpha, trial, None, math.nan, math.nan, math.nan, math.nan,
            None, None, bottom=False, error=f"{type(exc).__name__}: {exc}",
        )
    rec.trial = trial
    rec.wall_clock = time.perf_counter() - started
    return rec


def _dispatch(ctx: _Context, approach: str, alpha: float, rng: RandomSource) -> TrialRecord:
    config = ctx.config
    dataset = ctx.dataset
    grid = ctx.grids[alpha]
    regression = config.task == _data.REGRESSION

    if approach == "noise-reduction":
        pipeline = covnr if regression else outputnr
        res = pipeline(
            dataset, grid, alpha, config.gamma, config.lam, rng,
            release_nonprivate=config.release_nonprivate,
        )
        return _record_from(ctx, approach, alpha, res.stop_index, res.record.eps_test,
                            res.record.eps_generate, res.record.eps_total, res.record.risk_factor,
                            res.hypothesis, bottom=res.record.bottom)

    if approach == "doubling":
        steps = max(1, math.ceil(math.log2(grid[len(grid) - 1] / grid[0])))
        schedule = DoublingSchedule(eps_start=grid[0], steps=steps)
        mech = "covariance" if regression else "output-logistic"
        res = doubling_run(
            dataset, schedule, mech, alpha, config.gamma, config.lam, rng,
            release_nonprivate=config.release_nonprivate,
        )
        return _record_from(ctx, approach, alpha, res.stop_index, res.record.eps_test,
                            res.record.eps_generate, res.record.eps_total, res.record.risk_factor,
                            res.hypothesis, bottom=res.record.bottom)

    if approach == "theory":
        eps = theory_epsilon(config.theory_method(), alpha, dataset.n, dataset.p, config.lam)
    else:  # fixed-eps
        eps = float(config.fixed_eps)
    mech = covariance_perturb if regression else output_perturb_logistic
    hyp = mech(dataset, eps, config.lam, rng)
    risk = math.exp(eps) if eps < 700 else math.inf
    return _record_from(ctx, approach, alpha, None, 0.0, eps, eps, risk, hyp, bottom=False)


def _record_from(ctx, approach, alpha, stop_index, eps_test, eps_generate, eps_total,
                 risk_factor, hypothesis, bottom) -> TrialRecord:
    excess = norm = None
    if hypothesis is not None:
        excess = ctx.objective(ctx.dataset, hypothesis.theta, ctx.config.lam) - ctx.loss_star
        norm = float(np.linalg.norm(hypothesis.theta))
    return TrialRecord(
        approach=approach, alpha=alpha, trial=0, stop_index=stop_index,
        eps_test=eps_test, eps_generate=eps_generate, eps_total=eps_total,
        risk_factor=risk_factor, excess_risk=excess, hypothesis_norm=norm, bottom=bottom,
    )


def run_experiment(config: ExperimentConfig, out_dir) -> tuple[Path, Path]:
    """Execute the sweep and write records.jsonl plus summary.csv to out_dir.

    Trials run in a thread pool when ``config.workers > 1``; output order is
    (approach, alpha, trial) regardless of completion order.  Per-trial
    errors are recorded and do not abort the sweep.  Returns the two paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx = _prepare(config)
    jobs = [
        (approach, a_idx, trial)
        for approach in config.approaches
        for a_idx in range(len(config.alpha_grid))
        for trial in range(config.trials)
    ]
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(lambda j: _run_trial(ctx, *j), jobs))
    else:
        records = [_run_trial(ctx, *job) for job in jobs]
    records.sort(key=lambda r: (r.approach, r.alpha, r.trial))

    records_path = out / "records.jsonl"
    with open(records_path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")

    summary_path = out / "summary.csv"
    rows = aggregate_records([json.loads(r.to_json()) for r in records])
    _write_summary(summary_path, rows)

    with open(out / "timings.txt", "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(f"{rec.approach}\t{rec.alpha!r}\t{rec.trial}\t{rec.wall_clock:.6f}\n")
    return records_path, summary_path


_SUMMARY_COLUMNS = (
    "approach", "alpha", "trials", "bottoms", "errors",
    "mean_eps_total", "se_eps_total", "mean_eps_test", "mean_eps_generate",
    "mean_excess_risk", "se_excess_risk", "mean_hypothesis_norm",
)


def aggregate_records(records: list[dict]) -> list[dict]:
    """Per-(approach, alpha) means and standard errors over one record set.

    Bottoms (infinite loss) and errored trials are excluded from the means
    but counted in their own columns.
    """
    groups: dict[tuple[str, float], list[dict]] = {}
    for rec in records:
        groups.setdefault((rec["approach"], rec["alpha"]), []).append(rec)
    rows = []
    for (approach, alpha) in sorted(groups):
        recs = groups[(approach, alpha)]
        ok = [r for r in recs if r["error"] is None]
        finite = [r for r in ok if not r["bottom"] and math.isfinite(r["eps_total"])]
        excess = [r["excess_risk"] for r in finite if r["excess_risk"] is not None]
        norms = [r["hypothesis_norm"] for r in finite if r["hypothesis_norm"] is not None]
        rows.append({
            "approach": approach,
            "alpha": alpha,
            "trials": len(recs),
            "bottoms": sum(1 for r in ok if r["bottom"]),
            "errors": sum(1 for r in recs if r["error"] is not None),
            "mean_eps_total": _mean([r["eps_total"] for r in finite]),
            "se_eps_total": _stderr([r["eps_total"] for r in finite]),
            "mean_eps_test": _mean([r["eps_test"] for r in finite]),
            "mean_eps_generate": _mean([r["eps_generate"] for r in finite]),
            "mean_excess_risk": _mean(excess),
            "se_excess_risk": _stderr(excess),
            "mean_hypothesis_norm": _mean(norms),
        })
    return rows


def _mean(xs: list[float]) -> float | None:
    return sum(xs) / len(xs) if xs else None


def _stderr(xs: list[float]) -> float | None:
    if len(xs) < 2:
        return None
    m = sum(xs) / len(xs)
    var = sum((x - m) ** 2 for x in xs) / (len(xs) - 1)
    return math.sqrt(var / len(xs))


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_summary(path: Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(_SUMMARY_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(row[c]) for c in _SUMMARY_COLUMNS) + "\n")


def read_records(path) -> list[dict]:
    """Parse a records.jsonl file, reporting the line number on bad input."""
    records = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: malformed record at line {lineno}: {exc}") from exc
    return records

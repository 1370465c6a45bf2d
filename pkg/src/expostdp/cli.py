"""Command-line interface: run sweeps, render plots, audit mechanisms, make data.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal or
solver error.  The ``audit`` subcommand exits 4 when a mechanism that should
satisfy its claimed privacy level is flagged, or when the deliberately
broken control mechanism is *not* flagged.
"""

from __future__ import annotations

import argparse
import json
import sys

from .audit import audit_scalar_mechanism, scalar_laplace_sampler
from .data import synth_logistic, synth_ridge
from .errors import ConfigError, ConvergenceError, DataError
from .experiment import ExperimentConfig, SyntheticSpec, run_experiment
from .laplace import RandomSource
from .plots import emit_plots

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="expostdp",
        description="Accuracy-first private ERM: noise-reduction sweeps and baselines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a trial sweep and write records + summary")
    run.add_argument("--config", help="JSON config file; inline flags override nothing when set")
    run.add_argument("--out", default="results", help="output directory")
    run.add_argument("--dataset", help="CSV dataset path")
    run.add_argument("--label-column", help="label column name or 0-based index (default: last)")
    run.add_argument("--drop-columns", default="", help="comma-separated columns to drop")
    run.add_argument("--log1p-columns", default="", help="comma-separated feature columns for log1p")
    run.add_argument("--log1p-label", action="store_true", help="apply log1p to the label")
    run.add_argument("--synthetic", choices=["ridge", "logistic"], help="generate synthetic data")
    run.add_argument("--n", type=int, default=5000, help="synthetic rows")
    run.add_argument("--p", type=int, default=10, help="synthetic features")
    run.add_argument("--noise", type=float, default=0.1, help="synthetic noise level / margin")
    run.add_argument("--task", choices=["regression", "classification"])
    run.add_argument("--lambda", dest="lam", type=float, default=0.005, help="regularization")
    run.add_argument("--alpha-grid", default="0.05,0.1", help="comma-separated ascending targets")
    run.add_argument("--gamma", type=float, default=0.1)
    run.add_argument("--trials", type=int, default=40)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--approaches", default="noise-reduction,doubling,theory")
    run.add_argument("--grid-T", dest="grid_t", type=int, default=1000)
    run.add_argument("--eps-min", type=float)
    run.add_argument("--eps-max", type=float)
    run.add_argument("--fixed-eps", type=float)
    run.add_argument("--release-nonprivate", action="store_true",
                     help="release the exact optimum on bottom outcomes (not private)")
    run.add_argument("--workers", type=int, default=1)

    plot = sub.add_parser("plot", help="render charts and value tables from records")
    plot.add_argument("--records", required=True)
    plot.add_argument("--out", required=True)

    audit = sub.add_parser("audit", help="statistical DP audit of the Laplace mechanism")
    audit.add_argument("--samples", type=int, default=1_000_000)
    audit.add_argument("--bins", type=int, default=50)
    audit.add_argument("--eps", type=float, default=1.0)
    audit.add_argument("--slack", type=float, default=0.1)
    audit.add_argument("--seed", type=int, default=0)

    gen = sub.add_parser("gen", help="write a synthetic dataset to CSV")
    gen.add_argument("--kind", choices=["ridge", "logistic"], required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--p", type=int, required=True)
    gen.add_argument("--noise", type=float, default=0.1)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    return parser


def _split_csv(text: str) -> tuple:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                return ExperimentConfig.from_dict(json.load(fh))
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config {args.config}: {exc}") from exc
    if args.synthetic:
        synthetic = SyntheticSpec(args.synthetic, args.n, args.p, args.noise)
        task = args.task or ("regression" if args.synthetic == "ridge" else "classification")
        dataset_path = None
    elif args.dataset:
        synthetic = None
        if not args.task:
            raise ConfigError("--task is required with --dataset")
        task = args.task
        dataset_path = args.dataset
    else:
        raise ConfigError("one of --config, --synthetic, --dataset is required")
    alpha_grid = tuple(float(a) for a in _split_csv(args.alpha_grid))
    return ExperimentConfig(
        task=task,
        lam=args.lam,
        alpha_grid=alpha_grid,
        gamma=args.gamma,
        trials=args.trials,
        seed=args.seed,
        grid_t=args.grid_t,
        eps_min=args.eps_min,
        eps_max=args.eps_max,
        approaches=_split_csv(args.approaches),
        fixed_eps=args.fixed_eps,
        release_nonprivate=args.release_nonprivate,
        synthetic=synthetic,
        dataset_path=dataset_path,
        label_column=args.label_column,
        drop_columns=_split_csv(args.drop_columns),
        log1p_columns=_split_csv(args.log1p_columns),
        log1p_label=args.log1p_label,
        workers=args.workers,
    )


def _cmd_run(args) -> int:
    config = _config_from_args(args)
    records, summary = run_experiment(config, args.out)
    print(f"records: {records}")
    print(f"summary: {summary}")
    return 0


def _cmd_plot(args) -> int:
    written = emit_plots(args.records, args.out)
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_audit(args) -> int:
    rng = RandomSource(args.seed, (31,))
    checks = [
        ("laplace eps=%.3g" % args.eps, scalar_laplace_sampler(args.eps), False),
        ("laplace eps=%.3g, scale halved" % args.eps, scalar_laplace_sampler(args.eps, scale_factor=0.5), True),
    ]
    ok = True
    for i, (name, sampler, expect_violation) in enumerate(checks):
        report = audit_scalar_mechanism(sampler, 0.0, 1.0, args.eps, rng.fork(i),
                                        n_samples=args.samples, bins=args.bins)
        violated = not report.satisfied(args.slack)
        status = "PASS" if violated == expect_violation else "FAIL"
        ok = ok and violated == expect_violation
        print(f"[{status}] {name}: max log-ratio {report.max_log_ratio:.4f} "
              f"(claimed {report.epsilon_claimed:.4f} + slack {args.slack:.2f}, "
              f"{'flagged' if violated else 'within bound'})")
    return 0 if ok else 4


def _cmd_gen(args) -> int:
    if args.kind == "ridge":
        ds = synth_ridge(args.n, args.p, args.noise, seed=args.seed)
    else:
        ds = synth_logistic(args.n, args.p, args.noise, seed=args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(",".join([f"x{j}" for j in range(ds.p)] + ["y"]) + "\n")
        for i in range(ds.n):
            cells = [repr(v) for v in ds.X[i]] + [repr(float(ds.y[i]))]
            fh.write(",".join(cells) + "\n")
    print(f"wrote {args.out} ({ds.n} rows, {ds.p} features, task {ds.task})")
    return 0


_COMMANDS = {"run": _cmd_run, "plot": _cmd_plot, "audit": _cmd_audit, "gen": _cmd_gen}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (ConvergenceError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())

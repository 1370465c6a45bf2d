"""Plot-ready outputs from sweep records: vector images plus value tables.

Four charts are rendered per record set: mean realized privacy loss versus
the accuracy target, achieved excess risk versus the target, the
test/generate breakdown of the privacy loss, and the mean hypothesis norm.
Every chart is accompanied by a CSV table of exactly the plotted values.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import DataError
from .experiment import aggregate_records, read_records

__all__ = ["emit_plots"]

_STYLE = {
    "noise-reduction": dict(color="tab:blue", marker="o"),
    "doubling": dict(color="tab:orange", marker="s"),
    "theory": dict(color="tab:green", marker="^"),
    "fixed-eps": dict(color="tab:red", marker="d"),
}


def emit_plots(records_path, out_dir) -> list[Path]:
    """Render the four standard charts (SVG) and their value tables (CSV).

    Raises :class:`DataError` before writing anything when the record set is
    empty or malformed.  Returns the paths written.
    """
    records = read_records(records_path)
    if not records:
        raise DataError(f"{records_path} contains no records")
    rows = aggregate_records(records)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plt.rcParams["svg.hashsalt"] = "expostdp"

    written = []
    written += _chart_lines(
        out / "eps_total_vs_alpha", rows, "mean_eps_total", "se_eps_total",
        ylabel="mean ex-post privacy loss", logy=True,
    )
    written += _chart_accuracy(out / "excess_vs_alpha", rows)
    written += _chart_breakdown(out / "privacy_breakdown", rows)
    written += _chart_lines(
        out / "hypothesis_norm_vs_alpha", rows, "mean_hypothesis_norm", None,
        ylabel="mean hypothesis L2 norm", logy=False,
    )
    return written


def _by_approach(rows):
    grouped: dict[str, list[dict]] = {}
    for row in rows:
        grouped.setdefault(row["approach"], []).append(row)
    for approach in grouped:
        grouped[approach].sort(key=lambda r: r["alpha"])
    return grouped


def _finite_points(rows, column, err_column=None):
    xs, ys, es = [], [], []
    for row in rows:
        if row[column] is None:
            continue
        xs.append(row["alpha"])
        ys.append(row[column])
        es.append(row[err_column] if err_column and row[err_column] is not None else 0.0)
    return xs, ys, es


def _write_table(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join("" if v is None else repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _chart_lines(stem: Path, rows, column, err_column, ylabel: str, logy: bool) -> list[Path]:
    fig, ax = plt.subplots(figsize=(6, 4))
    table = []
    for approach, group in _by_approach(rows).items():
        xs, ys, es = _finite_points(group, column, err_column)
        if not xs:
            continue
        style = _STYLE.get(approach, {})
        ax.errorbar(xs, ys, yerr=es if err_column else None, label=approach, markersize=4, **style)
        table += [[approach, x, y, e] for x, y, e in zip(xs, ys, es)]
    ax.set_xlabel("accuracy target alpha")
    ax.set_ylabel(ylabel)
    if logy:
        ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    svg, csv_path = stem.with_suffix(".svg"), stem.with_suffix(".csv")
    _save(fig, svg)
    _write_table(csv_path, ["approach", "alpha", column, err_column or "err"], table)
    return [svg, csv_path]


def _chart_accuracy(stem: Path, rows) -> list[Path]:
    fig, ax = plt.subplots(figsize=(6, 4))
    table = []
    alphas = sorted({row["alpha"] for row in rows})
    ax.plot(alphas, alphas, linestyle="--", color="gray", label="requested alpha")
    for approach, group in _by_approach(rows).items():
        xs, ys, es = _finite_points(group, "mean_excess_risk", "se_excess_risk")
        if not xs:
            continue
        style = _STYLE.get(approach, {})
        ax.errorbar(xs, ys, yerr=es, label=approach, markersize=4, **style)
        table += [[approach, x, y, e] for x, y, e in zip(xs, ys, es)]
    ax.set_xlabel("accuracy target alpha")
    ax.set_ylabel("mean achieved excess risk")
    ax.legend()
    fig.tight_layout()
    svg, csv_path = stem.with_suffix(".svg"), stem.with_suffix(".csv")
    _save(fig, svg)
    _write_table(csv_path, ["approach", "alpha", "mean_excess_risk", "se_excess_risk"], table)
    return [svg, csv_path]


def _chart_breakdown(stem: Path, rows) -> list[Path]:
    grouped = _by_approach(rows)
    adaptive = [a for a in ("noise-reduction", "doubling") if a in grouped]
    n_panels = max(1, len(adaptive))
    fig, axes = plt.subplots(1, n_panels, figsize=(5 * n_panels, 4), squeeze=False)
    table = []
    for ax, approach in zip(axes[0], adaptive or ["noise-reduction"]):
        group = grouped.get(approach, [])
        xs, tests, gens = [], [], []
        for row in group:
            if row["mean_eps_test"] is None or row["mean_eps_generate"] is None:
                continue
            xs.append(row["alpha"])
            tests.append(row["mean_eps_test"])
            gens.append(row["mean_eps_generate"])
            table.append([approach, row["alpha"], row["mean_eps_test"], row["mean_eps_generate"]])
        if xs:
            ax.stackplot(xs, tests, gens, labels=["testing", "generation"], alpha=0.7)
            ax.legend()
        ax.set_title(approach)
        ax.set_xlabel("accuracy target alpha")
        ax.set_ylabel("mean privacy loss share")
    fig.tight_layout()
    svg, csv_path = stem.with_suffix(".svg"), stem.with_suffix(".csv")
    _save(fig, svg)
    _write_table(csv_path, ["approach", "alpha", "mean_eps_test", "mean_eps_generate"], table)
    return [svg, csv_path]

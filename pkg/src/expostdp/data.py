"""Dataset ingestion, preprocessing transforms, and synthetic generators.

Every mechanism in this package assumes row-wise bounded data: each feature
row has L1 norm at most 1, regression labels lie in [-1, 1], and
classification labels are +/-1.  Datasets start out *unfinalized* (no norm
guarantees) and become finalized through :func:`renormalize_l1` or the
synthetic generators; mechanism entry points reject unfinalized input
because every sensitivity formula relies on those bounds.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError
from .laplace import RandomSource

__all__ = [
    "Dataset",
    "from_arrays",
    "load_csv",
    "transform_log1p",
    "renormalize_l1",
    "synth_ridge",
    "synth_logistic",
]

REGRESSION = "regression"
CLASSIFICATION = "classification"
_TASKS = (REGRESSION, CLASSIFICATION)


@dataclass(frozen=True)
class Dataset:
    """Feature matrix X (n x p), label vector y, and task metadata.

    ``finalized`` marks that the norm invariants have been established.
    Instances are immutable; transforms return new datasets.
    """

    X: np.ndarray
    y: np.ndarray
    task: str
    provenance: str = ""
    finalized: bool = False

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2:
            raise DataError(f"feature matrix must be 2-D, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DataError(f"label vector shape {y.shape} does not match {X.shape[0]} rows")
        if self.task not in _TASKS:
            raise DataError(f"unknown task {self.task!r}; expected one of {_TASKS}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def require_finalized(self, task: str | None = None) -> None:
        """Raise unless the dataset is finalized (and of the expected task)."""
        if not self.finalized:
            raise DataError("dataset is not finalized; apply renormalize_l1 first")
        if task is not None and self.task != task:
            raise DataError(f"expected a {task} dataset, got {self.task}")
        _check_norms(self)


def _check_norms(ds: Dataset) -> None:
    row_l1 = np.abs(ds.X).sum(axis=1)
    if row_l1.size == 0:
        raise DataError("dataset has no rows")
    if row_l1.max() > 1.0 + 1e-12:
        raise DataError(f"row L1 norm {row_l1.max():.6g} exceeds 1")
    if ds.task == REGRESSION:
        if np.abs(ds.y).max(initial=0.0) > 1.0 + 1e-12:
            raise DataError(f"|label| {np.abs(ds.y).max():.6g} exceeds 1")
    else:
        if not np.isin(ds.y, (-1.0, 1.0)).all():
            raise DataError("classification labels must be -1 or +1")


def from_arrays(X, y, task: str, provenance: str = "arrays") -> Dataset:
    """Wrap pre-normalized arrays as a finalized dataset, validating the bounds."""
    ds = Dataset(np.asarray(X, dtype=float), np.asarray(y, dtype=float), task, provenance, finalized=True)
    _check_norms(ds)
    return ds


def _resolve_column(spec, header: list[str], what: str) -> int:
    if isinstance(spec, int) or (isinstance(spec, str) and spec.lstrip("-").isdigit()):
        idx = int(spec)
        if not 0 <= idx < len(header):
            raise DataError(f"{what} index {idx} outside 0..{len(header) - 1}")
        return idx
    try:
        return header.index(spec)
    except ValueError:
        raise DataError(f"{what} {spec!r} not found in header {header}") from None


def load_csv(
    path,
    label_column,
    feature_columns=None,
    drop_columns=(),
    task: str = REGRESSION,
) -> Dataset:
    """Parse a headered CSV file into an unfinalized dataset.

    Columns are selected by header name or zero-based index.  With
    ``feature_columns=None`` every column except the label and the dropped
    ones is kept.  Non-numeric cells in kept columns, ragged rows, and
    unresolvable columns raise :class:`DataError` with the offending
    position.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        label_idx = _resolve_column(label_column, header, "label column")
        drop_idx = {_resolve_column(c, header, "drop column") for c in drop_columns}
        if feature_columns is None:
            feat_idx = [i for i in range(len(header)) if i != label_idx and i not in drop_idx]
        else:
            feat_idx = [_resolve_column(c, header, "feature column") for c in feature_columns]
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}")
            try:
                rows.append([float(row[i]) for i in feat_idx])
            except ValueError:
                bad = next(i for i in feat_idx if not _is_float(row[i]))
                raise DataError(
                    f"{path}: non-numeric value {row[bad]!r} at row {lineno}, column {header[bad]!r}"
                ) from None
            if not _is_float(row[label_idx]):
                raise DataError(
                    f"{path}: non-numeric label {row[label_idx]!r} at row {lineno}"
                )
            labels.append(float(row[label_idx]))
    if not rows:
        raise DataError(f"{path} contains a header but no data rows")
    X = np.array(rows, dtype=float)
    y = np.array(labels, dtype=float)
    return Dataset(X, y, task, provenance=f"csv:{path}", finalized=False)


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def transform_log1p(dataset: Dataset, columns=(), label: bool = False) -> Dataset:
    """Apply x -> ln(1+x) to the named feature columns and/or the label.

    Targeted values must be nonnegative; the first violation is reported
    with its position.
    """
    X = dataset.X.copy()
    for c in columns:
        idx = int(c)
        col = X[:, idx]
        if (col < 0).any():
            row = int(np.argmax(col < 0))
            raise DataError(f"log1p of negative value {col[row]:.6g} at row {row}, column {idx}")
        X[:, idx] = np.log1p(col)
    y = dataset.y
    if label:
        if (y < 0).any():
            row = int(np.argmax(y < 0))
            raise DataError(f"log1p of negative label {y[row]:.6g} at row {row}")
        y = np.log1p(y)
    return replace(dataset, X=X, y=y, finalized=False)


def renormalize_l1(dataset: Dataset) -> Dataset:
    """Scale rows to maximum L1 norm 1 and finalize the dataset.

    Regression labels are separately divided by their maximum absolute
    value; classification labels in {0, 1} are mapped to {-1, +1}.  The
    scaling constants are recorded in the provenance string.  This is not a
    private operation.
    """
    row_l1 = np.abs(dataset.X).sum(axis=1)
    scale = row_l1.max(initial=0.0)
    if scale == 0.0:
        raise DataError("all-zero feature matrix cannot be renormalized")
    X = dataset.X / scale
    note = f"x/={scale:.12g}"
    y = dataset.y
    if dataset.task == REGRESSION:
        ymax = np.abs(y).max(initial=0.0)
        if ymax > 0:
            y = y / ymax
            note += f", y/={ymax:.12g}"
    else:
        vals = np.unique(y)
        if np.isin(vals, (0.0, 1.0)).all():
            y = np.where(y > 0.5, 1.0, -1.0)
            note += ", y:0/1->-1/+1"
        elif not np.isin(vals, (-1.0, 1.0)).all():
            raise DataError(f"classification labels must be 0/1 or -1/+1, got {vals[:8]}")
    out = Dataset(X, y, dataset.task, f"{dataset.provenance} [{note}]", finalized=True)
    _check_norms(out)
    return out


def synth_ridge(n: int, p: int, noise_level: float = 0.1, seed: int = 0) -> Dataset:
    """Finalized synthetic regression data y = X theta0 + Gaussian noise.

    The ground-truth direction theta0 is uniform on the sphere, features are
    uniform in [0, 1) before L1 renormalization, and labels are rescaled to
    [-1, 1] by finalization.
    """
    if n < 1 or p < 1:
        raise ValueError("n and p must be >= 1")
    rng = RandomSource(seed, (7, 0))
    theta0 = _gaussian_unit(p, rng)
    X = np.asarray(rng.uniform(size=(n, p)))
    signal = X @ theta0
    if noise_level > 0:
        u1 = np.asarray(rng.uniform_open(size=n))
        u2 = np.asarray(rng.uniform(size=n))
        gauss = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        signal = signal + noise_level * gauss
    raw = Dataset(X, signal, REGRESSION, provenance=f"synth-ridge(n={n},p={p},noise={noise_level},seed={seed})")
    return renormalize_l1(raw)


def synth_logistic(n: int, p: int, margin: float = 0.5, seed: int = 0) -> Dataset:
    """Finalized synthetic classification data y = sign(X theta0 + logistic noise).

    ``margin`` scales the logistic noise relative to the signal; 0 gives
    noiseless labels.
    """
    if n < 1 or p < 1:
        raise ValueError("n and p must be >= 1")
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    rng = RandomSource(seed, (7, 1))
    theta0 = _gaussian_unit(p, rng)
    X = np.asarray(rng.uniform(size=(n, p)))
    score = X @ theta0 - np.mean(X @ theta0)
    if margin > 0:
        u = np.asarray(rng.uniform_open(size=n))
        logistic = np.log(u / (1.0 - u))
        score = score + margin * np.std(score) * logistic
    y = np.where(score >= 0, 1.0, -1.0)
    raw = Dataset(X, y, CLASSIFICATION, provenance=f"synth-logistic(n={n},p={p},margin={margin},seed={seed})")
    return renormalize_l1(raw)


def _gaussian_unit(p: int, rng: RandomSource) -> np.ndarray:
    u1 = np.asarray(rng.uniform_open(size=p))
    u2 = np.asarray(rng.uniform(size=p))
    g = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    norm = np.linalg.norm(g)
    if norm == 0.0:
        g[0] = 1.0
        norm = 1.0
    return g / norm

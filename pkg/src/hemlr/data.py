"""Dataset loading, one-hot encoding and synthetic data generation.

CSV interchange format: one row per example, label first (a non-negative
integer), then the feature values, comma separated, no header. The bias
column is prepended at load time and never stored in files.
"""

from dataclasses import dataclass

import numpy as np

from hemlr.errors import (
    EmptyFile,
    LabelOutOfRange,
    MalformedRow,
    NonIntegerLabel,
)


@dataclass(frozen=True)
class Dataset:
    """Design matrix plus labels in the two encodings the trainers use.

    X has shape n x (1+d) with column 0 identically 1 when built through
    the public constructors (bias on). d is one less than the design
    matrix width, i.e. the raw feature count when the bias is present.
    """

    X: np.ndarray
    Y: np.ndarray
    Ybar: np.ndarray
    n: int
    d: int
    c: int


def _make_dataset(X: np.ndarray, Y: np.ndarray, c: int) -> Dataset:
    n = X.shape[0]
    return Dataset(X=X, Y=Y, Ybar=one_hot(Y, c), n=n, d=X.shape[1] - 1, c=c)


def one_hot(Y, c: int) -> np.ndarray:
    """Indicator matrix: row i is all zeros except a 1 at column Y[i]."""
    Y = np.asarray(Y, dtype=np.int64)
    if Y.size and (Y.min() < 0 or Y.max() >= c):
        raise LabelOutOfRange(f"label outside [0, {c})")
    out = np.zeros((Y.shape[0], c), dtype=np.float64)
    out[np.arange(Y.shape[0]), Y] = 1.0
    return out


def load_csv(path, label_column: int = 0, bias: bool = True,
             minmax: bool = False) -> Dataset:
    """Load a feature CSV into a Dataset.

    label_column selects which field holds the class index; the remaining
    fields are features in file order. With bias set, a constant-1 column
    is prepended. minmax optionally rescales every feature column to
    [0, 1] (constant columns map to 0).
    """
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if rows and len(fields) != len(rows[0]):
                raise MalformedRow(
                    f"line {lineno}: {len(fields)} fields, expected {len(rows[0])}")
            rows.append(fields)
    if not rows:
        raise EmptyFile(f"{path}: no data rows")
    width = len(rows[0])
    if not 0 <= label_column < width:
        raise MalformedRow(f"label column {label_column} out of range")

    labels = []
    for fields in rows:
        raw = fields[label_column]
        try:
            val = float(raw)
        except ValueError as exc:
            raise NonIntegerLabel(f"label {raw!r} is not numeric") from exc
        if val < 0 or val != int(val):
            raise NonIntegerLabel(f"label {raw!r} is not a non-negative integer")
        labels.append(int(val))
    Y = np.asarray(labels, dtype=np.int64)

    feat_cols = [j for j in range(width) if j != label_column]
    try:
        F = np.asarray(
            [[float(fields[j]) for j in feat_cols] for fields in rows],
            dtype=np.float64)
    except ValueError as exc:
        raise MalformedRow(f"non-numeric feature field: {exc}") from exc

    if minmax and F.size:
        lo = F.min(axis=0)
        span = F.max(axis=0) - lo
        span[span == 0.0] = 1.0
        F = (F - lo) / span

    if bias:
        X = np.hstack([np.ones((F.shape[0], 1)), F])
    else:
        X = F
    return _make_dataset(X, Y, c=int(Y.max()) + 1)


def write_csv(path, dataset: Dataset, bias_column: bool = True) -> None:
    """Write a Dataset back to the interchange format.

    bias_column says whether dataset.X carries the constant column that
    must be stripped (files never store it).
    """
    F = dataset.X[:, 1:] if bias_column else dataset.X
    with open(path, "w", encoding="ascii") as fh:
        for i in range(dataset.n):
            feats = ",".join(repr(float(v)) for v in F[i])
            fh.write(f"{int(dataset.Y[i])},{feats}\n" if feats
                     else f"{int(dataset.Y[i])}\n")


def synth_dataset(seed: int, n: int, d: int, c: int,
                  center_scale: float = 6.0) -> Dataset:
    """Deterministic synthetic dataset: c well separated Gaussian clusters.

    Class centers are drawn once from N(0, center_scale^2 I) and each
    example adds unit-variance noise, so the classes are linearly
    separable with overwhelming margin at the default scale. Class
    counts are as balanced as n allows (every class appears at least
    once) and row order is a seeded permutation.
    """
    if c < 2 or n < c:
        raise ValueError("need n >= c >= 2")
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=center_scale, size=(c, d))
    counts = np.full(c, n // c, dtype=np.int64)
    counts[: n % c] += 1
    Y = np.repeat(np.arange(c, dtype=np.int64), counts)
    F = centers[Y] + rng.normal(size=(n, d))
    perm = rng.permutation(n)
    Y = Y[perm]
    F = F[perm]
    X = np.hstack([np.ones((n, 1)), F])
    return _make_dataset(X, Y, c)

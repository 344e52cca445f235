"""Dataset ingestion, splitting, target encoding, scaling and metrics."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .xtrees import r2_score  # noqa: F401  re-exported

log = logging.getLogger(__name__)

NUMERIC, CATEGORICAL = "numeric", "categorical"
SMOOTHING = 10.0
DEFAULT_TRAIN = 100
MIN_TEST = 100
MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none", "?"})


class DataError(Exception):
    """Base class for data problems; ``code`` identifies the kind."""

    code = "data_error"


class MissingFileError(DataError):
    code = "missing_file"


class NonNumericTargetError(DataError):
    code = "non_numeric_target"


class EmptyDataError(DataError):
    code = "empty_data"


@dataclass
class Dataset:
    """A cleaned table.

    ``X_raw`` is an object array of shape (n, d): floats in numeric columns,
    strings in categorical ones. ``rejected`` maps source row index (0-based,
    header excluded) to the reason the row was dropped.
    """

    X_raw: np.ndarray
    Y: np.ndarray
    column_kinds: list[str]
    name: str
    feature_names: list[str] = field(default_factory=list)
    rejected: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.feature_names:
            self.feature_names = [f"x{k}" for k in range(self.X_raw.shape[1])]

    @property
    def n(self) -> int:
        return len(self.Y)

    @property
    def d(self) -> int:
        return self.X_raw.shape[1]

    def take(self, rows: np.ndarray) -> "Dataset":
        return Dataset(self.X_raw[rows], self.Y[rows], list(self.column_kinds), self.name,
                       list(self.feature_names))


def _to_float(cell: str) -> Optional[float]:
    try:
        value = float(cell)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def ingest_csv(path: Union[str, Path], target_column: Union[str, int, None] = None) -> Dataset:
    """Read a UTF-8 CSV with a header row.

    ``target_column`` is a header name or position; the last column is the
    default. Rows with missing cells or a wrong field count are dropped and
    reported in ``Dataset.rejected``.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or not any(c.strip() for c in rows[0]):
        raise EmptyDataError(f"{path} has no header row")
    header = [c.strip() for c in rows[0]]
    if target_column is None:
        t = len(header) - 1
    elif isinstance(target_column, int):
        t = target_column
    elif target_column in header:
        t = header.index(target_column)
    elif target_column.lstrip("-").isdigit():
        t = int(target_column)
    else:
        raise DataError(f"target column {target_column!r} not in header")
    if not -len(header) <= t < len(header):
        raise DataError(f"target column index {t} out of range")
    t %= len(header)

    good: list[list[str]] = []
    rejected: dict[int, str] = {}
    for i, row in enumerate(rows[1:]):
        if not row:
            continue  # blank line
        if len(row) != len(header):
            rejected[i] = f"expected {len(header)} fields, got {len(row)}"
            continue
        cells = [c.strip() for c in row]
        missing = [header[k] for k, c in enumerate(cells) if c.lower() in MISSING_TOKENS]
        if missing:
            rejected[i] = "missing value in " + ", ".join(missing)
            continue
        good.append(cells)
    if rejected:
        log.warning("rejected %d row(s) of %s: %s", len(rejected), path.name,
                    sorted(rejected))
    if not good:
        raise EmptyDataError(f"{path} has no usable data rows")

    table = np.array(good, dtype=object)
    y = [_to_float(c) for c in table[:, t]]
    if any(v is None for v in y):
        raise NonNumericTargetError(f"target column {header[t]!r} is not numeric")
    feats = [k for k in range(len(header)) if k != t]
    if not feats:
        raise EmptyDataError(f"{path} has no feature columns")
    X_raw = np.empty((len(good), len(feats)), dtype=object)
    kinds = []
    for out, k in enumerate(feats):
        parsed = [_to_float(c) for c in table[:, k]]
        if all(v is not None for v in parsed):
            kinds.append(NUMERIC)
            X_raw[:, out] = parsed
        else:
            kinds.append(CATEGORICAL)
            X_raw[:, out] = table[:, k]
    return Dataset(X_raw, np.asarray(y, dtype=float), kinds, path.stem,
                   [header[k] for k in feats], rejected)


# --------------------------------------------------------------------------
# synthetic generators

SYNTHETIC = ("sine", "piecewise", "linear")


def synthetic(name: str, n: int = 1000, seed: int = 0) -> Dataset:
    """Noise-free toy problems on ``x ~ U(-3, 3)²``.

    ``sine`` is ``sin(x0)`` with ``x1`` irrelevant; ``piecewise`` is a V shape
    with unequal slopes, so label-kernel neighbours often sit on opposite
    arms; ``linear`` is ``2 x0 - x1 + 0.5``.
    """
    rng = np.random.default_rng([int(seed), 7919])
    X = rng.uniform(-3.0, 3.0, size=(n, 2))
    if name == "sine":
        y = np.sin(X[:, 0])
    elif name == "piecewise":
        y = np.where(X[:, 0] < 0, -X[:, 0], 2.0 * X[:, 0])
    elif name == "linear":
        y = 2.0 * X[:, 0] - X[:, 1] + 0.5
    else:
        raise DataError(f"unknown synthetic dataset {name!r}; choose from {SYNTHETIC}")
    return Dataset(X.astype(object), y, [NUMERIC, NUMERIC], f"synth:{name}")


def load(source: str, target_column=None, seed: int = 0) -> Dataset:
    if source.startswith("synth:"):
        return synthetic(source.split(":", 1)[1], seed=seed)
    return ingest_csv(source, target_column)


# --------------------------------------------------------------------------
# splitting and encoding

@dataclass(frozen=True)
class SplitSpec:
    train_size: Union[str, int] = "auto"
    seed: int = 0
    label_noise_sigma: Optional[float] = None


def train_count(n: int, train_size: Union[str, int] = "auto") -> int:
    if train_size == "auto":
        return DEFAULT_TRAIN if n - DEFAULT_TRAIN >= MIN_TEST else n // 2
    k = int(train_size)
    if not 2 <= k < n:
        raise ValueError(f"train size {k} must lie in [2, {n - 1}]")
    return k


def split(dataset: Dataset, spec: SplitSpec = SplitSpec(), rng=None):
    """Random train/test partition; label noise touches training labels only."""
    n = dataset.n
    if n < 4:
        raise EmptyDataError(f"need at least 4 rows, got {n}")
    rng = np.random.default_rng(spec.seed if rng is None else rng)
    k = train_count(n, spec.train_size)
    order = rng.permutation(n)
    train, test = dataset.take(np.sort(order[:k])), dataset.take(np.sort(order[k:]))
    if spec.label_noise_sigma:
        train.Y = train.Y + rng.normal(0.0, spec.label_noise_sigma, size=k)
    return train, test


def target_encode(train: Dataset, test: Dataset, m: float = SMOOTHING):
    """Numeric matrices for both splits, encoding categories on training rows.

    A category ``c`` maps to ``(n_c mean_c + m mean) / (n_c + m)``; categories
    absent from training map to the training mean.
    """
    global_mean = float(train.Y.mean())
    A = np.empty(train.X_raw.shape)
    B = np.empty(test.X_raw.shape)
    for k, kind in enumerate(train.column_kinds):
        if kind == NUMERIC:
            A[:, k] = train.X_raw[:, k].astype(float)
            B[:, k] = test.X_raw[:, k].astype(float)
            continue
        cats, inv = np.unique(train.X_raw[:, k].astype(str), return_inverse=True)
        counts = np.bincount(inv, minlength=len(cats))
        sums = np.bincount(inv, weights=train.Y, minlength=len(cats))
        codes = (sums + m * global_mean) / (counts + m)
        table = dict(zip(cats.tolist(), codes.tolist()))
        A[:, k] = codes[inv]
        B[:, k] = [table.get(c, global_mean) for c in test.X_raw[:, k].astype(str)]
    return A, B


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, A: np.ndarray) -> "Standardizer":
        A = np.asarray(A, dtype=float)
        std = A.std(axis=0)
        return cls(A.mean(axis=0), np.where(std > 1e-12, std, 1.0))

    def transform(self, A: np.ndarray) -> np.ndarray:
        return (np.asarray(A, dtype=float) - self.mean) / self.std

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z, dtype=float) * self.std + self.mean


# --------------------------------------------------------------------------
# metrics

def clip_predictions(pred: np.ndarray, y_train: np.ndarray) -> np.ndarray:
    return np.clip(np.asarray(pred, dtype=float), np.min(y_train), np.max(y_train))

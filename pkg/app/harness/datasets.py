"""
Dataset ingestion, standardization, splits and synthetic GP data
"""

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from loguru import logger

from app.core.config import settings
from app.core.errors import DataError, InvalidInputError
from app.gp.estimator import derive_seed
from app.gp.exact import cholesky
from app.gp.kernel import Hyperparameters, system_matrix
from app.models.requests import DataSource


@dataclass(frozen=True, eq=False)
class Standardization:
    """Affine maps fitted on a training split"""

    feature_means: np.ndarray
    feature_stds: np.ndarray
    target_mean: float
    target_std: float

    @classmethod
    def identity(cls, d: int) -> "Standardization":
        return cls(np.zeros(d), np.ones(d), 0.0, 1.0)

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray) -> "Standardization":
        """Mean/std per column; constant columns keep std 1"""
        feature_stds = X.std(axis=0)
        feature_stds[feature_stds == 0] = 1.0
        target_std = float(y.std())
        return cls(
            feature_means=X.mean(axis=0),
            feature_stds=feature_stds,
            target_mean=float(y.mean()),
            target_std=target_std if target_std > 0 else 1.0,
        )

    def transform_features(self, X: np.ndarray) -> np.ndarray:
        return (X - self.feature_means) / self.feature_stds

    def transform_targets(self, y: np.ndarray) -> np.ndarray:
        return (y - self.target_mean) / self.target_std

    def inverse_features(self, X: np.ndarray) -> np.ndarray:
        return X * self.feature_stds + self.feature_means

    def inverse_targets(self, y: np.ndarray) -> np.ndarray:
        return y * self.target_std + self.target_mean


@dataclass(frozen=True)
class SplitDescriptor:
    seed: int
    train_fraction: float


@dataclass(frozen=True, eq=False)
class Dataset:
    """Inputs, targets and how they were preprocessed"""

    X: np.ndarray
    y: np.ndarray
    name: str = "dataset"
    standardization: Optional[Standardization] = None
    split: Optional[SplitDescriptor] = None
    warnings: List[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def load_csv(path: str | Path, target_column: str) -> Dataset:
    """
    Parse a comma-separated numeric file with a header row.

    Rows containing non-finite values (NaN, inf, empty cells) are dropped and
    counted in the dataset warnings; anything non-numeric is an error.
    """
    path = Path(path)
    raw = path.read_bytes()
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError as e:
        line = raw[: e.start].count(b"\n") + 1
        raise DataError(f"{path} is not valid UTF-8 (byte offset {e.start})", line=line) from e

    with io.StringIO(text, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = [name.strip() for name in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty", line=1)
        if target_column not in header:
            raise DataError(f"Target column '{target_column}' not in header {header}", line=1)
        target_index = header.index(target_column)

        rows: List[List[float]] = []
        rejected = 0
        for record in reader:
            if not record or all(cell.strip() == "" for cell in record):
                continue
            if len(record) != len(header):
                raise DataError(
                    f"Expected {len(header)} fields, found {len(record)}", line=reader.line_num
                )
            values = []
            for cell in record:
                cell = cell.strip()
                if cell == "":
                    values.append(math.nan)
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DataError(f"Cannot parse '{cell}' as a number", line=reader.line_num)
            if not all(math.isfinite(value) for value in values):
                rejected += 1
                continue
            rows.append(values)

    if len(rows) < 2:
        raise DataError(f"{path} has fewer than 2 usable rows")
    data = np.asarray(rows, dtype=float)
    y = data[:, target_index]
    X = np.delete(data, target_index, axis=1)
    if np.all(y == y[0]):
        raise DataError(f"Target column '{target_column}' is constant")

    warnings = []
    if rejected:
        warnings.append(f"rejected {rejected} rows with non-finite values")
        logger.warning(f"⚠️ {path.name}: rejected {rejected} rows with non-finite values")
    logger.info(f"✅ Loaded {path.name}: n={X.shape[0]}, d={X.shape[1]}")
    return Dataset(X=X, y=y, name=path.stem, warnings=warnings)


def split_standardize(
    ds: Dataset,
    train_fraction: float = settings.DEFAULT_TRAIN_FRACTION,
    split_seed: int = 0,
) -> Tuple[Dataset, Dataset]:
    """Shuffle, split, and z-score both parts with training statistics"""
    if not 0.0 < train_fraction < 1.0:
        raise InvalidInputError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n_train = int(round(train_fraction * ds.n))
    if n_train < 1 or n_train >= ds.n:
        raise DataError(f"Split of n={ds.n} at {train_fraction} leaves an empty train or test set")

    order = np.random.default_rng(split_seed).permutation(ds.n)
    train_idx, test_idx = order[:n_train], order[n_train:]
    stats = Standardization.fit(ds.X[train_idx], ds.y[train_idx])
    split = SplitDescriptor(seed=split_seed, train_fraction=train_fraction)

    def _part(idx: np.ndarray, suffix: str) -> Dataset:
        return replace(
            ds,
            X=stats.transform_features(ds.X[idx]),
            y=stats.transform_targets(ds.y[idx]),
            name=f"{ds.name}/{suffix}",
            standardization=stats,
            split=split,
        )

    return _part(train_idx, "train"), _part(test_idx, "test")


def synthesize(
    n: int,
    d: int,
    true_hyper: Optional[Hyperparameters] = None,
    noise: Optional[float] = None,
    seed: int = 0,
) -> Dataset:
    """
    Draw X ~ U[0, 1]^d and y from the exact GP prior (Cholesky of K + noise^2 I).

    Defaults: lengthscales 0.5, signal 1, noise 0.1. `noise` overrides the
    noise of `true_hyper`.
    """
    if n < 1 or d < 1:
        raise InvalidInputError(f"Need n >= 1 and d >= 1, got n={n}, d={d}")
    if n > settings.DENSE_GUARD:
        raise InvalidInputError(f"n={n} exceeds the dense guard ({settings.DENSE_GUARD})")
    if true_hyper is None:
        true_hyper = Hyperparameters.from_constrained(np.full(d, 0.5), 1.0, 0.1 if noise is None else noise)
    elif noise is not None:
        true_hyper = Hyperparameters.from_constrained(true_hyper.lengthscales, true_hyper.signal, noise)
    if true_hyper.dim != d:
        raise InvalidInputError(f"true_hyper has {true_hyper.dim} lengthscales, d={d}")

    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(n, d))
    L, _ = cholesky(system_matrix(X, true_hyper))
    y = np.tril(L) @ rng.standard_normal(n)
    return Dataset(X=X, y=y, name=f"synthetic-n{n}-d{d}-s{seed}")


def resolve_dataset(source: DataSource) -> Dataset:
    """Dataset from a CSV path or a synthetic spec"""
    if source.path:
        if not source.target_col:
            raise InvalidInputError("A CSV data source needs target_col")
        return load_csv(source.path, source.target_col)
    if source.synthetic is not None:
        spec = source.synthetic
        true_hyper = Hyperparameters.from_constrained(np.full(spec.d, spec.lengthscale), spec.signal, spec.noise)
        return synthesize(spec.n, spec.d, true_hyper, seed=spec.seed)
    raise InvalidInputError("Data source needs either a CSV path or a synthetic spec")


def split_seeds(seed: int, splits: int) -> List[int]:
    """Pre-derived split seeds so splits are independent jobs"""
    return [derive_seed(seed, 7919, i) for i in range(splits)]

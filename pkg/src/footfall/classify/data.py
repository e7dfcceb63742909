"""Labelled feature datasets, scaling, balancing and cross-validation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DegenerateInputError, ShapeError
from ..features import FEATURE_NAMES, read_feature_csv, write_feature_csv


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "std", np.asarray(self.std, dtype=np.float64))
        if np.any(self.std <= 0):
            raise DegenerateInputError("scaler standard deviations must be > 0")

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.mean.size:
            raise ShapeError(f"expected {self.mean.size} features, got {X.shape[-1]}")
        return (X - self.mean) / self.std

    def inverse_transform(self, Z) -> np.ndarray:
        return np.asarray(Z) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d) -> "Scaler":
        return cls(d["mean"], d["std"])


@dataclass(frozen=True)
class Dataset:
    """Rows of features with +/-1 labels.

    When ``scaler`` is set, ``X`` holds the *scaled* features.
    """

    X: np.ndarray
    y: np.ndarray
    provenance: Tuple[str, ...] = ()
    scaler: Optional[Scaler] = None
    feature_names: Tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        y = np.asarray(self.y).astype(np.int64).ravel()
        if X.shape[0] != y.size:
            raise ShapeError(f"{X.shape[0]} rows but {y.size} labels")
        if not np.all(np.isin(y, (-1, 1))):
            raise ValueError("labels must be -1 or +1")
        names = tuple(self.feature_names)
        if len(names) != X.shape[1]:
            names = tuple(f"x{i}" for i in range(X.shape[1]))
        prov = tuple(self.provenance) if self.provenance else ("",) * y.size
        if len(prov) != y.size:
            raise ShapeError("provenance must have one tag per row")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "provenance", prov)
        object.__setattr__(self, "feature_names", names)

    def __len__(self) -> int:
        return self.y.size

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return replace(
            self,
            X=self.X[idx],
            y=self.y[idx],
            provenance=tuple(self.provenance[i] for i in idx),
        )

    def raw_X(self) -> np.ndarray:
        return self.scaler.inverse_transform(self.X) if self.scaler is not None else self.X

    @classmethod
    def concat(cls, parts: Sequence["Dataset"]) -> "Dataset":
        return cls(
            np.vstack([p.raw_X() for p in parts]),
            np.concatenate([p.y for p in parts]),
            sum((p.provenance for p in parts), ()),
            feature_names=parts[0].feature_names,
        )

    @classmethod
    def from_csv(cls, path, provenance: Optional[str] = None) -> "Dataset":
        X, y = read_feature_csv(path)
        tag = provenance if provenance is not None else Path(path).stem
        return cls(X, y, (tag,) * y.size)

    def to_csv(self, path) -> None:
        write_feature_csv(path, self.raw_X(), self.y)


def fit_scaler(X, names: Optional[Sequence[str]] = None) -> Scaler:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 2:
        raise DegenerateInputError("need at least 2 rows to fit a scaler")
    std = X.std(axis=0)
    bad = np.flatnonzero(std == 0)
    if bad.size:
        name = names[bad[0]] if names is not None else f"#{bad[0]}"
        raise DegenerateInputError(f"feature {name!r} has zero variance")
    return Scaler(X.mean(axis=0), std)


def standardize(ds: Dataset, scaler: Optional[Scaler] = None) -> Dataset:
    """Z-score ``ds``; fits a new scaler on ``ds`` unless one is given."""
    X = ds.raw_X()
    if scaler is None:
        scaler = fit_scaler(X, ds.feature_names)
    return replace(ds, X=scaler.transform(X), scaler=scaler)


def undersample(
    ds: Dataset,
    target: int,
    seed: int,
    label: Optional[int] = None,
    provenance: Optional[str] = None,
) -> Dataset:
    """Randomly keep ``target`` rows of one group, leaving all other rows untouched.

    The group is rows tagged ``provenance`` if given, else rows labelled
    ``label``, else the majority class.
    """
    if provenance is not None:
        mask = np.array([p == provenance for p in ds.provenance])
    else:
        if label is None:
            labs, counts = np.unique(ds.y, return_counts=True)
            label = int(labs[np.argmax(counts)])
        mask = ds.y == label
    group = np.flatnonzero(mask)
    if target > group.size:
        raise ValueError(f"target {target} exceeds group size {group.size}")
    if target == group.size:
        return ds
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(group, size=target, replace=False))
    idx = np.sort(np.concatenate([np.flatnonzero(~mask), keep]))
    return ds.subset(idx)


def stratified_folds(y, k: int, seed: int) -> List[np.ndarray]:
    """Seeded stratified assignment of row indices to ``k`` test folds."""
    y = np.asarray(y)
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    folds: List[List[int]] = [[] for _ in range(k)]
    offset = 0
    for lab in np.unique(y):
        idx = np.flatnonzero(y == lab)
        if idx.size < k:
            raise ValueError(f"class {lab} has {idx.size} rows, fewer than k={k} folds")
        idx = rng.permutation(idx)
        for n, i in enumerate(idx):
            folds[(n + offset) % k].append(int(i))
        offset += idx.size
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


def kfold_cv(
    ds: Dataset,
    trainer: Callable[[Dataset], object],
    k: int = 10,
    seed: int = 0,
    scale: bool = True,
) -> Tuple[float, List[float]]:
    """Stratified k-fold cross-validation.

    ``trainer`` receives the (optionally standardized) training fold and
    returns a model with ``predict(X_raw) -> labels``. The scaler is fitted on
    each training fold only. Returns the mean fold accuracy and the per-fold
    accuracies.
    """
    raw = replace(ds, X=ds.raw_X(), scaler=None)
    accs = []
    for test_idx in stratified_folds(raw.y, k, seed):
        train_idx = np.setdiff1d(np.arange(len(raw)), test_idx)
        train = raw.subset(train_idx)
        if scale:
            train = standardize(train)
        model = trainer(train)
        pred = np.asarray(model.predict(raw.X[test_idx]))
        accs.append(float(np.mean(pred == raw.y[test_idx])))
    return float(np.mean(accs)), accs


def train_test_split(ds: Dataset, test_fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """Stratified random split."""
    rng = np.random.default_rng(seed)
    test = []
    for lab in np.unique(ds.y):
        idx = rng.permutation(np.flatnonzero(ds.y == lab))
        test.extend(idx[: int(round(test_fraction * idx.size))])
    test = np.sort(np.array(test, dtype=np.int64))
    train = np.setdiff1d(np.arange(len(ds)), test)
    return ds.subset(train), ds.subset(test)

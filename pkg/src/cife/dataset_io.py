"""Tabular dataset loading, stratified 6-way fold partitions and bootstrap resampling."""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .seeding import derive_rng

BUILTIN_DATASETS = ("wine", "ionosphere", "balance-scale", "pima")


class DatasetFormatError(ValueError):
    """Raised when a CSV cannot be parsed into a numeric dataset."""


class EmptyDatasetError(ValueError):
    pass


class StratificationWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_count: int
    name: str = "dataset"
    class_names: tuple = ()

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if features.shape[0] != labels.shape[0]:
            raise ValueError(
                f"features has {features.shape[0]} rows but labels has {labels.shape[0]} entries"
            )
        if not np.all(np.isfinite(features)):
            raise ValueError("features contain non-finite values")
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            raise ValueError(f"labels must lie in [0, {self.class_count})")
        if labels.size and np.unique(labels).size != self.class_count:
            raise ValueError("every class index in [0, L) must occur at least once")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def n_instances(self) -> int:
        return self.features.shape[0]

    @property
    def n_attributes(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class FoldSplit:
    train_idx: np.ndarray
    val1_idx: np.ndarray
    val2_idx: np.ndarray
    test_idx: np.ndarray
    warnings: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "train": self.train_idx.tolist(),
            "val1": self.val1_idx.tolist(),
            "val2": self.val2_idx.tolist(),
            "test": self.test_idx.tolist(),
        }


@dataclass(frozen=True)
class BootstrapSample:
    indices: np.ndarray
    rng_seed: int


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path, label_column: int = -1, name: str | None = None) -> Dataset:
    """Load a comma-separated file into a :class:`Dataset`.

    The label column defaults to the last one. A header row is assumed iff
    its first row holds a non-numeric cell outside the label column. Labels
    are re-encoded densely in order of first appearance.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]
    return _from_rows(rows, label_column, name or path.stem, source=str(path))


def _from_rows(rows, label_column, name, source="<rows>") -> Dataset:
    if not rows:
        raise EmptyDatasetError(f"{source}: no rows")
    width = len(rows[0])
    col = label_column % width
    first = [c.strip() for i, c in enumerate(rows[0]) if i != col]
    start = 1 if any(not _is_number(c) for c in first) else 0
    body = rows[start:]
    if not body:
        raise EmptyDatasetError(f"{source}: header only, no data rows")

    features = np.empty((len(body), width - 1))
    raw_labels = []
    for r, row in enumerate(body):
        line = r + start + 1
        if len(row) != width:
            raise DatasetFormatError(f"{source}:{line}: expected {width} columns, found {len(row)}")
        j = 0
        for c, cell in enumerate(row):
            if c == col:
                raw_labels.append(cell.strip())
                continue
            try:
                features[r, j] = float(cell)
            except ValueError:
                raise DatasetFormatError(
                    f"{source}:{line}: column {c + 1} value {cell!r} is not numeric"
                ) from None
            if not np.isfinite(features[r, j]):
                raise DatasetFormatError(f"{source}:{line}: column {c + 1} is not finite")
            j += 1

    codes: dict[str, int] = {}
    labels = np.array([codes.setdefault(lab, len(codes)) for lab in raw_labels], dtype=np.int64)
    counts = np.bincount(labels, minlength=len(codes))
    small = [lab for lab, k in codes.items() if counts[k] < 6]
    if small:
        warnings.warn(
            f"{name}: classes {small} have fewer than 6 instances; folds cannot all contain them",
            StratificationWarning,
            stacklevel=3,
        )
    return Dataset(features, labels, len(codes), name, tuple(codes))


def load_builtin(name: str) -> Dataset:
    """Load one of the bundled UCI datasets (see ``BUILTIN_DATASETS``)."""
    if name not in BUILTIN_DATASETS:
        raise KeyError(f"unknown dataset {name!r}; bundled: {', '.join(BUILTIN_DATASETS)}")
    ref = resources.files("cife.datasets").joinpath(f"{name}.csv")
    with resources.as_file(ref) as path:
        return load_csv(path, name=name)


def load_dataset(spec: str) -> Dataset:
    """Resolve a bundled dataset name, ``toy``, or a CSV path."""
    if spec in BUILTIN_DATASETS:
        return load_builtin(spec)
    if spec == "toy":
        return two_blobs()
    return load_csv(spec)


def two_blobs(n: int = 300, seed: int = 0, separation: float = 6.0) -> Dataset:
    """Two isotropic Gaussian blobs in 2-D, linearly separable in practice."""
    rng = np.random.default_rng(seed)
    half = n // 2
    a = rng.normal(size=(half, 2)) + np.array([-separation / 2, 0.0])
    b = rng.normal(size=(n - half, 2)) + np.array([separation / 2, 0.0])
    labels = np.r_[np.zeros(half, dtype=np.int64), np.ones(n - half, dtype=np.int64)]
    return Dataset(np.vstack([a, b]), labels, 2, "toy")


def stratified_groups(labels: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    """Split indices into ``k`` groups whose class counts differ by at most one."""
    rng = derive_rng(seed, "groups")
    order = []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        order.append(rng.permutation(idx))
    # dealing the class-sorted sequence round-robin keeps both the group sizes
    # and each class's per-group count within one of each other
    dealt = np.concatenate(order)
    groups = [np.sort(dealt[g::k]) for g in range(k)]
    return groups


def make_folds(ds: Dataset, k: int = 6, seed: int = 0) -> list[FoldSplit]:
    """Build ``k`` rotating train/val1/val2/test splits.

    Run ``r`` tests on group ``r``; the other groups are shuffled by a
    seed-derived stream, the first two becoming validation-1 and
    validation-2 and the rest the training set.
    """
    if k < 4:
        raise ValueError("k must be at least 4 (train, val1, val2 and test partitions)")
    if k > ds.n_instances:
        raise ValueError(f"k={k} exceeds the {ds.n_instances} instances available")
    groups = stratified_groups(ds.labels, k, seed)
    splits = []
    for r in range(k):
        rest = [g for g in range(k) if g != r]
        rest = [rest[i] for i in derive_rng(seed, "roles", r).permutation(len(rest))]
        train = np.sort(np.concatenate([groups[g] for g in rest[2:]]))
        notes = []
        for role, idx in (("train", train), ("val1", groups[rest[0]]), ("val2", groups[rest[1]]), ("test", groups[r])):
            missing = sorted(set(range(ds.class_count)) - set(np.unique(ds.labels[idx]).tolist()))
            if missing:
                notes.append(f"fold {r}: classes {missing} absent from {role}")
        splits.append(FoldSplit(train, groups[rest[0]], groups[rest[1]], groups[r], tuple(notes)))
    return splits


def bootstrap(train_idx, seed: int) -> BootstrapSample:
    train_idx = np.asarray(train_idx)
    if train_idx.size == 0:
        raise ValueError("cannot bootstrap an empty index list")
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, train_idx.size, size=train_idx.size)
    return BootstrapSample(train_idx[picks], seed)


def save_folds(splits: list[FoldSplit], path) -> None:
    with open(path, "w") as fh:
        json.dump([s.to_dict() for s in splits], fh)

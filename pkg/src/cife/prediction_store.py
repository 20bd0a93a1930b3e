"""Label matrices of pool predictions, accuracies and pairwise hit/miss fractions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class LabelMatrix:
    """Predicted labels of every pool member (rows) on one split (columns)."""

    rows: np.ndarray
    truth: np.ndarray
    split_tag: str
    n_classes: int

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=np.int64))
        truth = np.asarray(self.truth, dtype=np.int64)
        if rows.shape[1] != truth.shape[0]:
            raise ValueError(f"rows cover {rows.shape[1]} instances, truth has {truth.shape[0]}")
        if rows.size and (rows.min() < 0 or rows.max() >= self.n_classes):
            raise ValueError(f"predicted labels must lie in [0, {self.n_classes})")
        rows.setflags(write=False)
        truth.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "truth", truth)

    @property
    def n_classifiers(self) -> int:
        return self.rows.shape[0]

    @property
    def m(self) -> int:
        return self.rows.shape[1]

    @property
    def hits(self) -> np.ndarray:
        return self.rows == self.truth[None, :]

    def accuracies(self) -> np.ndarray:
        return self.hits.mean(axis=1)

    def one_hot(self) -> np.ndarray:
        """(|C|, m * L) float matrix; summing selected rows gives per-instance vote counts."""
        out = np.zeros((self.n_classifiers, self.m, self.n_classes))
        np.put_along_axis(out, self.rows[:, :, None], 1.0, axis=2)
        return out.reshape(self.n_classifiers, -1)


@dataclass(frozen=True)
class ContingencyFractions:
    a: float
    b: float
    c: float
    d: float
    m: int = 0

    def __post_init__(self):
        vals = (self.a, self.b, self.c, self.d)
        if min(vals) < 0 or abs(sum(vals) - 1.0) > 1e-12:
            raise ValueError(f"invalid contingency fractions {vals}")


def _check(pred, truth):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("need at least one instance")
    return pred, truth


def accuracy(row, truth) -> float:
    row, truth = _check(row, truth)
    return float(np.mean(row == truth))


def contingency(row_i, row_j, truth) -> ContingencyFractions:
    """Hit/miss fractions: a both hit, b only j hits, c only i hits, d both miss."""
    row_i, truth = _check(row_i, truth)
    row_j, _ = _check(row_j, truth)
    hi, hj = row_i == truth, row_j == truth
    m = truth.size
    counts = (
        np.count_nonzero(hi & hj),
        np.count_nonzero(~hi & hj),
        np.count_nonzero(hi & ~hj),
        np.count_nonzero(~hi & ~hj),
    )
    return ContingencyFractions(*(k / m for k in counts), m=m)


def pairwise_fractions(lm: LabelMatrix) -> tuple[np.ndarray, ...]:
    """All-pairs (a, b, c, d) as four |C| x |C| arrays indexed [i, j]."""
    H = lm.hits.astype(np.int64)
    M = 1 - H
    m = lm.m
    both = H @ H.T
    only_j = M @ H.T  # i misses, j hits
    only_i = H @ M.T
    neither = M @ M.T
    return both / m, only_j / m, only_i / m, neither / m

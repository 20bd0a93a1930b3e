"""The three minimised fitness functions over ensemble masks.

``E``: ensemble error. ``D``: mean of error and ensemble diversity score.
``P``: weighted error, diversity and relative ensemble size.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diversity import PairDiversityTable, ensemble_diversity
from .ensemble_eval import ensemble_accuracy
from .prediction_store import LabelMatrix


@dataclass(frozen=True)
class FitnessSpec:
    kind: str = "E"
    alpha: float = 0.45
    beta: float = 0.45
    gamma: float = 0.1
    eval_split: str = "val2"
    diversity_normalization: str = "pairs"

    def __post_init__(self):
        if self.kind not in ("E", "D", "P"):
            raise ValueError(f"fitness kind must be E, D or P, not {self.kind!r}")
        if self.eval_split not in ("val1", "val2"):
            raise ValueError("eval_split must be 'val1' or 'val2'")
        w = (self.alpha, self.beta, self.gamma)
        if self.kind == "P" and (min(w) < 0 or max(w) > 1 or abs(sum(w) - 1.0) > 1e-12):
            raise ValueError(f"weights {w} must lie in [0, 1] and sum to 1")


@dataclass(frozen=True)
class FitnessValue:
    value: float
    e_m: float
    d_m: float | None = None
    t_p: float | None = None


def _error(masks, lm, onehot=None):
    return 1.0 - ensemble_accuracy(masks, lm, onehot)


def f_e(mask, lm: LabelMatrix) -> FitnessValue:
    e_m = float(_error(mask, lm)[0])
    return FitnessValue(e_m, e_m)


def f_d(mask, lm: LabelMatrix, table: PairDiversityTable, normalization: str = "pairs") -> FitnessValue:
    e_m = float(_error(mask, lm)[0])
    d_m = float(ensemble_diversity(np.asarray(mask), table, normalization))
    return FitnessValue((e_m + d_m) / 2, e_m, d_m)


def pruning_factor(mask) -> float:
    mask = np.asarray(mask, dtype=bool)
    return mask.sum() / mask.size


def f_p(mask, lm: LabelMatrix, table: PairDiversityTable, spec: FitnessSpec) -> FitnessValue:
    if spec.kind != "P":
        spec = FitnessSpec("P", spec.alpha, spec.beta, spec.gamma, spec.eval_split, spec.diversity_normalization)
    e_m = float(_error(mask, lm)[0])
    d_m = float(ensemble_diversity(np.asarray(mask), table, spec.diversity_normalization))
    t_p = float(pruning_factor(mask))
    return FitnessValue(spec.alpha * e_m + spec.beta * d_m + spec.gamma * t_p, e_m, d_m, t_p)


class FitnessFunction:
    """Vectorised fitness over a (population, |C|) boolean array.

    Calling the object returns the fitness values; :meth:`components`
    returns (value, e_m, d_m, t_p) arrays.
    """

    def __init__(self, spec: FitnessSpec, lm: LabelMatrix, table: PairDiversityTable | None = None):
        if spec.kind in ("D", "P") and table is None:
            raise ValueError(f"fitness {spec.kind} needs a pair diversity table")
        self.spec = spec
        self.lm = lm
        self.table = table
        self._onehot = lm.one_hot()

    def components(self, masks):
        masks = np.atleast_2d(np.asarray(masks, dtype=bool))
        e_m = _error(masks, self.lm, self._onehot)
        if self.spec.kind == "E":
            return e_m, e_m, None, None
        d_m = ensemble_diversity(masks, self.table, self.spec.diversity_normalization)
        if self.spec.kind == "D":
            return (e_m + d_m) / 2, e_m, d_m, None
        t_p = masks.sum(axis=1) / masks.shape[1]
        s = self.spec
        return s.alpha * e_m + s.beta * d_m + s.gamma * t_p, e_m, d_m, t_p

    def __call__(self, masks) -> np.ndarray:
        return self.components(masks)[0]

"""Majority-vote fusion of a selected subset and its scoring."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .prediction_store import LabelMatrix


@dataclass(frozen=True)
class EnsembleResult:
    mask: np.ndarray
    test_accuracy: float
    ensemble_size: int
    per_instance_votes: np.ndarray | None = None


def majority_vote(votes) -> int:
    """Most frequent label; ties go to the lowest class index."""
    votes = np.asarray(votes, dtype=np.int64)
    if votes.size == 0:
        raise ValueError("majority vote needs at least one vote")
    return int(np.argmax(np.bincount(votes)))


def vote_counts(masks, lm: LabelMatrix, onehot: np.ndarray | None = None) -> np.ndarray:
    """(n_masks, m, L) counts of votes per class for each mask."""
    masks = np.atleast_2d(np.asarray(masks, dtype=float))
    onehot = lm.one_hot() if onehot is None else onehot
    return (masks @ onehot).reshape(masks.shape[0], lm.m, lm.n_classes)


def ensemble_predictions(masks, lm: LabelMatrix, onehot: np.ndarray | None = None) -> np.ndarray:
    return np.argmax(vote_counts(masks, lm, onehot), axis=2)


def ensemble_accuracy(masks, lm: LabelMatrix, onehot: np.ndarray | None = None) -> np.ndarray:
    return np.mean(ensemble_predictions(masks, lm, onehot) == lm.truth[None, :], axis=1)


def evaluate(mask, lm_test: LabelMatrix, keep_votes: bool = False) -> EnsembleResult:
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("cannot evaluate an empty ensemble")
    counts = vote_counts(mask, lm_test)[0]
    acc = float(np.mean(np.argmax(counts, axis=1) == lm_test.truth))
    return EnsembleResult(mask.copy(), acc, int(mask.sum()), counts if keep_votes else None)

"""Reference ensembles: the full bagged pool, and Kappa pruning."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble_eval import EnsembleResult, evaluate
from .prediction_store import LabelMatrix


@dataclass(frozen=True)
class KappaPair:
    i: int
    j: int
    kappa: float


def contingency_table(row_i, row_j, n_classes: int) -> np.ndarray:
    """L x L counts: entry [p, q] counts instances with row_i == p and row_j == q."""
    ct = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(ct, (np.asarray(row_i), np.asarray(row_j)), 1)
    return ct


def _kappa_from_thetas(theta1, theta2):
    theta1 = np.asarray(theta1, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    out = np.where(theta1 == 1.0, 1.0, 0.0)
    live = theta2 != 1.0
    np.divide(theta1 - theta2, 1.0 - theta2, out=out, where=live)
    return out


def kappa(ct) -> float:
    """Inter-rater agreement of two classifiers from their L x L contingency table.

    With a degenerate chance agreement of 1, kappa is 1 if the pair agrees
    everywhere and 0 otherwise.
    """
    ct = np.asarray(ct, dtype=float)
    m = ct.sum()
    if m < 1:
        raise ValueError("contingency table is empty")
    theta1 = np.trace(ct) / m
    theta2 = float(np.sum(ct.sum(axis=1) / m * (ct.sum(axis=0) / m)))
    return float(_kappa_from_thetas(theta1, theta2))


def pairwise_kappa(lm: LabelMatrix) -> np.ndarray:
    """|C| x |C| kappa matrix computed from predicted labels only."""
    onehot = lm.one_hot().reshape(lm.n_classifiers, lm.m, lm.n_classes)
    agree = np.einsum("imc,jmc->ij", onehot, onehot) / lm.m
    freq = onehot.mean(axis=1)
    chance = freq @ freq.T
    return _kappa_from_thetas(agree, chance)


def kappa_prune_matrix(kappas, budget: int) -> np.ndarray:
    """Walk pairs in ascending kappa (ties lexicographic) adding both members until ``budget`` are active."""
    kappas = np.asarray(kappas, dtype=float)
    n = kappas.shape[0]
    if not 2 <= budget <= n:
        raise ValueError(f"budget must lie in [2, {n}]")
    i, j = np.triu_indices(n, k=1)
    order = np.lexsort((j, i, kappas[i, j]))
    mask = np.zeros(n, dtype=bool)
    for p in order:
        mask[i[p]] = mask[j[p]] = True
        if mask.sum() >= budget:
            break
    return mask


def kappa_prune(lm: LabelMatrix, budget: int = 30) -> np.ndarray:
    return kappa_prune_matrix(pairwise_kappa(lm), budget)


def ranked_kappa_pairs(lm: LabelMatrix) -> list[KappaPair]:
    k = pairwise_kappa(lm)
    i, j = np.triu_indices(k.shape[0], k=1)
    order = np.lexsort((j, i, k[i, j]))
    return [KappaPair(int(i[p]), int(j[p]), float(k[i[p], j[p]])) for p in order]


def bagging_full(lm_test: LabelMatrix) -> EnsembleResult:
    return evaluate(np.ones(lm_test.n_classifiers, dtype=bool), lm_test)

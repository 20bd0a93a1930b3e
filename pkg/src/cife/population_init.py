"""Initial populations of ensemble masks: uniform random, or tuned by rank aggregation.

Tuning ranks every classifier pair by a mix of pair error and aggregated
diversity, walks the ranked list until every classifier has appeared once,
and samples ensembles from a roulette weighted by those appearance counts.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .diversity import PairDiversityTable
from .seeding import derive_rng


@dataclass(frozen=True)
class RankedPairList:
    i: np.ndarray
    j: np.ndarray
    score: np.ndarray

    def __len__(self):
        return self.score.size

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "c_i", "c_j", "score_rank"])
            for r, (a, b, s) in enumerate(zip(self.i.tolist(), self.j.tolist(), self.score.tolist()), 1):
                w.writerow([r, a, b, repr(s)])


@dataclass(frozen=True)
class ClassifierHistogram:
    frequency: np.ndarray
    cut_row: int

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["classifier", "frequency"])
            w.writerows(enumerate(self.frequency.tolist()))
            w.writerow(["cut_row", self.cut_row])


def repair(masks: np.ndarray, repair_index: int = 0) -> np.ndarray:
    """Set ``repair_index`` in every all-zero row (in place) and return the array."""
    empty = ~masks.any(axis=1)
    masks[empty, repair_index] = True
    return masks


def random_population(pop_size: int, pool_size: int, seed: int) -> np.ndarray:
    """Masks with a uniform cardinality in [1, pool_size] and uniformly chosen members."""
    if pop_size < 1 or pool_size < 1:
        raise ValueError("pop_size and pool_size must be positive")
    rng = derive_rng(seed, "random-population")
    sizes = rng.integers(1, pool_size + 1, size=pop_size)
    # a uniform random permutation's first k entries are a uniform k-subset
    ranks = np.argsort(rng.random((pop_size, pool_size)), axis=1)
    masks = np.zeros((pop_size, pool_size), dtype=bool)
    rows = np.arange(pop_size)[:, None]
    masks[rows, ranks] = np.arange(pool_size)[None, :] < sizes[:, None]
    return masks


def aggregate_scores(oriented) -> np.ndarray:
    """Product of (1 + score) over the five oriented measures, per pair."""
    oriented = np.asarray(oriented, dtype=float)
    return np.prod(1.0 + oriented, axis=-1)


def minmax(values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    span = values.max() - values.min()
    if span == 0:
        return np.zeros_like(values)
    return (values - values.min()) / span


def rank_pairs(score_dc, pair_error, alpha: float = 0.5, pairs=None) -> RankedPairList:
    """Sort pairs ascending by ``alpha * error + (1 - alpha) * score_dc``.

    ``pairs`` is an (i, j) pair of index arrays in lexicographic order; ties
    keep that order. When omitted, the pairs of a pool whose size matches the
    number of scores are assumed.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    score_dc = np.asarray(score_dc, dtype=float)
    pair_error = np.asarray(pair_error, dtype=float)
    if pairs is None:
        n = int(round((1 + np.sqrt(1 + 8 * score_dc.size)) / 2))
        pairs = np.triu_indices(n, k=1)
    i, j = (np.asarray(p) for p in pairs)
    score = alpha * pair_error + (1 - alpha) * score_dc
    order = np.lexsort((j, i, score))
    return RankedPairList(i[order], j[order], score[order])


def build_histogram(ranked: RankedPairList, pool_size: int) -> ClassifierHistogram:
    """Count pair-member occurrences top-down until every classifier has appeared."""
    if pool_size < 2:
        raise ValueError("a histogram needs a pool of at least two classifiers")
    freq = np.zeros(pool_size, dtype=np.int64)
    missing = pool_size
    for row, (a, b) in enumerate(zip(ranked.i.tolist(), ranked.j.tolist()), 1):
        for c in (a, b):
            if freq[c] == 0:
                missing -= 1
            freq[c] += 1
        if missing == 0:
            return ClassifierHistogram(freq, row)
    raise ValueError("ranked list does not cover every classifier in the pool")


def spin(frequency, rng, size=None):
    """Single roulette spins with probability proportional to ``frequency``."""
    p = np.asarray(frequency, dtype=float)
    return rng.choice(p.size, size=size, p=p / p.sum())


def roulette_population(hist: ClassifierHistogram, pop_size: int, pool_size: int, seed: int) -> np.ndarray:
    """Per individual, draw k uniform in [1, pool_size] and collect k distinct classifiers.

    Re-spinning on duplicates equals sampling without replacement with
    weights renormalised over the remaining classifiers. That process is
    drawn in one pass as an exponential race: each classifier gets an
    Exp(rate=frequency) arrival time and the k earliest arrivals win.
    """
    w = np.asarray(hist.frequency, dtype=float)
    if w.size != pool_size or np.any(w < 1):
        raise ValueError("histogram must give every classifier a frequency >= 1")
    rng = derive_rng(seed, "roulette-population")
    sizes = rng.integers(1, pool_size + 1, size=pop_size)
    arrival = rng.exponential(size=(pop_size, pool_size)) / w[None, :]
    ranks = np.argsort(arrival, axis=1, kind="stable")
    masks = np.zeros((pop_size, pool_size), dtype=bool)
    masks[np.arange(pop_size)[:, None], ranks] = np.arange(pool_size)[None, :] < sizes[:, None]
    return masks


@dataclass(frozen=True)
class TuningResult:
    population: np.ndarray
    ranked: RankedPairList
    histogram: ClassifierHistogram


def tuning_population(
    table: PairDiversityTable,
    accuracies,
    pop_size: int,
    seed: int,
    alpha: float = 0.5,
    rescale: bool = True,
) -> TuningResult:
    """Full tuning pipeline on a validation-1 pair table and member accuracies.

    With ``rescale`` the aggregated diversity (range [1, 32]) is min-max
    scaled over all pairs before it is mixed with the pair error.
    """
    accuracies = np.asarray(accuracies, dtype=float)
    n = table.size
    i, j = table.pairs()
    score_dc = aggregate_scores(table.oriented_stack())
    if rescale:
        score_dc = minmax(score_dc)
    pair_error = 1.0 - 0.5 * (accuracies[i] + accuracies[j])
    ranked = rank_pairs(score_dc, pair_error, alpha, (i, j))
    hist = build_histogram(ranked, n)
    return TuningResult(roulette_population(hist, pop_size, n, seed), ranked, hist)

"""Wilcoxon signed-rank test and win/tie/loss tabulation for method comparisons."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EXACT_MAX_N = 25


@dataclass(frozen=True)
class PairedSample:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.shape != b.shape or a.ndim != 1 or a.size < 1:
            raise ValueError("paired samples must be equal-length 1-D vectors with at least one entry")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # sum of ranks of positive differences (a - b > 0)
    p_value: float
    n: int
    method: str


def average_ranks(values) -> np.ndarray:
    """1-based ranks with ties sharing their mean rank."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    sorted_vals = values[order]
    start = 0
    while start < values.size:
        stop = start
        while stop + 1 < values.size and sorted_vals[stop + 1] == sorted_vals[start]:
            stop += 1
        ranks[order[start : stop + 1]] = 0.5 * (start + stop) + 1.0
        start = stop + 1
    return ranks


def _exact_two_sided(doubled_ranks: np.ndarray, w_plus_doubled: int) -> float:
    """P-value from the exact null law of the positive rank sum given the tie pattern.

    Ranks are doubled so half-integer mid-ranks become integers; the law is
    built by a subset-sum count over all 2^n sign assignments.
    """
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=object)
    counts[0] = 1
    for r in doubled_ranks.astype(int).tolist():
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    n_assign = 2 ** doubled_ranks.size
    lower = sum(counts[: w_plus_doubled + 1])
    upper = sum(counts[w_plus_doubled:])
    return min(1.0, 2.0 * min(lower, upper) / n_assign)


def _normal_two_sided(ranks: np.ndarray, w_plus: float, continuity: bool = False) -> float:
    n = ranks.size
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts**3 - tie_counts) / 48.0
    if var <= 0:
        return 1.0
    z = max(abs(w_plus - mean) - (0.5 if continuity else 0.0), 0.0) / math.sqrt(var)
    return min(1.0, math.erfc(z / math.sqrt(2.0)))


def wilcoxon_signed_rank(sample: PairedSample, method: str = "auto", continuity: bool = False) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test on ``a - b``.

    Zero differences are dropped and tied magnitudes get average ranks. The
    exact null law is used for n <= 25 after dropping (``method="auto"``),
    otherwise a tie-corrected normal approximation (continuity correction
    off unless requested).
    """
    # rounding keeps float noise (96.6 - 96.5 vs 88.3 - 88.2) from splitting tied ranks
    diff = np.round(sample.a - sample.b, 10)
    diff = diff[diff != 0]
    n = diff.size
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0, "degenerate")
    ranks = average_ranks(np.abs(diff))
    w_plus = float(ranks[diff > 0].sum())
    use_exact = method == "exact" or (method == "auto" and n <= EXACT_MAX_N)
    if method not in ("auto", "exact", "normal"):
        raise ValueError(f"unknown method {method!r}")
    if use_exact:
        p = _exact_two_sided(np.rint(2 * ranks), int(round(2 * w_plus)))
        return WilcoxonResult(w_plus, float(p), n, "exact")
    return WilcoxonResult(w_plus, _normal_two_sided(ranks, w_plus, continuity), n, "normal")


def win_tie_loss(results: dict, tie_epsilon: float = 0.05) -> dict:
    """Per-method (wins, ties, losses) over datasets.

    ``results`` maps method -> sequence of per-dataset accuracies, all in the
    same units as ``tie_epsilon``. On each dataset, methods within
    ``tie_epsilon`` of the best share a tie; a lone best method wins.
    """
    methods = list(results)
    table = np.array([np.asarray(results[m], dtype=float) for m in methods])
    if table.ndim != 2:
        raise ValueError("every method needs a value for every dataset")
    counts = {m: [0, 0, 0] for m in methods}
    for col in table.T:
        top = np.flatnonzero(col >= col.max() - tie_epsilon)
        for r, m in enumerate(methods):
            if r not in top:
                counts[m][2] += 1
            elif top.size == 1:
                counts[m][0] += 1
            else:
                counts[m][1] += 1
    return {m: tuple(v) for m, v in counts.items()}

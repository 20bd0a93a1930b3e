"""Pairwise diversity measures oriented so that a lower score means a more diverse pair.

The five measures are computed from the hit/miss fractions (a, b, c, d) of a
classifier pair. Each raw value is mapped onto [0, 1] with low = diverse, and
the five oriented values are averaged into a combined pair score ``d_c``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .prediction_store import ContingencyFractions, LabelMatrix, pairwise_fractions


class MeasureKind(str, Enum):
    COR = "COR"
    DFM = "DFM"
    DM = "DM"
    IA = "IA"
    QSTAT = "QSTAT"


MEASURES = tuple(MeasureKind)

# attainable raw range per measure; 2(ac - bd) / (...) reaches +-2 (e.g. b = d = 0 gives 2)
RAW_RANGE = {
    MeasureKind.COR: (-1.0, 1.0),
    MeasureKind.DFM: (0.0, 1.0),
    MeasureKind.DM: (0.0, 1.0),
    MeasureKind.IA: (-2.0, 2.0),
    MeasureKind.QSTAT: (-1.0, 1.0),
}


def _safe_div(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den != 0)
    return out


def raw_measures(a, b, c, d) -> dict:
    """All five raw measures, elementwise over arrays of fractions.

    Zero denominators yield 0 for COR, IA and QSTAT.
    """
    a, b, c, d = (np.asarray(v, dtype=float) for v in (a, b, c, d))
    ad_bc = a * d - b * c
    return {
        MeasureKind.COR: _safe_div(ad_bc, np.sqrt((a + b) * (c + d) * (a + c) * (b + d))),
        MeasureKind.DFM: d + 0.0,
        MeasureKind.DM: _safe_div(b + c, a + b + c + d),
        MeasureKind.IA: _safe_div(2.0 * (a * c - b * d), (a + b) * (c + d) + (a + c) * (b + d)),
        MeasureKind.QSTAT: _safe_div(ad_bc, a * d + b * c),
    }


def measure(kind: MeasureKind, ct: ContingencyFractions) -> float:
    return float(raw_measures(ct.a, ct.b, ct.c, ct.d)[MeasureKind(kind)])


def orient_normalize(kind: MeasureKind, raw):
    """Map a raw score onto [0, 1] so that lower means more diverse."""
    kind = MeasureKind(kind)
    raw = np.asarray(raw, dtype=float)
    lo, hi = RAW_RANGE[kind]
    if np.any(raw < lo - 1e-9) or np.any(raw > hi + 1e-9):
        raise ValueError(f"{kind.value} score outside [{lo}, {hi}]")
    if kind is MeasureKind.DM:
        out = 1.0 - raw
    elif kind is MeasureKind.DFM:
        out = raw + 0.0
    else:
        out = (raw - lo) / (hi - lo)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def pair_combined(oriented) -> float:
    oriented = np.asarray(oriented, dtype=float)
    if oriented.shape[-1] != len(MEASURES):
        raise ValueError(f"expected {len(MEASURES)} oriented scores")
    return oriented.mean(axis=-1)


@dataclass(frozen=True, eq=False)
class PairDiversityTable:
    """Symmetric |C| x |C| arrays of fractions, raw and oriented scores, and ``d_c``.

    Diagonal entries are meaningless and set to zero in ``combined``.
    """

    fractions: tuple
    raw: dict
    oriented: dict
    combined: np.ndarray

    @property
    def size(self) -> int:
        return self.combined.shape[0]

    @classmethod
    def from_label_matrix(cls, lm: LabelMatrix) -> "PairDiversityTable":
        a, b, c, d = pairwise_fractions(lm)
        raw = raw_measures(a, b, c, d)
        oriented = {k: orient_normalize(k, raw[k]) for k in MEASURES}
        # interrater agreement is not symmetric in (b, c), so the i < j
        # orientation defines each pair and is mirrored below the diagonal
        upper = np.triu(np.mean([oriented[k] for k in MEASURES], axis=0), k=1)
        return cls((a, b, c, d), raw, oriented, upper + upper.T)

    @classmethod
    def from_combined(cls, combined) -> "PairDiversityTable":
        """Table carrying only ``d_c`` values, e.g. hand-built scores."""
        combined = np.array(combined, dtype=float)
        if combined.ndim != 2 or combined.shape[0] != combined.shape[1] or not np.allclose(combined, combined.T):
            raise ValueError("combined scores must form a symmetric square matrix")
        np.fill_diagonal(combined, 0.0)
        return cls((), {}, {}, combined)

    def pairs(self):
        """Upper-triangle index arrays (i < j) in lexicographic order."""
        return np.triu_indices(self.size, k=1)

    def oriented_stack(self) -> np.ndarray:
        """(n_pairs, 5) oriented scores in ``MEASURES`` order over :meth:`pairs`."""
        i, j = self.pairs()
        return np.stack([self.oriented[k][i, j] for k in MEASURES], axis=1)

    def to_csv(self, path) -> None:
        i_idx, j_idx = self.pairs()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["i", "j", "a", "b", "c", "d"]
                + [f"raw_{k.value}" for k in MEASURES]
                + [f"oriented_{k.value}" for k in MEASURES]
                + ["d_c"]
            )
            for i, j in zip(i_idx.tolist(), j_idx.tolist()):
                w.writerow(
                    [i, j]
                    + [repr(float(f[i, j])) for f in self.fractions]
                    + [repr(float(self.raw[k][i, j])) for k in MEASURES]
                    + [repr(float(self.oriented[k][i, j])) for k in MEASURES]
                    + [repr(float(self.combined[i, j]))]
                )


def ensemble_diversity(mask, table: PairDiversityTable, normalization: str = "pairs"):
    """Mean combined score ``d_c`` over the active pairs of one or many masks.

    ``normalization="pairs"`` divides the pair sum by the number of active
    pairs, keeping the result in [0, 1]. ``"printed"`` divides by the number
    of active members instead. Masks with fewer than two members score 1.0.
    """
    masks = np.atleast_2d(np.asarray(mask, dtype=float))
    k = masks.sum(axis=1)
    pair_sum = 0.5 * np.sum((masks @ table.combined) * masks, axis=1)
    if normalization == "pairs":
        denom = k * (k - 1) / 2.0
    elif normalization == "printed":
        denom = k
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    out = np.ones_like(k)
    ok = k >= 2
    out[ok] = pair_sum[ok] / denom[ok]
    return float(out[0]) if np.ndim(mask) == 1 else out

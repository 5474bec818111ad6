"""Supervised discretization and information-gain relevance ranking.

Features are discretized per column with recursive entropy-minimizing binary
splits accepted under the minimum-description-length stop rule, then scored
with base-2 information gain computed from the bin x class contingency
table. Features whose gain is zero (including "no accepted cuts") are not
relevant.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError
from .features import FeatureMatrix


def entropy(counts: Sequence[float] | np.ndarray) -> float:
    """Shannon entropy in bits of a count vector; 0*log(0) = 0."""
    c = np.asarray(counts, dtype=np.float64)
    if c.ndim != 1 or c.size == 0:
        raise DataError("entropy expects a non-empty 1-D count vector")
    if (c < 0).any():
        raise DataError("entropy counts must be non-negative")
    total = c.sum()
    if total <= 0:
        raise DataError("entropy counts must not all be zero")
    p = c[c > 0] / total
    return float(-(p * np.log2(p)).sum())


def _row_entropies(table: np.ndarray) -> np.ndarray:
    """Entropy in bits of each row of a counts matrix (empty rows -> 0)."""
    totals = table.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(totals > 0, table / np.where(totals > 0, totals, 1), 0.0)
        logs = np.where(p > 0, np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -(p * logs).sum(axis=1)


@dataclass(eq=False)
class ContingencyTable:
    """Bin x class counts."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2:
            raise DataError("contingency table must be 2-D (bins x classes)")
        if self.counts.shape[0] < 1 or self.counts.shape[1] < 2:
            raise DataError("contingency table needs >= 1 bin and >= 2 classes")
        if (self.counts < 0).any():
            raise DataError("contingency table counts must be non-negative")
        if self.counts.sum() <= 0:
            raise DataError("contingency table must contain at least one sample")

    @classmethod
    def from_assignments(cls, bins: Sequence[int], labels: Sequence) -> "ContingencyTable":
        bins = np.asarray(bins, dtype=np.int64)
        classes = sorted(set(labels))
        class_index = {c: j for j, c in enumerate(classes)}
        n_bins = int(bins.max()) + 1 if bins.size else 1
        counts = np.zeros((n_bins, max(2, len(classes))), dtype=np.int64)
        for b, lab in zip(bins, labels):
            counts[b, class_index[lab]] += 1
        return cls(counts)


def information_gain_binned(table: ContingencyTable) -> float:
    """H(class) - sum_b p(b) H(class | b), in bits."""
    counts = table.counts.astype(np.float64)
    n = counts.sum()
    class_totals = counts.sum(axis=0)
    h_class = entropy(class_totals)
    bin_totals = counts.sum(axis=1)
    h_cond = float((bin_totals / n * _row_entropies(counts)).sum())
    gain = h_class - h_cond
    # clamp float dust so the [0, H] contract holds exactly at the edges
    return min(max(gain, 0.0), h_class)


def _mdlp_recurse(v: np.ndarray, cum: np.ndarray, lo: int, hi: int, cuts: list[float]) -> None:
    """Accept the best entropy split of v[lo:hi] if it clears the MDL bar."""
    n = hi - lo
    if n < 2:
        return
    node_counts = cum[hi] - cum[lo]
    h_node = _row_entropies(node_counts[None, :])[0]
    if h_node == 0.0:
        return

    # candidate boundaries: positions where the value changes, skipping
    # boundaries between two groups that are pure in the same class
    seg = v[lo:hi]
    change = np.nonzero(seg[1:] != seg[:-1])[0] + lo + 1  # absolute positions
    if change.size == 0:
        return
    group_edges = np.concatenate(([lo], change, [hi]))
    group_counts = cum[group_edges[1:]] - cum[group_edges[:-1]]
    group_pure_class = np.where(
        (group_counts > 0).sum(axis=1) == 1, group_counts.argmax(axis=1), -1
    )
    left_pure = group_pure_class[:-1]
    right_pure = group_pure_class[1:]
    keep = ~((left_pure >= 0) & (left_pure == right_pure))
    positions = change[keep]
    if positions.size == 0:
        return

    left = cum[positions] - cum[lo]
    right = node_counts - left
    nl = left.sum(axis=1).astype(np.float64)
    nr = right.sum(axis=1).astype(np.float64)
    h_left = _row_entropies(left)
    h_right = _row_entropies(right)
    gains = h_node - (nl * h_left + nr * h_right) / n
    best = int(np.argmax(gains))  # ties resolve to the smallest cut position
    gain = float(gains[best])

    k_node = int((node_counts > 0).sum())
    k_left = int((left[best] > 0).sum())
    k_right = int((right[best] > 0).sum())
    delta = np.log2(3.0**k_node - 2.0) - (
        k_node * h_node - k_left * h_left[best] - k_right * h_right[best]
    )
    threshold = (np.log2(n - 1.0) + delta) / n
    if gain <= threshold:
        return

    pos = int(positions[best])
    cuts.append(float((v[pos - 1] + v[pos]) / 2.0))
    _mdlp_recurse(v, cum, lo, pos, cuts)
    _mdlp_recurse(v, cum, pos, hi, cuts)


def discretize_mdlp(values: Sequence[float] | np.ndarray, labels: Sequence) -> list[float]:
    """Cut points from recursive entropy splits under the MDL stop rule.

    Candidate cuts are midpoints between consecutive distinct values at class
    boundaries. Constant columns, pure label sets, and splits that fail the
    MDL criterion produce no cuts.
    """
    v = np.asarray(values, dtype=np.float64)
    labs = list(labels)
    if v.ndim != 1 or v.size != len(labs):
        raise DataError("values and labels must be 1-D and equally long")
    if v.size < 2:
        raise DataError("discretization needs at least two samples")
    if not np.isfinite(v).all():
        raise DataError("values must be finite")

    classes = sorted(set(labs))
    class_index = {c: j for j, c in enumerate(classes)}
    y = np.array([class_index[lab] for lab in labs], dtype=np.int64)
    order = np.argsort(v, kind="stable")
    v_sorted = v[order]
    y_sorted = y[order]

    one_hot = np.zeros((v.size, len(classes)), dtype=np.int64)
    one_hot[np.arange(v.size), y_sorted] = 1
    cum = np.vstack([np.zeros((1, len(classes)), dtype=np.int64), np.cumsum(one_hot, axis=0)])

    cuts: list[float] = []
    _mdlp_recurse(v_sorted, cum, 0, v.size, cuts)
    return sorted(cuts)


@dataclass(frozen=True)
class RelevanceRanking:
    """Features with positive information gain, most relevant first."""

    entries: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        for (n0, g0), (n1, g1) in zip(self.entries, self.entries[1:]):
            if g1 > g0 or (g1 == g0 and n1 < n0):
                raise DataError("ranking must be ordered by descending gain, then name")

    def names(self) -> list[str]:
        return [name for name, _ in self.entries]

    def to_dicts(self) -> list[dict]:
        return [{"feature": name, "gain_bits": gain} for name, gain in self.entries]


def rank_relevant(m: FeatureMatrix, labels: Mapping[str, str]) -> RelevanceRanking:
    """Rank features by information gain after per-feature MDLP discretization.

    Args:
        m: feature matrix whose ids all carry a label.
        labels: map conversation id -> class label.

    Returns:
        Ranking of features with gain > 0, descending, name-ascending on ties.
        Features whose discretization accepts no cuts are excluded.
    """
    missing = [conv_id for conv_id in m.ids if conv_id not in labels]
    if missing:
        raise DataError(f"label/id mismatch: no labels for ids {missing[:5]}")
    y = [labels[conv_id] for conv_id in m.ids]
    entries: list[tuple[str, float]] = []
    values = m.values.astype(np.float64)
    for j, name in enumerate(m.feature_names):
        col = values[:, j]
        cuts = discretize_mdlp(col, y)
        if not cuts:
            continue
        bins = np.searchsorted(np.asarray(cuts), col, side="left")
        gain = information_gain_binned(ContingencyTable.from_assignments(bins, y))
        if gain > 0:
            entries.append((name, gain))
    entries.sort(key=lambda e: (-e[1], e[0]))
    return RelevanceRanking(entries=tuple(entries))

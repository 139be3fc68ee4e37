"""Prediction and ranking metrics, paired significance tests and neighbourhood statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .baseline import Neighbourhood
from .dataset import RatingsTable, TargetSplit
from .matching import DEFAULT_OVERLAP_THRESHOLD, MatchIndex, significance_weighted_match

DEFAULT_EXACT_CUTOFF = 20


def mae(pairs: Sequence[tuple[float, float]]) -> float:
    if not pairs:
        raise ValueError("mae of no pairs")
    return math.fsum(abs(p - a) for p, a in pairs) / len(pairs)


@dataclass(frozen=True)
class TauResult:
    tau: float
    n_overlap: int
    n_discordant: int


def _count_inversions(seq: list[float]) -> tuple[list[float], int]:
    # pairs i < j with seq[i] > seq[j]; equal values are not inversions
    if len(seq) <= 1:
        return seq, 0
    mid = len(seq) // 2
    left, a = _count_inversions(seq[:mid])
    right, b = _count_inversions(seq[mid:])
    merged = []
    count = a + b
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            merged.append(right[j])
            count += len(left) - i
            j += 1
    merged.extend(left[i:])
    merged.extend(right[j:])
    return merged, count


def actual_ranks(items: Sequence[int], actual_votes: Mapping[int, float]) -> list[float]:
    """Rank of each item by actual vote, best first (1 = highest vote); ties share the mean rank."""
    votes = np.array([actual_votes[i] for i in items], dtype=float)
    return rankdata(-votes, method="average").tolist()


def kendall_tau(recommended_order: Sequence[int], actual_votes: Mapping[int, float]) -> TauResult:
    """Discordance-count Kendall's Tau between a recommendation and actual votes.

    A pair is discordant when the item recommended earlier has a strictly
    worse actual rank; tied actual votes are never discordant.
    """
    n = len(recommended_order)
    if n < 2:
        raise ValueError("kendall_tau needs at least 2 items")
    missing = [i for i in recommended_order if i not in actual_votes]
    if missing:
        raise ValueError(f"no actual vote for items {missing}")
    ranks = actual_ranks(recommended_order, actual_votes)
    _, nd = _count_inversions(ranks)
    return TauResult(1 - 4 * nd / (n * (n - 1)), n, nd)


@dataclass(frozen=True)
class PairedTestResult:
    """Wilcoxon matched-pairs signed-rank summary.

    ``rank_sum_first`` collects the ranks of pairs where the first value is
    larger. ``p_upper_bound`` is the two-sided p-value, or None when every
    pair was tied and no test is possible.
    """

    n_unequal: int
    rank_sum_first: float
    rank_sum_second: float
    p_upper_bound: float | None
    exact: bool = True

    @property
    def testable(self) -> bool:
        return self.p_upper_bound is not None


def _exact_lower_tail(doubled_ranks: Sequence[int], bound: int) -> float:
    """P(sum of a uniformly random subset of ranks <= bound), ranks doubled to integers."""
    total = sum(doubled_ranks)
    counts = [0] * (total + 1)
    counts[0] = 1
    reach = 0
    for r in doubled_ranks:
        reach += r
        for s in range(reach, r - 1, -1):
            counts[s] += counts[s - r]
    below = sum(counts[: bound + 1])
    return below / 2 ** len(doubled_ranks)


def wilcoxon_signed_rank(
    pairs: Sequence[tuple[float, float]],
    exact_cutoff: int = DEFAULT_EXACT_CUTOFF,
    zero_tol: float = 0.0,
) -> PairedTestResult:
    """Two-sided Wilcoxon signed-rank test over ``(first, second)`` pairs.

    Differences with ``|d| <= zero_tol`` are dropped. Absolute differences
    get average ranks on ties. Up to ``exact_cutoff`` unequal pairs the null
    distribution is enumerated exactly; beyond it a continuity-corrected
    normal approximation with tie correction is used.
    """
    if not pairs:
        raise ValueError("wilcoxon_signed_rank of no pairs")
    d = np.array([a - b for a, b in pairs], dtype=float)
    d = d[np.abs(d) > zero_tol]
    n = len(d)
    if n == 0:
        return PairedTestResult(0, 0.0, 0.0, None)
    ranks = rankdata(np.abs(d), method="average")
    w_first = float(ranks[d > 0].sum())
    w_second = float(ranks[d < 0].sum())
    smaller = min(w_first, w_second)

    if n <= exact_cutoff:
        doubled = [int(round(2 * r)) for r in ranks]
        p = 2 * _exact_lower_tail(doubled, int(round(2 * smaller)))
        return PairedTestResult(n, w_first, w_second, min(1.0, p), True)

    mean = n * (n + 1) / 4
    _, tie_counts = np.unique(np.abs(d), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24 - float(np.sum(tie_counts**3 - tie_counts)) / 48
    z = (abs(w_first - mean) - 0.5) / math.sqrt(var) if var > 0 else 0.0
    p = math.erfc(max(z, 0.0) / math.sqrt(2))
    return PairedTestResult(n, w_first, w_second, min(1.0, p), False)


@dataclass(frozen=True)
class NeighbourhoodStats:
    size: int
    overlap: int | None
    mean_target_correlation: float | None
    mean_inter_neighbour_correlation: float | None


def neighbourhood_stats(
    nb: Neighbourhood,
    target_split: TargetSplit,
    table: RatingsTable,
    overlap_threshold: int = DEFAULT_OVERLAP_THRESHOLD,
    index: MatchIndex | None = None,
) -> NeighbourhoodStats:
    """Size, overlap, mean match to the target, and mean pairwise match among members.

    Overlap counts hidden target votes on items some member has voted on.
    Undefined fields (empty neighbourhood, or fewer than two members for the
    pairwise mean) are None.
    """
    users = list(nb.users)
    size = len(users)
    if size == 0:
        return NeighbourhoodStats(0, None, None, None)

    covered = set()
    for u in users:
        covered.update(table.profile(u))
    overlap = sum(1 for item in target_split.hidden_votes if item in covered)

    antigen = target_split.visible_profile
    if index is not None:
        weighted = index.scores(antigen)[2]
        target_corr = [float(weighted[index.position(u)]) for u in users]
    else:
        target_corr = [significance_weighted_match(antigen, table.profile(u), overlap_threshold).weighted for u in users]
    mean_target = math.fsum(target_corr) / size

    mean_inter = None
    if size >= 2:
        if index is not None:
            sub = index.submatrix(users)
            iu = np.triu_indices(size, k=1)
            pair_values = sub[iu].tolist()
        else:
            pair_values = [
                significance_weighted_match(table.profile(users[i]), table.profile(users[j]), overlap_threshold).weighted
                for i in range(size)
                for j in range(i + 1, size)
            ]
        mean_inter = math.fsum(pair_values) / len(pair_values)

    return NeighbourhoodStats(size, overlap, mean_target, mean_inter)


def common_unique_counts(nb_a: Neighbourhood, nb_b: Neighbourhood) -> tuple[int, int, int]:
    a, b = set(nb_a.users), set(nb_b.users)
    return len(a & b), len(a - b), len(b - a)

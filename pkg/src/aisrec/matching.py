"""Pearson correlation between vote profiles and overlap significance weighting.

``pearson`` and ``significance_weighted_match`` are the scalar definitions.
``MatchIndex`` computes the same quantities for one profile against every
user of a table at once; it is what the experiment code uses.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass

import numpy as np

from .dataset import Profile, RatingsTable

DEFAULT_OVERLAP_THRESHOLD = 50


@dataclass(frozen=True)
class MatchScore:
    raw_pearson: float
    overlap: int
    weighted: float


@dataclass(frozen=True)
class MatchMatrix:
    users: tuple[int, ...]
    entries: np.ndarray


def pearson(a: Profile, b: Profile) -> tuple[float, int]:
    """Pearson correlation over co-voted items, with the overlap count.

    Returns 0 when fewer than two items are shared or when either side is
    constant on the shared items.
    """
    if len(a) > len(b):
        common = [i for i in b if i in a]
    else:
        common = [i for i in a if i in b]
    n = len(common)
    if n < 2:
        return 0.0, n
    xs = [a[i] for i in common]
    ys = [b[i] for i in common]
    if min(xs) == max(xs) or min(ys) == max(ys):
        return 0.0, n
    # exact rational sums: a zero covariance comes out as exactly zero
    fx = [Fraction(x) for x in xs]
    fy = [Fraction(y) for y in ys]
    sx, sy = sum(fx), sum(fy)
    cov = float(n * sum(p * q for p, q in zip(fx, fy)) - sx * sy)
    vx = float(n * sum(p * p for p in fx) - sx * sx)
    vy = float(n * sum(q * q for q in fy) - sy * sy)
    r = cov / math.sqrt(vx * vy)
    return max(-1.0, min(1.0, r)), n


def overlap_weight(overlap, overlap_threshold: int):
    return np.minimum(overlap, overlap_threshold) / overlap_threshold


def significance_weighted_match(a: Profile, b: Profile, overlap_threshold: int = DEFAULT_OVERLAP_THRESHOLD) -> MatchScore:
    if overlap_threshold < 1:
        raise ValueError("overlap_threshold must be at least 1")
    raw, n = pearson(a, b)
    weighted = raw * (min(n, overlap_threshold) / overlap_threshold)
    return MatchScore(raw, n, weighted)


def pairwise_matrix(users, table: RatingsTable, overlap_threshold: int = DEFAULT_OVERLAP_THRESHOLD) -> MatchMatrix:
    users = tuple(users)
    for u in users:
        if u not in table:
            raise KeyError(f"unknown user {u}")
    n = len(users)
    entries = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            w = significance_weighted_match(table.profile(users[i]), table.profile(users[j]), overlap_threshold).weighted
            entries[i, j] = entries[j, i] = w
    return MatchMatrix(users, entries)


class MatchIndex:
    """Vectorised weighted matches against all users of one table.

    Sums are formed as ``n * sum(xy) - sum(x) * sum(y)`` so that votes on an
    integer or dyadic grid give exact zero-variance detection. Per-user rows
    are cached; the table must not change underneath the index.
    """

    def __init__(self, table: RatingsTable, overlap_threshold: int = DEFAULT_OVERLAP_THRESHOLD):
        if overlap_threshold < 1:
            raise ValueError("overlap_threshold must be at least 1")
        self.table = table
        self.overlap_threshold = overlap_threshold
        users, items, votes, mask = table.dense
        self.users = users
        self._pos = {int(u): k for k, u in enumerate(users)}
        self._item_col = {int(i): k for k, i in enumerate(items)}
        self._m = mask.astype(float)
        self._v = votes
        self._v2 = votes * votes
        self._rows: dict[int, np.ndarray] = {}

    def position(self, user: int) -> int:
        try:
            return self._pos[user]
        except KeyError:
            raise KeyError(f"unknown user {user}") from None

    def scores(self, profile: Profile) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(raw, overlap, weighted) of ``profile`` against every table user."""
        pv = np.zeros(self._v.shape[1])
        pm = np.zeros(self._v.shape[1])
        for item, vote in profile.items():
            col = self._item_col.get(item)
            if col is not None:
                pv[col] = vote
                pm[col] = 1.0
        n = self._m @ pm
        sa = self._m @ pv
        saa = self._m @ (pv * pv)
        sb = self._v @ pm
        sbb = self._v2 @ pm
        sab = self._v @ pv
        cov = n * sab - sa * sb
        va = n * saa - sa * sa
        vb = n * sbb - sb * sb
        # guards the non-grid case where cancellation leaves a tiny residue
        va = np.where(va <= 1e-12 * n * saa, 0.0, va)
        vb = np.where(vb <= 1e-12 * n * sbb, 0.0, vb)
        ok = (n >= 2) & (va > 0) & (vb > 0)
        raw = np.zeros_like(n)
        raw[ok] = cov[ok] / np.sqrt(va[ok] * vb[ok])
        raw = np.clip(raw, -1.0, 1.0)
        overlap = n.astype(np.int64)
        weighted = raw * overlap_weight(overlap, self.overlap_threshold)
        return raw, overlap, weighted

    def user_row(self, user: int) -> np.ndarray:
        """Weighted matches of ``user`` against every table user (self entry 0)."""
        row = self._rows.get(user)
        if row is None:
            row = self.scores(self.table.profile(user))[2]
            row[self.position(user)] = 0.0
            row.setflags(write=False)
            self._rows[user] = row
        return row

    def match(self, a: int, b: int) -> float:
        if a == b:
            return 0.0
        return float(self.user_row(a)[self.position(b)])

    def submatrix(self, users) -> np.ndarray:
        idx = [self.position(u) for u in users]
        out = np.array([self.user_row(u)[idx] for u in users]).reshape(len(idx), len(idx))
        # rows are computed independently; average to keep exact symmetry
        return (out + out.T) / 2

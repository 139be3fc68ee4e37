"""Neighbourhood type and the Simple Pearson top-N neighbourhood."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .dataset import Profile, RatingsTable
from .matching import DEFAULT_OVERLAP_THRESHOLD, MatchIndex, significance_weighted_match


class Provenance(str, enum.Enum):
    AIS = "AIS"
    SIMPLE_PEARSON = "SP"
    FIXED = "Fixed"
    RANDOMIZED = "RandomizedConcentration"


@dataclass(frozen=True)
class Neighbourhood:
    members: tuple[tuple[int, float], ...]
    provenance: Provenance

    def __post_init__(self):
        users = [u for u, _ in self.members]
        if len(set(users)) != len(users):
            raise ValueError("duplicate neighbour")
        if self.provenance is Provenance.SIMPLE_PEARSON and any(w == 0 for _, w in self.members):
            raise ValueError("Simple Pearson neighbours must have nonzero weight")

    @property
    def users(self) -> tuple[int, ...]:
        return tuple(u for u, _ in self.members)

    @property
    def weights(self) -> dict[int, float]:
        return dict(self.members)

    def __len__(self):
        return len(self.members)

    def scaled(self, factor: float) -> Neighbourhood:
        return Neighbourhood(tuple((u, w * factor) for u, w in self.members), self.provenance)


def simple_pearson_neighbourhood(
    table: RatingsTable,
    antigen: Profile,
    target: int,
    n: int = 100,
    overlap_threshold: int = DEFAULT_OVERLAP_THRESHOLD,
    index: MatchIndex | None = None,
) -> Neighbourhood:
    """Top ``n`` users by signed weighted match; fewer if fewer are nonzero.

    Ties are broken by ascending user id.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if index is not None:
        weighted = index.scores(antigen)[2]
        scored = [(float(w), int(u)) for u, w in zip(index.users, weighted) if u != target and w != 0]
    else:
        scored = []
        for u in table.users:
            if u == target:
                continue
            w = significance_weighted_match(antigen, table.profile(u), overlap_threshold).weighted
            if w != 0:
                scored.append((w, u))
    scored.sort(key=lambda t: (-t[0], t[1]))
    return Neighbourhood(tuple((u, w) for w, u in scored[:n]), Provenance.SIMPLE_PEARSON)


def correlation_weights(
    members,
    antigen: Profile,
    table: RatingsTable,
    overlap_threshold: int = DEFAULT_OVERLAP_THRESHOLD,
    index: MatchIndex | None = None,
) -> Neighbourhood:
    """Weight a fixed membership by weighted match alone (the SP predictor)."""
    members = list(members)
    if index is not None:
        weighted = index.scores(antigen)[2]
        ws = [float(weighted[index.position(u)]) for u in members]
    else:
        ws = [significance_weighted_match(antigen, table.profile(u), overlap_threshold).weighted for u in members]
    return Neighbourhood(tuple(zip(members, ws)), Provenance.FIXED)

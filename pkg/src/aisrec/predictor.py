"""Neighbourhood predictions and ranked recommendations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .baseline import Neighbourhood
from .dataset import Profile, RatingsTable, VoteScale


@dataclass(frozen=True)
class Prediction:
    item: int
    score: float
    contributing_neighbours: int


def default_vote_for(scale: VoteScale) -> float:
    """A slightly-below-neutral vote: midpoint minus a tenth of the range."""
    return scale.midpoint - 0.1 * (scale.max_vote - scale.min_vote)


def predict(
    nb: Neighbourhood,
    table: RatingsTable,
    antigen: Profile,
    item: int,
    default_vote: float | None = None,
) -> Prediction | None:
    """Mean-offset weighted-deviation estimate for one unseen item.

    Neighbours who have not voted on the item are skipped, unless
    ``default_vote`` is given, in which case it stands in for their vote.
    Returns None when nobody contributes or all contributing weights are 0.
    """
    if item in antigen:
        raise ValueError(f"item {item} is already in the antigen profile")
    if not antigen:
        raise ValueError("antigen profile is empty")

    num = []
    den = []
    for user, w in nb.members:
        vote = table.profile(user).get(item)
        if vote is None:
            if default_vote is None:
                continue
            vote = default_vote
        num.append(w * (vote - table.mean_vote(user)))
        den.append(abs(w))
    total = math.fsum(den)
    if not den or total == 0:
        return None
    base = math.fsum(antigen.values()) / len(antigen)
    score = table.scale.clamp(base + math.fsum(num) / total)
    return Prediction(item, score, len(den))


def recommend(
    nb: Neighbourhood,
    table: RatingsTable,
    antigen: Profile,
    candidate_items: Iterable[int],
    default_vote: float | None = None,
) -> list[tuple[int, float]]:
    """Predicted items ordered by score descending, item id ascending on ties."""
    out = []
    for item in candidate_items:
        p = predict(nb, table, antigen, item, default_vote)
        if p is not None:
            out.append((item, p.score))
    out.sort(key=lambda t: (-t[1], t[0]))
    return out

"""Ratings storage, the line-oriented file format, synthetic data and target splits."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import cached_property
from types import MappingProxyType
from typing import IO, Iterable, Mapping

import numpy as np

Profile = Mapping[int, float]


class DataError(ValueError):
    """Raised for malformed or inconsistent ratings data."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class VoteScale:
    min_vote: float = 0.0
    max_vote: float = 5.0
    step: float = 1.0

    def __post_init__(self):
        if not self.min_vote < self.max_vote:
            raise ValueError("min_vote must be below max_vote")
        if self.step < 0:
            raise ValueError("step must be non-negative")
        if self.step > 0:
            k = (self.max_vote - self.min_vote) / self.step
            if abs(k - round(k)) > 1e-9:
                raise ValueError("vote range is not a multiple of step")

    @property
    def midpoint(self) -> float:
        return (self.min_vote + self.max_vote) / 2

    def contains(self, vote: float) -> bool:
        if not (self.min_vote <= vote <= self.max_vote):
            return False
        if self.step > 0:
            k = (vote - self.min_vote) / self.step
            return abs(k - round(k)) <= 1e-9
        return True

    def clamp(self, value: float) -> float:
        return min(max(value, self.min_vote), self.max_vote)

    def quantize(self, values: np.ndarray) -> np.ndarray:
        """Clamp to the scale and snap to the step grid (no-op grid when step is 0)."""
        values = np.clip(values, self.min_vote, self.max_vote)
        if self.step > 0:
            values = self.min_vote + np.round((values - self.min_vote) / self.step) * self.step
            values = np.clip(values, self.min_vote, self.max_vote)
        return values


class RatingsTable:
    """Immutable sparse user x item vote store.

    Votes are held as ``{user: {item: vote}}``. Dense numpy views used by the
    vectorised matching code are built lazily and cached.
    """

    def __init__(self, scale: VoteScale, votes: Mapping[int, Mapping[int, float]] | None = None):
        self.scale = scale
        store: dict[int, Mapping[int, float]] = {}
        for user, profile in (votes or {}).items():
            if not profile:
                continue
            checked = {}
            for item, vote in profile.items():
                vote = float(vote)
                if not scale.contains(vote):
                    raise DataError(f"vote off scale: user {user} item {item} vote {vote}")
                checked[int(item)] = vote
            store[int(user)] = MappingProxyType(checked)
        self._votes = store

    @classmethod
    def from_triples(cls, scale: VoteScale, triples: Iterable[tuple[int, int, float]]) -> RatingsTable:
        votes: dict[int, dict[int, float]] = {}
        for user, item, vote in triples:
            row = votes.setdefault(int(user), {})
            if int(item) in row:
                raise DataError(f"duplicate vote: user {user} item {item}")
            row[int(item)] = vote
        return cls(scale, votes)

    @cached_property
    def users(self) -> tuple[int, ...]:
        return tuple(sorted(self._votes))

    @cached_property
    def items(self) -> tuple[int, ...]:
        return tuple(sorted({i for p in self._votes.values() for i in p}))

    @property
    def n_users(self) -> int:
        return len(self._votes)

    @property
    def n_votes(self) -> int:
        return sum(len(p) for p in self._votes.values())

    def __contains__(self, user: int) -> bool:
        return user in self._votes

    def profile(self, user: int) -> Profile:
        try:
            return self._votes[user]
        except KeyError:
            raise KeyError(f"unknown user {user}") from None

    def mean_vote(self, user: int) -> float:
        return self._user_means[user]

    @cached_property
    def _user_means(self) -> dict[int, float]:
        return {u: math.fsum(p.values()) / len(p) for u, p in self._votes.items()}

    def triples(self) -> Iterable[tuple[int, int, float]]:
        for user in self.users:
            profile = self._votes[user]
            for item in sorted(profile):
                yield user, item, profile[item]

    @cached_property
    def dense(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(user_ids, item_ids, votes, mask); votes are 0 where mask is False."""
        users = np.array(self.users, dtype=np.int64)
        items = np.array(self.items, dtype=np.int64)
        col = {item: j for j, item in enumerate(self.items)}
        votes = np.zeros((len(users), len(items)))
        mask = np.zeros((len(users), len(items)), dtype=bool)
        for i, user in enumerate(self.users):
            for item, vote in self._votes[user].items():
                votes[i, col[item]] = vote
                mask[i, col[item]] = True
        return users, items, votes, mask

    def __eq__(self, other):
        if not isinstance(other, RatingsTable):
            return NotImplemented
        return self.scale == other.scale and {u: dict(p) for u, p in self._votes.items()} == {
            u: dict(p) for u, p in other._votes.items()
        }

    def __repr__(self):
        return f"RatingsTable(users={self.n_users}, votes={self.n_votes}, scale={self.scale})"


def format_vote(vote: float) -> str:
    return str(int(vote)) if float(vote).is_integer() else repr(float(vote))


def parse_ratings(source: IO[bytes] | IO[str] | bytes | str, scale: VoteScale) -> RatingsTable:
    """Parse ``user_id,item_id,vote`` lines; ``#`` lines and blank lines are skipped."""
    if isinstance(source, bytes):
        text = source.decode("utf-8")
        lines = text.splitlines()
    elif isinstance(source, str):
        lines = source.splitlines()
    else:
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        lines = data.splitlines()

    votes: dict[int, dict[int, float]] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 3:
            raise DataError(f"expected 3 fields, got {len(fields)}", lineno)
        try:
            user, item = int(fields[0]), int(fields[1])
        except ValueError:
            raise DataError("non-integer id", lineno) from None
        try:
            vote = float(fields[2])
        except ValueError:
            raise DataError(f"non-numeric vote {fields[2]!r}", lineno) from None
        if not math.isfinite(vote) or not scale.contains(vote):
            raise DataError(f"vote off scale: {fields[2]}", lineno)
        row = votes.setdefault(user, {})
        if item in row:
            raise DataError(f"duplicate vote for user {user} item {item}", lineno)
        row[item] = vote
    return RatingsTable(scale, votes)


def write_ratings(table: RatingsTable, dest: IO[str]) -> None:
    for user, item, vote in table.triples():
        dest.write(f"{user},{item},{format_vote(vote)}\n")


def dumps_ratings(table: RatingsTable) -> str:
    buf = io.StringIO()
    write_ratings(table, buf)
    return buf.getvalue()


def load_ratings(path, scale: VoteScale) -> RatingsTable:
    with open(path, "rb") as f:
        return parse_ratings(f, scale)


def generate_synthetic_clusters(
    n_users: int,
    n_items: int,
    n_clusters: int,
    density: float,
    noise: float,
    scale: VoteScale,
    seed: int,
) -> tuple[RatingsTable, dict[int, int]]:
    """Synthetic ratings with planted taste clusters; also returns user -> cluster."""
    if n_clusters < 1:
        raise ValueError("n_clusters must be at least 1")
    if n_users < n_clusters:
        raise ValueError("n_users must be at least n_clusters")
    if n_items < 1:
        raise ValueError("n_items must be at least 1")
    if not (0 < density <= 1):
        raise ValueError("density must lie in (0, 1]")
    if noise < 0 or not math.isfinite(noise):
        raise ValueError("noise must be non-negative")

    rng = np.random.default_rng(seed)
    latent = rng.uniform(scale.min_vote, scale.max_vote, size=(n_clusters, n_items))
    assignment = rng.permutation(np.arange(n_users) % n_clusters)
    seen = rng.random((n_users, n_items)) < density
    raw = latent[assignment] + noise * rng.standard_normal((n_users, n_items))
    votes = scale.quantize(raw)

    table: dict[int, dict[int, float]] = {}
    for u in range(n_users):
        cols = np.flatnonzero(seen[u])
        if len(cols):
            table[u] = {int(j): float(votes[u, j]) for j in cols}
    clusters = {u: int(assignment[u]) for u in range(n_users)}
    return RatingsTable(scale, table), clusters


def generate_synthetic(
    n_users: int,
    n_items: int,
    n_clusters: int,
    density: float,
    noise: float,
    scale: VoteScale,
    seed: int,
) -> RatingsTable:
    table, _ = generate_synthetic_clusters(n_users, n_items, n_clusters, density, noise, scale, seed)
    return table


@dataclass(frozen=True)
class TargetSplit:
    target_user: int
    visible_profile: Mapping[int, float]
    hidden_votes: Mapping[int, float]


def split_target(table: RatingsTable, target_user: int, visible_fraction: float, seed: int) -> TargetSplit:
    """Hide a seeded random subset of the target's votes.

    ``round(visible_fraction * n)`` votes stay visible (at least one).
    """
    if not (0 < visible_fraction <= 1):
        raise ValueError("visible_fraction must lie in (0, 1]")
    if target_user not in table:
        raise DataError(f"unknown user {target_user}")
    profile = table.profile(target_user)
    if len(profile) < 2:
        raise DataError(f"user {target_user} has fewer than 2 votes")

    items = sorted(profile)
    n_visible = max(1, math.floor(visible_fraction * len(items) + 0.5))
    rng = np.random.default_rng(seed)
    chosen = set(rng.choice(len(items), size=n_visible, replace=False).tolist())
    visible = {items[k]: profile[items[k]] for k in range(len(items)) if k in chosen}
    hidden = {items[k]: profile[items[k]] for k in range(len(items)) if k not in chosen}
    return TargetSplit(target_user, MappingProxyType(visible), MappingProxyType(hidden))

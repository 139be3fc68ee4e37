"""Idiotypic immune network over database users.

Each antibody is a candidate neighbour with a match ``m_i`` to the antigen
(the target's visible votes) and a concentration ``x_i``. One iteration is a
forward Euler step of

    dx_i/dt = k1 m_i x_i y - (k2 / n) sum_{j != i} m_ij x_i x_j - k3 x_i

followed by culling antibodies whose concentration fell below the death
threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .baseline import Neighbourhood, Provenance
from .dataset import Profile, RatingsTable
from .matching import DEFAULT_OVERLAP_THRESHOLD, MatchIndex, significance_weighted_match


@dataclass(frozen=True)
class AisParams:
    k1: float = 0.3
    k2: float = 0.2
    k3: float = 0.01
    capacity: int = 100
    stability_window: int = 10
    init_concentration: float = 1.0
    death_threshold: float = 0.05
    max_concentration: float = 3.0
    step_size: float = 1.0
    clamp_negative_m_ij: bool = False
    # settling after the candidate stream runs dry, and fixed-membership runs
    step_cap: int = 500
    convergence_tol: float = 1e-3

    def __post_init__(self):
        if min(self.k1, self.k2, self.k3) < 0:
            raise ValueError("rate constants must be non-negative")
        if self.capacity < 1:
            raise ValueError("capacity must be at least 1")
        if self.stability_window < 1:
            raise ValueError("stability_window must be at least 1")
        if not (0 < self.death_threshold < self.init_concentration <= self.max_concentration):
            raise ValueError("need 0 < death_threshold < init_concentration <= max_concentration")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.step_cap < 1:
            raise ValueError("step_cap must be at least 1")
        if self.convergence_tol < 0:
            raise ValueError("convergence_tol must be non-negative")

    def with_(self, **changes) -> AisParams:
        return replace(self, **changes)


@dataclass(frozen=True)
class Antibody:
    user: int
    m_i: float
    concentration: float


class ImmuneSystem:
    """Antibody pool for one antigen.

    State is held column-wise: ``users`` (pool order), ``m`` (antigen
    matches), ``x`` (concentrations) and ``matrix`` (antibody-antibody
    matches, zero diagonal). All mutate in place.
    """

    antigen_concentration = 1.0

    def __init__(self, params: AisParams, antigen: Profile, target: int | None = None):
        self.params = params
        self.antigen = antigen
        self.target = target
        self.users: list[int] = []
        self.m = np.zeros(0)
        self.x = np.zeros(0)
        self.matrix = np.zeros((0, 0))
        self.stable_for = 0
        self.reviewers_examined = 0
        self.last_step_quiet = False
        self._antigen_scores: tuple[MatchIndex, np.ndarray] | None = None

    @classmethod
    def from_arrays(cls, params: AisParams, users, m, x, matrix, antigen: Profile | None = None) -> ImmuneSystem:
        """A pool with given matches and concentrations, bypassing the table."""
        ais = cls(params, antigen or {})
        ais.users = list(users)
        ais.m = np.array(m, dtype=float)
        ais.x = np.array(x, dtype=float)
        ais.matrix = np.array(matrix, dtype=float).reshape(len(ais.users), len(ais.users))
        if len(ais.users) > params.capacity:
            raise ValueError("pool larger than capacity")
        if not (len(ais.m) == len(ais.x) == len(ais.users)):
            raise ValueError("users, m and x must have equal length")
        return ais

    def __len__(self):
        return len(self.users)

    @property
    def full(self) -> bool:
        return len(self.users) >= self.params.capacity

    @property
    def pool(self) -> list[Antibody]:
        return [Antibody(u, float(m), float(x)) for u, m, x in zip(self.users, self.m, self.x)]

    def _antigen_match(self, candidate, table, overlap_threshold, index):
        if index is None:
            return significance_weighted_match(self.antigen, table.profile(candidate), overlap_threshold).weighted
        if self._antigen_scores is None or self._antigen_scores[0] is not index:
            self._antigen_scores = (index, index.scores(self.antigen)[2])
        return float(self._antigen_scores[1][index.position(candidate)])

    def add_antibody(
        self,
        candidate: int,
        table: RatingsTable,
        overlap_threshold: int = DEFAULT_OVERLAP_THRESHOLD,
        index: MatchIndex | None = None,
    ) -> ImmuneSystem:
        if self.full:
            raise ValueError("immune system is full")
        if candidate == self.target:
            raise ValueError("the target user cannot be an antibody")
        if candidate in self.users:
            raise ValueError(f"user {candidate} is already an antibody")
        if candidate not in table:
            raise KeyError(f"unknown user {candidate}")

        m_i = self._antigen_match(candidate, table, overlap_threshold, index)
        if index is None:
            profile = table.profile(candidate)
            row = np.array(
                [significance_weighted_match(profile, table.profile(u), overlap_threshold).weighted for u in self.users]
            )
        else:
            row = index.user_row(candidate)[[index.position(u) for u in self.users]] if self.users else np.zeros(0)

        n = len(self.users)
        matrix = np.zeros((n + 1, n + 1))
        matrix[:n, :n] = self.matrix
        matrix[n, :n] = row
        matrix[:n, n] = row
        self.matrix = matrix
        self.users.append(candidate)
        self.m = np.append(self.m, m_i)
        self.x = np.append(self.x, self.params.init_concentration)
        self.reviewers_examined += 1
        self.stable_for = 0
        return self

    def derivative(self) -> np.ndarray:
        """dx/dt for every antibody, from the current concentrations."""
        p = self.params
        n = len(self.users)
        if n == 0:
            return np.zeros(0)
        mij = np.maximum(self.matrix, 0.0) if p.clamp_negative_m_ij else self.matrix
        terms = mij * self.x[:, None] * self.x[None, :]
        # ascending-order accumulation makes each sum independent of pool order;
        # reducing over the outer axis of a C-ordered array adds strictly in sequence
        terms.sort(axis=1)
        suppression = np.ascontiguousarray(terms.T).sum(axis=0)
        y = self.antigen_concentration
        return p.k1 * self.m * self.x * y - p.k2 / n * suppression - p.k3 * self.x

    def iterate(self, remove_dead: bool = True) -> ImmuneSystem:
        if not self.users:
            raise ValueError("cannot iterate an empty immune system")
        p = self.params
        before = self.x
        dx = self.derivative()
        self.x = np.minimum(np.maximum(before + p.step_size * dx, 0.0), p.max_concentration)
        # a step is quiet when every concentration moved by at most
        # convergence_tol of its previous value and nobody died
        quiet = bool((np.abs(self.x - before) <= p.convergence_tol * before).all())
        if remove_dead:
            alive = self.x >= p.death_threshold
            if not alive.all():
                self._keep(alive)
                quiet = False
        self.last_step_quiet = quiet
        if self.full and quiet:
            self.stable_for += 1
        else:
            self.stable_for = 0
        return self

    def _keep(self, alive: np.ndarray) -> None:
        self.users = [u for u, keep in zip(self.users, alive) if keep]
        self.m = self.m[alive]
        self.x = self.x[alive]
        self.matrix = self.matrix[np.ix_(alive, alive)]

    def stabilized(self) -> bool:
        return self.full and self.stable_for >= self.params.stability_window

    def settle(self, remove_dead: bool = True) -> int:
        """Iterate until concentrations stop moving.

        Stops once the largest concentration change stays within
        ``convergence_tol`` (with no deaths) for ``stability_window``
        consecutive steps, when the pool empties, or after ``step_cap``
        steps. Returns the number of steps taken.
        """
        p = self.params
        quiet = 0
        steps = 0
        while self.users and steps < p.step_cap and quiet < p.stability_window:
            self.iterate(remove_dead=remove_dead)
            steps += 1
            quiet = quiet + 1 if self.last_step_quiet else 0
        return steps

    def neighbour_weights(self, provenance: Provenance = Provenance.AIS) -> Neighbourhood:
        return Neighbourhood(
            tuple((u, float(m * x)) for u, m, x in zip(self.users, self.m, self.x)),
            provenance,
        )

    def randomize_concentrations(self, seed: int) -> ImmuneSystem:
        if not self.users:
            raise ValueError("cannot randomise an empty immune system")
        p = self.params
        rng = np.random.default_rng(seed)
        # uniform on (death_threshold, max_concentration]
        span = p.max_concentration - p.death_threshold
        self.x = p.max_concentration - rng.uniform(0.0, span, size=len(self.users))
        return self


def build_neighbourhood(
    table: RatingsTable,
    antigen: Profile,
    params: AisParams,
    candidates: Iterable[int],
    overlap_threshold: int = DEFAULT_OVERLAP_THRESHOLD,
    index: MatchIndex | None = None,
    target: int | None = None,
) -> tuple[Neighbourhood, int]:
    """Grow the immune system from a candidate stream until it stabilises.

    Candidates are added one at a time; whenever the pool is full it is
    iterated until it either stabilises or loses a member. If the stream
    runs out first, the remaining pool is settled so that antibodies too
    weak to survive are culled.
    """
    ais = grow(table, antigen, params, candidates, overlap_threshold, index, target)
    return ais.neighbour_weights(), ais.reviewers_examined


def grow(
    table: RatingsTable,
    antigen: Profile,
    params: AisParams,
    candidates: Iterable[int],
    overlap_threshold: int = DEFAULT_OVERLAP_THRESHOLD,
    index: MatchIndex | None = None,
    target: int | None = None,
) -> ImmuneSystem:
    ais = ImmuneSystem(params, antigen, target)
    for candidate in candidates:
        if ais.stabilized():
            break
        ais.add_antibody(candidate, table, overlap_threshold, index)
        while ais.full and not ais.stabilized():
            ais.iterate()
    if not ais.stabilized():
        ais.settle()
    return ais


def fixed_membership_weights(
    members,
    table: RatingsTable,
    antigen: Profile,
    params: AisParams,
    overlap_threshold: int = DEFAULT_OVERLAP_THRESHOLD,
    index: MatchIndex | None = None,
) -> tuple[Neighbourhood, ImmuneSystem]:
    """Weights from running the dynamics over a fixed set of neighbours.

    Nobody is added or removed: concentrations may fall to zero but the
    member stays (with weight zero).
    """
    members = list(members)
    params = params.with_(capacity=max(params.capacity, len(members), 1))
    ais = ImmuneSystem(params, antigen)
    for u in members:
        ais.add_antibody(u, table, overlap_threshold, index)
    if members:
        ais.settle(remove_dead=False)
    return ais.neighbour_weights(Provenance.FIXED), ais

"""Trial orchestration, summaries, stimulation sweeps and result export."""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
import statistics
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .baseline import Neighbourhood, correlation_weights, simple_pearson_neighbourhood
from .dataset import DataError, RatingsTable, VoteScale, generate_synthetic, split_target
from .evaluation import (
    DEFAULT_EXACT_CUTOFF,
    common_unique_counts,
    kendall_tau,
    mae,
    neighbourhood_stats,
    wilcoxon_signed_rank,
)
from .immune import AisParams, fixed_membership_weights, grow
from .matching import DEFAULT_OVERLAP_THRESHOLD, MatchIndex
from .predictor import default_vote_for, recommend

# (predictor, neighbourhood) in the order the pairwise comparisons are listed
REGIMES = (("SP", "SP"), ("AIS", "SP"), ("SP", "AIS"), ("AIS", "AIS"))
RANDOM_REGIME = ("AISR", "AIS")
CHARACTERISTICS = (
    ("size", "Neighbours"),
    ("overlap", "Overlap"),
    ("correlation", "Correlation"),
    ("neighbour_correlation", "Neighbour correlation"),
)
ZERO_TOL = 1e-12


@dataclass(frozen=True)
class ExperimentConfig:
    ais: AisParams = field(default_factory=AisParams)
    sp_n: int = 100
    overlap_threshold: int = DEFAULT_OVERLAP_THRESHOLD
    visible_fraction: float = 0.5
    # None: neighbours without a vote are skipped; "auto": scale-derived default
    default_vote: float | str | None = None
    n_trials: int = 100
    min_target_votes: int = 20
    candidate_order: str = "dataset"
    master_seed: int = 0
    randomized_control: bool = False
    exact_cutoff: int = DEFAULT_EXACT_CUTOFF

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")
        if self.sp_n < 1:
            raise ValueError("sp_n must be at least 1")
        if self.overlap_threshold < 1:
            raise ValueError("overlap_threshold must be at least 1")
        if not (0 < self.visible_fraction <= 1):
            raise ValueError("visible_fraction must lie in (0, 1]")
        if self.min_target_votes < 2:
            raise ValueError("min_target_votes must be at least 2")
        if self.candidate_order not in ("dataset", "shuffle"):
            raise ValueError("candidate_order must be 'dataset' or 'shuffle'")
        if isinstance(self.default_vote, str) and self.default_vote != "auto":
            raise ValueError("default_vote must be a number, 'auto' or 'none'")

    def resolve_default_vote(self, scale: VoteScale) -> float | None:
        if self.default_vote == "auto":
            return default_vote_for(scale)
        return self.default_vote


@dataclass(frozen=True)
class DataConfig:
    min_vote: float = 0.0
    max_vote: float = 5.0
    vote_step: float = 1.0
    synthetic_users: int = 500
    synthetic_items: int = 300
    synthetic_clusters: int = 5
    synthetic_density: float = 0.2
    synthetic_noise: float = 0.5
    synthetic_seed: int = 0

    @property
    def scale(self) -> VoteScale:
        return VoteScale(self.min_vote, self.max_vote, self.vote_step)

    def synthetic_table(self) -> RatingsTable:
        return generate_synthetic(
            self.synthetic_users,
            self.synthetic_items,
            self.synthetic_clusters,
            self.synthetic_density,
            self.synthetic_noise,
            self.scale,
            self.synthetic_seed,
        )


class ConfigError(ValueError):
    pass


def _convert(text: str, kind):
    if kind is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


_AIS_TYPES = {"k1": float, "k2": float, "k3": float, "capacity": int, "stability_window": int,
              "init_concentration": float, "death_threshold": float, "max_concentration": float,
              "step_size": float, "clamp_negative_m_ij": bool, "step_cap": int, "convergence_tol": float}
_EXP_TYPES = {"sp_n": int, "overlap_threshold": int, "visible_fraction": float, "n_trials": int,
              "min_target_votes": int, "candidate_order": str, "master_seed": int,
              "randomized_control": bool, "exact_cutoff": int}
_DATA_TYPES = {f.name: (float if f.type in ("float",) else int) for f in fields(DataConfig)}


def parse_config(text: str) -> tuple[ExperimentConfig, DataConfig]:
    """Parse flat ``key = value`` text. Unknown keys are an error."""
    ais, exp, data = {}, {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key in _AIS_TYPES:
                ais[key] = _convert(value, _AIS_TYPES[key])
            elif key == "default_vote":
                low = value.lower()
                exp[key] = None if low in ("none", "") else "auto" if low == "auto" else float(value)
            elif key in _EXP_TYPES:
                exp[key] = _convert(value, _EXP_TYPES[key])
            elif key in _DATA_TYPES:
                data[key] = _convert(value, _DATA_TYPES[key])
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(f"line {lineno}: bad value for {key}: {e}") from None
    try:
        return ExperimentConfig(ais=AisParams(**ais), **exp), DataConfig(**data)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def load_config(path) -> tuple[ExperimentConfig, DataConfig]:
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read())


def format_config(config: ExperimentConfig, data: DataConfig | None = None) -> str:
    lines = [f"{k} = {v}" for k, v in asdict(config.ais).items()]
    for f in fields(ExperimentConfig):
        if f.name == "ais":
            continue
        value = getattr(config, f.name)
        lines.append(f"{f.name} = {'none' if value is None else value}")
    if data is not None:
        lines.extend(f"{k} = {v}" for k, v in asdict(data).items())
    return "\n".join(lines) + "\n"


def derive_seed(master_seed: int, *keys: int) -> int:
    seq = np.random.SeedSequence([master_seed % 2**64, *keys])
    return int(seq.generate_state(1, np.uint64)[0])


# purpose tags mixed into derived seeds
_SEED_TARGETS, _SEED_SPLIT, _SEED_ORDER, _SEED_RANDOM = 0, 1, 2, 3


def select_targets(table: RatingsTable, config: ExperimentConfig) -> list[int]:
    eligible = [u for u in table.users if len(table.profile(u)) >= config.min_target_votes]
    if len(eligible) < config.n_trials:
        raise DataError(
            f"only {len(eligible)} users have >= {config.min_target_votes} votes; need {config.n_trials}"
        )
    rng = np.random.default_rng(derive_seed(config.master_seed, _SEED_TARGETS))
    picked = rng.choice(len(eligible), size=config.n_trials, replace=False)
    return [eligible[k] for k in picked]


def candidate_stream(table: RatingsTable, target: int, config: ExperimentConfig) -> list[int]:
    users = [u for u in table.users if u != target]
    if config.candidate_order == "shuffle":
        rng = np.random.default_rng(derive_seed(config.master_seed, _SEED_ORDER, target))
        users = [users[k] for k in rng.permutation(len(users))]
    return users


@dataclass(frozen=True)
class RegimeResult:
    predictor: str
    neighbourhood: str
    mae: float | None
    tau: float | None
    n_discordant: int | None
    n_ranked: int
    n_hidden: int
    size: int
    overlap: int | None
    correlation: float | None
    neighbour_correlation: float | None
    reviewers_examined: int

    @property
    def regime(self) -> tuple[str, str]:
        return self.predictor, self.neighbourhood


@dataclass(frozen=True)
class TrialOutcome:
    target: int
    ais_members: tuple[int, ...]
    sp_members: tuple[int, ...]
    common: int
    unique_ais: int
    unique_sp: int
    regimes: tuple[RegimeResult, ...]

    def result(self, predictor: str, neighbourhood: str) -> RegimeResult:
        for r in self.regimes:
            if r.regime == (predictor, neighbourhood):
                return r
        raise KeyError((predictor, neighbourhood))


def _score(weights: Neighbourhood, table, split, default_vote):
    ranked = recommend(weights, table, split.visible_profile, sorted(split.hidden_votes), default_vote)
    if not ranked:
        return None, None, 0
    err = mae([(score, split.hidden_votes[item]) for item, score in ranked])
    if len(ranked) < 2:
        return err, None, len(ranked)
    return err, kendall_tau([item for item, _ in ranked], split.hidden_votes), len(ranked)


def run_trial(
    table: RatingsTable,
    target: int,
    config: ExperimentConfig,
    index: MatchIndex | None = None,
) -> TrialOutcome:
    """One target user under every predictor x neighbourhood regime."""
    if index is None:
        index = MatchIndex(table, config.overlap_threshold)
    T = config.overlap_threshold
    split = split_target(table, target, config.visible_fraction, derive_seed(config.master_seed, _SEED_SPLIT, target))
    antigen = split.visible_profile
    default_vote = config.resolve_default_vote(table.scale)

    ais = grow(table, antigen, config.ais, candidate_stream(table, target, config), T, index, target)
    ais_nb = ais.neighbour_weights()
    sp_nb = simple_pearson_neighbourhood(table, antigen, target, config.sp_n, T, index)
    members = {"AIS": ais_nb.users, "SP": sp_nb.users}
    stats = {name: neighbourhood_stats(nb, split, table, T, index) for name, nb in (("AIS", ais_nb), ("SP", sp_nb))}
    reviewers = {"AIS": ais.reviewers_examined, "SP": table.n_users - 1}

    weightings: list[tuple[str, str, Neighbourhood]] = []
    for predictor, nbname in REGIMES:
        if predictor == "SP":
            w = correlation_weights(members[nbname], antigen, table, T, index)
        else:
            w, _ = fixed_membership_weights(members[nbname], table, antigen, config.ais, T, index)
        weightings.append((predictor, nbname, w))
    if config.randomized_control and len(ais):
        ais.randomize_concentrations(derive_seed(config.master_seed, _SEED_RANDOM, target))
        weightings.append((*RANDOM_REGIME, ais.neighbour_weights()))

    results = []
    for predictor, nbname, w in weightings:
        err, tau, n_ranked = _score(w, table, split, default_vote)
        st = stats[nbname]
        results.append(
            RegimeResult(
                predictor, nbname, err,
                None if tau is None else tau.tau,
                None if tau is None else tau.n_discordant,
                n_ranked, len(split.hidden_votes),
                st.size, st.overlap, st.mean_target_correlation, st.mean_inter_neighbour_correlation,
                reviewers[nbname],
            )
        )
    common, unique_ais, unique_sp = common_unique_counts(ais_nb, sp_nb)
    return TrialOutcome(target, ais_nb.users, sp_nb.users, common, unique_ais, unique_sp, tuple(results))


# --- tables ---------------------------------------------------------------


@dataclass
class Table:
    columns: list[str]
    rows: list[list] = field(default_factory=list)

    def records(self) -> list[dict]:
        return [dict(zip(self.columns, row)) for row in self.rows]


TRIAL_COLUMNS = [
    "trial", "target", "predictor", "neighbourhood", "mae", "tau", "n_discordant", "n_ranked", "n_hidden",
    "size", "overlap", "correlation", "neighbour_correlation", "reviewers_examined",
    "common", "unique_ais", "unique_sp",
]


def trials_table(outcomes: Sequence[TrialOutcome]) -> Table:
    t = Table(list(TRIAL_COLUMNS))
    for k, o in enumerate(outcomes):
        for r in o.regimes:
            t.rows.append([
                k, o.target, r.predictor, r.neighbourhood, r.mae, r.tau, r.n_discordant, r.n_ranked, r.n_hidden,
                r.size, r.overlap, r.correlation, r.neighbour_correlation, r.reviewers_examined,
                o.common, o.unique_ais, o.unique_sp,
            ])
    return t


def _by_regime(records) -> dict[tuple[str, str], dict[int, dict]]:
    out: dict[tuple[str, str], dict[int, dict]] = {}
    for rec in records:
        out.setdefault((rec["predictor"], rec["neighbourhood"]), {})[rec["trial"]] = rec
    return out


def _mean(xs):
    return math.fsum(xs) / len(xs) if xs else None


def _std(xs):
    return statistics.pstdev(xs) if xs else None


def _median(xs):
    return statistics.median(xs) if xs else None


def _regimes_present(by):
    order = list(REGIMES) + [RANDOM_REGIME]
    return [r for r in order if r in by]


def regime_summary_table(records) -> Table:
    t = Table(["predictor", "neighbourhood", "metric", "n", "mean", "std", "median"])
    by = _by_regime(records)
    for regime in _regimes_present(by):
        rows = [by[regime][k] for k in sorted(by[regime])]
        for metric in ("mae", "tau"):
            xs = [r[metric] for r in rows if r[metric] is not None]
            t.rows.append([*regime, metric, len(xs), _mean(xs), _std(xs), _median(xs)])
    return t


def _paired(by, first, second, key):
    a, b = by.get(first, {}), by.get(second, {})
    trials = sorted(set(a) | set(b))
    both = [(a[k][key], b[k][key]) for k in trials
            if k in a and k in b and a[k][key] is not None and b[k][key] is not None]
    return both, len(trials) - len(both)


def regime_wilcoxon_table(records, exact_cutoff: int = DEFAULT_EXACT_CUTOFF) -> Table:
    """All regime pairs for MAE (lower is better) and Tau (higher is better)."""
    t = Table([
        "metric", "predictor_1", "neighbourhood_1", "predictor_2", "neighbourhood_2", "median_1", "median_2",
        "n_compared", "n_dropped", "n_unequal", "rank_sum_1_better", "rank_sum_2_better", "p_upper_bound", "exact",
    ])
    by = _by_regime(records)
    for metric in ("mae", "tau"):
        for first, second in itertools.combinations(REGIMES, 2):
            pairs, dropped = _paired(by, first, second, metric)
            med1 = _median([p for p, _ in pairs])
            med2 = _median([q for _, q in pairs])
            if pairs:
                signed = [(-p, -q) for p, q in pairs] if metric == "mae" else pairs
                res = wilcoxon_signed_rank(signed, exact_cutoff, ZERO_TOL)
                n_unequal, r1, r2, p, exact = res.n_unequal, res.rank_sum_first, res.rank_sum_second, res.p_upper_bound, int(res.exact)
            else:
                n_unequal, r1, r2, p, exact = 0, 0.0, 0.0, None, 1
            t.rows.append([metric, *first, *second, med1, med2, len(pairs), dropped, n_unequal, r1, r2, p, exact])
    return t


def characteristics_table(records, exact_cutoff: int = DEFAULT_EXACT_CUTOFF) -> Table:
    """SP versus AIS neighbourhoods on the four community characteristics."""
    t = Table([
        "algorithm_1", "algorithm_2", "characteristic", "mean_1", "mean_2", "n_compared", "n_dropped",
        "n_unequal", "rank_sum_1_higher", "rank_sum_2_higher", "p_upper_bound", "exact",
    ])
    by = _by_regime(records)
    # stats depend only on membership; read them from the native regimes
    sp, ais = ("SP", "SP"), ("AIS", "AIS")
    for key, label in CHARACTERISTICS:
        pairs, dropped = _paired(by, sp, ais, key)
        if pairs:
            res = wilcoxon_signed_rank(pairs, exact_cutoff, ZERO_TOL)
            tail = [res.n_unequal, res.rank_sum_first, res.rank_sum_second, res.p_upper_bound, int(res.exact)]
        else:
            tail = [0, 0.0, 0.0, None, 1]
        t.rows.append([
            "SP", "AIS", label,
            _mean([p for p, _ in pairs]), _mean([q for _, q in pairs]), len(pairs), dropped, *tail,
        ])
    return t


def composition_table(records) -> Table:
    """Mean neighbourhood size split into common and unique members, per algorithm."""
    t = Table(["algorithm", "n", "mean_size", "std_size", "mean_common", "std_common", "mean_unique", "std_unique"])
    by = _by_regime(records)
    for algo, regime, unique_key in (("SP", ("SP", "SP"), "unique_sp"), ("AIS", ("AIS", "AIS"), "unique_ais")):
        rows = [by.get(regime, {})[k] for k in sorted(by.get(regime, {}))]
        sizes = [r["size"] for r in rows]
        common = [r["common"] for r in rows]
        unique = [r[unique_key] for r in rows]
        t.rows.append([algo, len(rows), _mean(sizes), _std(sizes), _mean(common), _std(common), _mean(unique), _std(unique)])
    return t


def scatter_tables(records) -> dict[str, Table]:
    """AIS-on-AIS Tau against each neighbourhood characteristic, one row per ranked trial."""
    by = _by_regime(records).get(("AIS", "AIS"), {})
    out = {}
    for key, _ in CHARACTERISTICS:
        t = Table(["trial", "target", key, "tau"])
        for k in sorted(by):
            r = by[k]
            if r["tau"] is not None:
                t.rows.append([k, r["target"], r[key], r["tau"]])
        out[f"scatter_{key}"] = t
    return out


@dataclass
class ExperimentResult:
    outcomes: list[TrialOutcome]
    tables: dict[str, Table]

    @property
    def summary(self) -> dict[str, Table]:
        return {k: v for k, v in self.tables.items() if k != "trials"}


def summarize(records, exact_cutoff: int = DEFAULT_EXACT_CUTOFF) -> dict[str, Table]:
    tables = {
        "regimes": regime_summary_table(records),
        "wilcoxon_regimes": regime_wilcoxon_table(records, exact_cutoff),
        "characteristics": characteristics_table(records, exact_cutoff),
        "composition": composition_table(records),
    }
    tables.update(scatter_tables(records))
    if not records:
        # nothing to summarise: header-only tables
        tables = {name: Table(t.columns) for name, t in tables.items()}
    return tables


def run_experiment(
    table: RatingsTable,
    config: ExperimentConfig,
    progress: Callable[[int, int], None] | None = None,
) -> ExperimentResult:
    targets = select_targets(table, config)
    index = MatchIndex(table, config.overlap_threshold)
    outcomes = []
    for k, target in enumerate(targets):
        outcomes.append(run_trial(table, target, config, index))
        if progress:
            progress(k + 1, len(targets))
    trials = trials_table(outcomes)
    tables = {"trials": trials}
    tables.update(summarize(trials.records(), config.exact_cutoff))
    return ExperimentResult(outcomes, tables)


@dataclass(frozen=True)
class SweepPoint:
    rate: float
    mean_size: float
    std_size: float
    mean_reviewers: float
    std_reviewers: float
    sizes: tuple[int, ...]
    reviewers: tuple[int, ...]


def sweep_stimulation(
    table: RatingsTable,
    rates: Sequence[float],
    config: ExperimentConfig,
    progress: Callable[[int, int], None] | None = None,
) -> list[SweepPoint]:
    """AIS neighbourhood size and reviewers examined as the stimulation rate varies.

    Uses the same targets, splits and candidate orders as ``run_experiment``.
    """
    if not rates:
        raise ValueError("no rates given")
    targets = select_targets(table, config)
    index = MatchIndex(table, config.overlap_threshold)
    splits = {
        t: split_target(table, t, config.visible_fraction, derive_seed(config.master_seed, _SEED_SPLIT, t))
        for t in targets
    }
    points = []
    for i, rate in enumerate(rates):
        params = config.ais.with_(k1=float(rate))
        sizes, reviewers = [], []
        for t in targets:
            ais = grow(table, splits[t].visible_profile, params, candidate_stream(table, t, config),
                       config.overlap_threshold, index, t)
            sizes.append(len(ais))
            reviewers.append(ais.reviewers_examined)
        points.append(SweepPoint(float(rate), _mean(sizes), _std(sizes), _mean(reviewers), _std(reviewers),
                                 tuple(sizes), tuple(reviewers)))
        if progress:
            progress(i + 1, len(rates))
    return points


def sweep_table(points: Sequence[SweepPoint]) -> Table:
    t = Table(["k1", "n", "mean_size", "std_size", "mean_reviewers", "std_reviewers"])
    for p in points:
        t.rows.append([p.rate, len(p.sizes), p.mean_size, p.std_size, p.mean_reviewers, p.std_reviewers])
    return t


# --- export ---------------------------------------------------------------


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _parse_cell(text: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _json_value(value):
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def export_tables(tables: dict[str, Table], destination, fmt: str = "csv") -> list[Path]:
    """Write each table as ``<name>.csv`` or ``<name>.json`` under ``destination``."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    dest = Path(destination)
    dest.mkdir(parents=True, exist_ok=True)
    written = []
    for name in sorted(tables):
        t = tables[name]
        path = dest / f"{name}.{fmt}"
        with open(path, "w", encoding="utf-8", newline="") as f:
            if fmt == "csv":
                w = csv.writer(f, lineterminator="\n")
                w.writerow(t.columns)
                for row in t.rows:
                    w.writerow([_cell(v) for v in row])
            else:
                json.dump({"columns": t.columns, "rows": [[_json_value(v) for v in row] for row in t.rows]}, f, indent=1)
                f.write("\n")
        written.append(path)
    return written


def export_results(result: ExperimentResult, destination, fmt: str = "csv") -> list[Path]:
    return export_tables(result.tables, destination, fmt)


def read_table(path) -> Table:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as f:
        if path.suffix == ".json":
            data = json.load(f)
            return Table(list(data["columns"]), [list(r) for r in data["rows"]])
        reader = csv.reader(f)
        try:
            columns = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        return Table(columns, [[_parse_cell(c) for c in row] for row in reader])


def read_tables(source, fmt: str = "csv") -> dict[str, Table]:
    source = Path(source)
    return {p.stem: read_table(p) for p in sorted(source.glob(f"*.{fmt}"))}


def recompute_stats(source, fmt: str = "csv", exact_cutoff: int = DEFAULT_EXACT_CUTOFF) -> dict[str, Table]:
    """Rebuild the characteristics and composition tables from a saved ``trials`` table."""
    path = Path(source) / f"trials.{fmt}"
    if not path.exists():
        raise FileNotFoundError(os.fspath(path))
    records = read_table(path).records()
    return {"characteristics": characteristics_table(records, exact_cutoff), "composition": composition_table(records)}

"""Command-line entry point: ``aisrec run|sweep|stats|gen``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .dataset import DataError, VoteScale, generate_synthetic, load_ratings, write_ratings
from .experiment import (
    ConfigError,
    DataConfig,
    ExperimentConfig,
    Table,
    export_results,
    export_tables,
    format_config,
    load_config,
    recompute_stats,
    run_experiment,
    sweep_stimulation,
    sweep_table,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _rates(text: str) -> list[float]:
    try:
        rates = [float(r) for r in text.split(",") if r.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not rates:
        raise argparse.ArgumentTypeError("no rates given")
    return rates


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aisrec", description="Immune-network vs Pearson neighbourhood recommender experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_source(p, required):
        g = p.add_mutually_exclusive_group(required=required)
        g.add_argument("--ratings", type=Path, help="ratings file of user_id,item_id,vote lines")
        g.add_argument("--synthetic", action="store_true", help="use the synthetic table described by the config")

    run = sub.add_parser("run", help="run the trial experiment and export tables")
    data_source(run, required=True)
    run.add_argument("--config", type=Path, help="flat key = value config file")
    run.add_argument("--out", type=Path, required=True, help="output directory")
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.add_argument("--quiet", action="store_true", help="no progress on stderr")

    sweep = sub.add_parser("sweep", help="AIS size and reviewers examined across stimulation rates")
    data_source(sweep, required=False)
    sweep.add_argument("--rates", type=_rates, required=True, help="comma-separated k1 values")
    sweep.add_argument("--config", type=Path)
    sweep.add_argument("--out", type=Path, required=True)
    sweep.add_argument("--format", choices=("csv", "json"), default="csv")
    sweep.add_argument("--quiet", action="store_true")

    stats = sub.add_parser("stats", help="recompute neighbourhood characteristics from a saved run")
    stats.add_argument("--out", type=Path, required=True, help="directory of a previous run")
    stats.add_argument("--format", choices=("csv", "json"), default="csv")

    gen = sub.add_parser("gen", help="write a synthetic clustered ratings file")
    gen.add_argument("--users", type=int, required=True)
    gen.add_argument("--items", type=int, required=True)
    gen.add_argument("--clusters", type=int, required=True)
    gen.add_argument("--density", type=float, required=True)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--noise", type=float, default=DataConfig.synthetic_noise)
    gen.add_argument("--min-vote", type=float, default=DataConfig.min_vote)
    gen.add_argument("--max-vote", type=float, default=DataConfig.max_vote)
    gen.add_argument("--vote-step", type=float, default=DataConfig.vote_step)
    gen.add_argument("--out", type=Path, required=True, help="ratings file to write")
    return parser


def _configs(path: Path | None) -> tuple[ExperimentConfig, DataConfig]:
    if path is None:
        return ExperimentConfig(), DataConfig()
    return load_config(path)


def _table(args, data: DataConfig):
    if args.ratings is not None:
        return load_ratings(args.ratings, data.scale)
    return data.synthetic_table()


def _progress(quiet: bool, label: str):
    if quiet:
        return None

    def report(done, total):
        print(f"\r{label} {done}/{total}", end="\n" if done == total else "", file=sys.stderr, flush=True)

    return report


def _print_table(name: str, table: Table) -> None:
    print(f"# {name}")
    print("\t".join(table.columns))
    for row in table.rows:
        print("\t".join("" if v is None else f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))


def cmd_run(args) -> int:
    config, data = _configs(args.config)
    table = _table(args, data)
    result = run_experiment(table, config, _progress(args.quiet, "trial"))
    export_results(result, args.out, args.format)
    (args.out / "config.txt").write_text(format_config(config, data), encoding="utf-8")
    for name in ("characteristics", "composition"):
        _print_table(name, result.tables[name])
    return EXIT_OK


def cmd_sweep(args) -> int:
    config, data = _configs(args.config)
    table = _table(args, data)
    points = sweep_stimulation(table, args.rates, config, _progress(args.quiet, "rate"))
    tables = {"sweep": sweep_table(points)}
    export_tables(tables, args.out, args.format)
    _print_table("sweep", tables["sweep"])
    return EXIT_OK


def cmd_stats(args) -> int:
    tables = recompute_stats(args.out, args.format)
    for name, t in tables.items():
        _print_table(name, t)
    return EXIT_OK


def cmd_gen(args) -> int:
    try:
        scale = VoteScale(args.min_vote, args.max_vote, args.vote_step)
        table = generate_synthetic(args.users, args.items, args.clusters, args.density, args.noise, scale, args.seed)
    except ValueError as e:
        raise UsageError(str(e)) from None
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", encoding="utf-8", newline="") as f:
        write_ratings(table, f)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "stats": cmd_stats, "gen": cmd_gen}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UsageError) as e:
        print(f"aisrec: configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"aisrec: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"aisrec: I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

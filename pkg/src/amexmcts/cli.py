"""Command-line entry point: ``amexmcts {run,sweep,coverage,oracle} ...``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

from .envs.base import Mdp
from .envs.chain import Chain, ChainLoop, ChainSpec
from .envs.frozenlake import DEFAULT_HORIZON, DEFAULT_MAP_8X8, FrozenLake, load_map
from .envs.synthetic import SyntheticTree
from .errors import AmexError
from .grammar import DEFAULT_MAX_EXPANSIONS, GrammarEnv, load_dataset, load_grammar, EQUATION_GRAMMAR
from .harness import (
    aggregate,
    brute_force_values,
    coverage_report,
    format_aggregate,
    format_oracle,
    sweep,
    write_csv,
)
from .search import SearchConfig, Variant

log = logging.getLogger("amexmcts")

COMMANDS = ("run", "sweep", "coverage", "oracle")
ENVS = ("chain", "chainloop", "frozenlake", "grammar", "synthetic")


class UsageError(Exception):
    exit_code = 2


@dataclass
class CliConfig:
    command: str
    env: str
    variants: tuple[str, ...]
    n_sims: tuple[int, ...]
    seeds: int
    seed: int
    C: float
    gamma: float
    rollout_cap: int
    k: Optional[int] = None
    horizon: Optional[int] = None
    correct_action: Optional[int] = None
    map_file: Optional[str] = None
    grammar_file: Optional[str] = None
    dataset_file: Optional[str] = None
    max_expansions: int = DEFAULT_MAX_EXPANSIONS
    b: Optional[int] = None
    depth: Optional[int] = None
    tree_seed: int = 0
    out: Optional[str] = None
    dot: Optional[str] = None
    wall_time: bool = True

    def search_config(self, variant: str | None = None, n_sims: int | None = None, seed: int | None = None) -> SearchConfig:
        return SearchConfig(
            variant=variant or self.variants[0],
            n_sims=n_sims or (self.n_sims[0] if self.n_sims else 1),
            C=self.C,
            gamma=self.gamma,
            rollout_cap=self.rollout_cap,
            seed=self.seed if seed is None else seed,
        )


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("budgets must be positive")
    return values


def _variant_list(text: str) -> tuple[str, ...]:
    values = tuple(v.strip().lower() for v in text.split(",") if v.strip())
    allowed = [v.value for v in Variant]
    for v in values:
        if v not in allowed:
            raise argparse.ArgumentTypeError(f"unknown variant {v!r} (choose from {', '.join(allowed)})")
    if not values:
        raise argparse.ArgumentTypeError("at least one variant is required")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="amexmcts",
        description="Tree search with amplified exploration: episodes, sweeps, coverage and exact oracle.",
    )
    parser.add_argument("command", choices=COMMANDS, help="run: episodes for one setting; sweep: variants x budgets x seeds; "
                        "coverage: one search with tree statistics; oracle: exact root action values")
    parser.add_argument("--config", metavar="PATH", help="key=value file with flag defaults; explicit flags win")
    env = parser.add_argument_group("environment")
    env.add_argument("--env", required=True, choices=ENVS, help="environment to search")
    env.add_argument("--k", type=int, help="chain length (required for chain and chainloop)")
    env.add_argument("--horizon", type=int, help="episode horizon (chainloop default k, frozenlake default 400)")
    env.add_argument("--correct-action", type=int, choices=(0, 1),
                     help="fix the correct chain action at every position (default: drawn per seed)")
    env.add_argument("--map-file", metavar="PATH", help="frozenlake map, one row of S/F/H/G per line")
    env.add_argument("--grammar-file", metavar="PATH", help="grammar rules, one 'HEAD -> sym ...' per line")
    env.add_argument("--dataset-file", metavar="PATH", help="grammar dataset CSV with header x0,x1,y")
    env.add_argument("--max-expansions", type=int, default=DEFAULT_MAX_EXPANSIONS,
                     help="rule applications before a derivation is cut off (default %(default)s)")
    env.add_argument("--b", type=int, help="synthetic tree branching factor")
    env.add_argument("--depth", type=int, help="synthetic tree depth")
    env.add_argument("--tree-seed", type=int, default=0, help="seed of the synthetic leaf rewards (default %(default)s)")
    search = parser.add_argument_group("search")
    search.add_argument("--variant", type=_variant_list, default=("amex",),
                        help="classical, amex or amexmax; comma list for sweep (default amex)")
    search.add_argument("--n-sims", type=_int_list, default=(100,),
                        help="iterations per search; comma list for sweep (default 100)")
    search.add_argument("--seeds", type=int, default=1, help="number of episode seeds (default %(default)s)")
    search.add_argument("--seed", type=int, default=None,
                        help="global seed; episode seeds start here (default $AMEX_SEED or 0)")
    search.add_argument("--C", type=float, default=2 ** 0.5, help="UCT exploration constant (default sqrt 2)")
    search.add_argument("--gamma", type=float, help="discount (default 0.99 for frozenlake, else 1)")
    search.add_argument("--rollout-cap", type=int, help="maximum rollout length (default: horizon or 1000)")
    out = parser.add_argument_group("output")
    out.add_argument("--out", metavar="PATH", help="CSV file for episode records")
    out.add_argument("--dot", metavar="PATH", help="DOT file for the coverage tree")
    out.add_argument("--no-wall-time", action="store_true", help="write wall_ms as 0 so outputs are byte-reproducible")
    out.add_argument("-v", "--verbose", action="store_true", help="log every finished episode")
    return parser


def _read_config_file(path: str) -> list[str]:
    tokens = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"amexmcts: error: cannot read --config {path}: {exc}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"amexmcts: error: {path}:{lineno}: expected key=value")
        flag = "--" + key.strip().replace("_", "-")
        value = value.strip().strip('"')
        if flag == "--no-wall-time":
            if value.lower() in ("1", "true", "yes"):
                tokens.append(flag)
            continue
        tokens += [flag, value]
    return tokens


def _split_config(argv: list[str]) -> tuple[Optional[str], list[str]]:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1], argv[:i] + argv[i + 2:]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1], argv[:i] + argv[i + 1:]
    return None, argv


def parse_args(argv: Sequence[str]) -> CliConfig:
    """Validate ``argv`` into a :class:`CliConfig`; raises :class:`UsageError`."""
    argv = list(argv)
    config_path, rest = _split_config(argv)
    if config_path is not None and rest and not rest[0].startswith("-"):
        # config tokens go after the command so explicit flags still win
        rest = rest[:1] + _read_config_file(config_path) + rest[1:]
    args = build_parser().parse_args(rest)

    def fail(flag: str, message: str):
        raise UsageError(f"amexmcts: error: {flag}: {message}")

    if args.env in ("chain", "chainloop") and args.k is None:
        fail("--k", f"required for --env {args.env}")
    if args.k is not None and args.env not in ("chain", "chainloop"):
        fail("--k", "only valid for chain and chainloop")
    if args.k is not None and args.k < 1:
        fail("--k", "must be >= 1")
    if args.env == "synthetic" and (args.b is None or args.depth is None):
        fail("--b/--depth", "required for --env synthetic")
    if args.horizon is not None and args.env not in ("chainloop", "frozenlake"):
        fail("--horizon", "only valid for chainloop and frozenlake")
    if args.map_file and args.env != "frozenlake":
        fail("--map-file", "only valid for frozenlake")
    if (args.grammar_file or args.dataset_file) and args.env != "grammar":
        fail("--grammar-file/--dataset-file", "only valid for grammar")
    if args.seeds < 0:
        fail("--seeds", "must be >= 0")
    if args.command != "sweep":
        if len(args.variant) != 1:
            fail("--variant", f"{args.command} takes a single variant")
        if len(args.n_sims) != 1:
            fail("--n-sims", f"{args.command} takes a single budget")
    if args.dot and args.command != "coverage":
        fail("--dot", "only valid for coverage")

    seed = args.seed
    if seed is None:
        env_seed = os.environ.get("AMEX_SEED", "0")
        try:
            seed = int(env_seed)
        except ValueError:
            fail("AMEX_SEED", f"not an integer: {env_seed!r}")
    gamma = args.gamma if args.gamma is not None else (0.99 if args.env == "frozenlake" else 1.0)
    if not 0 < gamma <= 1:
        fail("--gamma", "must be in (0, 1]")
    if not args.C > 0:
        fail("--C", "must be > 0")
    rollout_cap = args.rollout_cap
    if rollout_cap is None:
        rollout_cap = (args.horizon or DEFAULT_HORIZON) if args.env == "frozenlake" else 1000
    if rollout_cap < 1:
        fail("--rollout-cap", "must be >= 1")

    return CliConfig(
        command=args.command,
        env=args.env,
        variants=args.variant,
        n_sims=args.n_sims,
        seeds=args.seeds,
        seed=seed,
        C=args.C,
        gamma=gamma,
        rollout_cap=rollout_cap,
        k=args.k,
        horizon=args.horizon,
        correct_action=args.correct_action,
        map_file=args.map_file,
        grammar_file=args.grammar_file,
        dataset_file=args.dataset_file,
        max_expansions=args.max_expansions,
        b=args.b,
        depth=args.depth,
        tree_seed=args.tree_seed,
        out=args.out,
        dot=args.dot,
        wall_time=not args.no_wall_time,
    )


def make_env_factory(config: CliConfig) -> Callable[[int], Mdp]:
    """Environment builder per episode seed (the chain's correct actions depend on it)."""
    if config.env in ("chain", "chainloop"):
        def chain_env(seed: int) -> Mdp:
            if config.correct_action is not None:
                spec = ChainSpec.fixed(config.k, config.correct_action)
            else:
                spec = ChainSpec.seeded(config.k, seed)
            return Chain(spec) if config.env == "chain" else ChainLoop(spec, config.horizon)
        return chain_env
    if config.env == "frozenlake":
        grid = load_map(config.map_file) if config.map_file else DEFAULT_MAP_8X8
        lake = FrozenLake(grid, config.horizon or DEFAULT_HORIZON)
        return lambda seed: lake
    if config.env == "grammar":
        grammar = load_grammar(config.grammar_file) if config.grammar_file else EQUATION_GRAMMAR
        dataset = load_dataset(config.dataset_file) if config.dataset_file else None
        genv = GrammarEnv(dataset, grammar, config.max_expansions)
        return lambda seed: genv
    tree = SyntheticTree(config.b, config.depth, config.tree_seed)
    return lambda seed: tree


def _emit_records(config: CliConfig, records, out) -> None:
    if not config.wall_time:
        records = [dataclasses.replace(r, wall_ms=0.0) for r in records]
    if config.out:
        write_csv(records, config.out)
    if records:
        print(format_aggregate(aggregate(records)), file=out)


def dispatch(config: CliConfig, env_factory: Callable[[int], Mdp] | None = None, out=None) -> int:
    """Run the configured command; 0 on success, 1 on a runtime error."""
    out = out or sys.stdout
    try:
        factory = env_factory or make_env_factory(config)
        if config.command in ("run", "sweep"):
            progress = (lambda r: log.info("%s", r)) if log.isEnabledFor(logging.INFO) else None
            records = sweep(
                factory,
                config.variants,
                config.n_sims,
                config.seeds,
                base=config.search_config(),
                seed_offset=config.seed,
                progress=progress,
            )
            _emit_records(config, records, out)
        elif config.command == "coverage":
            env = factory(config.seed)
            stats, dot = coverage_report(env, config.search_config())
            if config.dot:
                try:
                    Path(config.dot).write_text(dot)
                except OSError as exc:
                    raise OSError(f"cannot write DOT to {config.dot}: {exc}") from exc
            for field in dataclasses.fields(stats):
                value = getattr(stats, field.name)
                if field.name == "best_state" and value is not None:
                    value = str(value)
                print(f"{field.name}: {value}", file=out)
        else:
            env = factory(config.seed)
            result = brute_force_values(env, env.initial(), config.gamma)
            print(format_oracle(result), file=out)
    except (AmexError, OSError, ValueError) as exc:
        print(f"amexmcts: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = parse_args(argv)
    except UsageError as exc:
        print(build_parser().format_usage().rstrip(), file=sys.stderr)
        print(exc, file=sys.stderr)
        return exc.exit_code
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if "-v" in argv or "--verbose" in argv else logging.WARNING,
                        format="%(message)s")
    return dispatch(config)


if __name__ == "__main__":
    sys.exit(main())

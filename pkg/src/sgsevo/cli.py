"""Command-line entry point: generate, solve, evaluate, oracle, ablate."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import resource
import sys
from pathlib import Path

import numpy as np

from . import evolve, oracle
from .bench_gen import FAMILIES, GenerationError, SuiteConfig, write_suite
from .evaluation import evaluate
from .game_model import GameFormatError, load_game
from .strategy import StrategyFormatError, load_chromosome, save_chromosome

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
VARIANTS = ("full",) + evolve.ABLATIONS
ABLATE_HEADER = ("variant", "game", "seed", "best_fitness", "generations_to_best", "wall_time_ms")


class CliError(Exception):
    """Runtime failure reported with exit code 1."""


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a non-negative 64-bit integer")
    return v


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _non_negative(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _switches(text: str) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, help="64-bit RNG seed")
    common.add_argument("--threads", type=_non_negative, default=1, help="evaluation workers (0 = all cores)")
    common.add_argument("--out", help="output directory (a file for ablate)")

    p = argparse.ArgumentParser(prog="sgsevo", description="Evolutionary solver for sensor-signalling security games.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write a benchmark suite")
    g.add_argument("--family", required=True, type=lambda s: s.replace("_", "-"),
                   choices=[f.replace("_", "-") for f in FAMILIES])
    g.add_argument("--n", type=_positive)
    g.add_argument("--cliques", type=_positive)
    g.add_argument("--clique-size", type=_positive)
    g.add_argument("--rule", type=int, choices=(1, 2, 3))
    g.add_argument("--count", type=_positive, default=1, help="games per setting")

    s = sub.add_parser("solve", parents=[common], help="run the evolutionary solver on one game")
    s.add_argument("--game", required=True)
    s.add_argument("--params", help="params JSON (defaults to the tuned values)")
    s.add_argument("--ablation", type=_switches, default=[], help="comma-separated switches")

    e = sub.add_parser("evaluate", parents=[common], help="best response to a stored strategy")
    e.add_argument("--game", required=True)
    e.add_argument("--strategy", required=True)

    o = sub.add_parser("oracle", parents=[common], help="Monte-Carlo check of the evaluator")
    o.add_argument("--game", required=True)
    o.add_argument("--strategy", required=True)
    o.add_argument("--samples", type=_positive, required=True)

    a = sub.add_parser("ablate", parents=[common], help="variant x game x seed experiment grid")
    a.add_argument("--games", required=True, help="directory of game JSON files")
    a.add_argument("--variants", type=_switches, required=True, help="comma list of: " + ", ".join(VARIANTS))
    a.add_argument("--seeds", type=_positive, required=True, help="runs per game, seeds seed..seed+N-1")
    a.add_argument("--params", help="params JSON shared by all variants")
    return p


def _writable_dir(path: str | None) -> Path:
    if not path:
        raise CliError("--out is required")
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create {out}: {exc}")
    if not os.access(out, os.W_OK):
        raise CliError(f"{out} is not writable")
    return out


def _read_game(path):
    try:
        return load_game(Path(path).read_bytes())
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}")
    except GameFormatError as exc:
        raise CliError(f"{path}: {exc}")


def _read_strategy(path, game):
    try:
        return load_chromosome(Path(path).read_bytes(), game)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}")
    except StrategyFormatError as exc:
        raise CliError(f"{path}: {exc}")


def _read_params(path) -> evolve.EvolveParams:
    if path is None:
        return evolve.EvolveParams()
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read params {path}: {exc}")
    try:
        return evolve.EvolveParams.from_dict(data)
    except (evolve.ConfigError, TypeError) as exc:
        raise CliError(f"{path}: {exc}")


def _peak_mem_bytes() -> int:
    return int(resource.getrusage(resource.RUSAGE_SELF).ru_maxrss) * 1024


def cmd_generate(args, parser) -> int:
    if args.seed is None:
        parser.error("generate requires --seed")
    out = _writable_dir(args.out)
    try:
        cfg = SuiteConfig(family=args.family, seed=args.seed, n=args.n, cliques=args.cliques,
                          clique_size=args.clique_size, rule=args.rule, games_per_setting=args.count)
        manifest = write_suite(cfg, out)
    except GenerationError as exc:
        raise CliError(str(exc))
    print(json.dumps({"files": len(manifest["games"]), "out": str(out)}))
    return EXIT_OK


def cmd_solve(args, parser) -> int:
    if args.seed is None:
        parser.error("solve requires --seed")
    bad = sorted(set(args.ablation) - set(evolve.ABLATIONS))
    if bad:
        parser.error(f"unknown ablation switch(es) {', '.join(bad)}; valid: {', '.join(evolve.ABLATIONS)}")
    out = _writable_dir(args.out)
    game = _read_game(args.game)
    params = _read_params(args.params)
    params = evolve.EvolveParams(**{**params.to_dict(), "seed": args.seed,
                                    "ablation": frozenset(params.ablation) | frozenset(args.ablation)}).validate()
    res = evolve.run(game, params, threads=args.threads)
    (out / "strategy.json").write_bytes(save_chromosome(res.best))
    (out / "history.csv").write_text(evolve.history_csv(res.history))
    result = {
        "best_fitness": res.best_fitness,
        "generations_to_best": res.generations_to_best,
        "wall_time_ms": res.wall_time_ms,
        "peak_mem_bytes": _peak_mem_bytes(),
        "seed": args.seed,
    }
    (out / "result.json").write_text(json.dumps(result, indent=1) + "\n")
    print(json.dumps(result))
    return EXIT_OK


def cmd_evaluate(args, parser) -> int:
    game = _read_game(args.game)
    ch = _read_strategy(args.strategy, game)
    print(json.dumps(evaluate(ch, game).to_dict()))
    return EXIT_OK


def cmd_oracle(args, parser) -> int:
    if args.seed is None:
        parser.error("oracle requires --seed")
    game = _read_game(args.game)
    ch = _read_strategy(args.strategy, game)
    report = oracle.validate(ch, game, args.samples, np.random.default_rng(args.seed))
    print(json.dumps(report.to_dict()))
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_ablate(args, parser) -> int:
    if args.seed is None:
        parser.error("ablate requires --seed")
    bad = [v for v in args.variants if v not in VARIANTS]
    if bad or not args.variants:
        parser.error(f"unknown variant(s) {', '.join(bad) or '(none)'}; valid: {', '.join(VARIANTS)}")
    if not args.out:
        parser.error("ablate requires --out FILE")
    out = Path(args.out)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.touch()
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc}")
    base = _read_params(args.params)
    files = sorted(p for p in Path(args.games).glob("*.json") if p.name != "manifest.json")
    if not files:
        raise CliError(f"no game files in {args.games}")
    games = [(p.stem, _read_game(p)) for p in files]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ABLATE_HEADER)
    for variant in args.variants:
        ablation = frozenset() if variant == "full" else frozenset([variant])
        for name, game in games:
            for i in range(args.seeds):
                seed = (args.seed + i) % 2**64
                params = evolve.EvolveParams(**{**base.to_dict(), "seed": seed, "ablation": ablation}).validate()
                res = evolve.run(game, params, threads=args.threads)
                w.writerow((variant, name, seed, repr(res.best_fitness), res.generations_to_best, res.wall_time_ms))
    out.write_text(buf.getvalue())
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "solve": cmd_solve, "evaluate": cmd_evaluate,
            "oracle": cmd_oracle, "ablate": cmd_ablate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    try:
        return COMMANDS[args.command](args, sub)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except evolve.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

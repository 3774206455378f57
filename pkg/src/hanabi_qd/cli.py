"""Command-line entry point: ``hanabi-qd <subcommand> ...``.

Exit status is 0 on success, 1 on a runtime error (unreadable or mismatched
files, invalid settings) and 2 on a usage error. Every subcommand writes its
resolved settings next to its outputs so a run can be repeated exactly.

Environment overrides: ``HANABI_QD_OUT`` (default output directory) and
``HANABI_QD_THREADS`` (default worker thread count).
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (StateCorpus, action_agreement, collect_states, export_heatmap,
                       hamming_report)
from .engine import GameConfig, GameError
from .evaluation import (DEFAULT_GAMES_PER_PAIR, MatchupMatrix, corresponding_csv,
                         corresponding_pairs, matchup_matrix)
from .io import SchemaError, atomic_write_text, csv_text, dumps, read_json, tag, write_json
from .map_elites import Archive, EvolutionConfig, reevaluate, run
from .meta import MODES, MetaConfig, meta_evaluate, response_table
from .metrics import NicheIndex
from .records import play_game
from .rules import ChromosomeAgent, catalog_hash

log = logging.getLogger("hanabi_qd")

ENV_OUT = "HANABI_QD_OUT"
ENV_THREADS = "HANABI_QD_THREADS"


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------- helpers

def _default_threads() -> int:
    value = os.environ.get(ENV_THREADS)
    if value is None:
        return 1
    try:
        return max(1, int(value))
    except ValueError:
        raise UsageError(f"{ENV_THREADS} must be an integer, got {value!r}") from None


def _set_threads(k: int) -> int:
    if k > 1:
        import numba

        k = min(k, numba.config.NUMBA_NUM_THREADS)
        numba.set_num_threads(k)
    return k


def _out_path(args, default_name: str) -> Path:
    if args.out is not None:
        return Path(args.out)
    base = os.environ.get(ENV_OUT)
    if base is None:
        raise UsageError(f"--out is required (or set {ENV_OUT})")
    return Path(base) / default_name


def _snapshot(path: Path, command: str, args, extra: dict | None = None) -> None:
    settings = {k: v for k, v in vars(args).items() if k != "func"}
    doc = tag("run_config", {"command": command, "package_version": __version__,
                             "catalog": catalog_hash(), "settings": settings, **(extra or {})})
    write_json(path, doc)


def _config_path_for(out: Path) -> Path:
    return out.with_name(out.stem + "_config.json")


def _parse_cell(text: str) -> NicheIndex:
    try:
        i, j = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a niche as 'i,j', got {text!r}") from None
    return NicheIndex(i, j)


def _threshold(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"threshold must be an integer or 'inf', got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("threshold must be non-negative")
    return value


def load_evolution_config(path) -> dict:
    doc = read_json(path)
    if "schema" in doc:
        if doc["schema"] == "hanabi_qd.run_config":
            doc = doc.get("evolution", {})
        else:
            from .io import check_schema

            check_schema(doc, "evolution_config")
            doc = {k: v for k, v in doc.items() if k not in ("schema", "version")}
    return doc


# --------------------------------------------------------------------------- commands

def cmd_evolve(args) -> int:
    out = Path(args.out or os.environ.get(ENV_OUT) or "")
    if not str(out):
        raise UsageError(f"--out is required (or set {ENV_OUT})")
    settings = load_evolution_config(args.config) if args.config else {}
    overrides = {"master_seed": args.seed, "total_candidates": args.generations,
                 "games_per_eval": args.games_per_eval, "checkpoint_every": args.checkpoint_every,
                 "random_phase": args.random_phase}
    settings.update({k: v for k, v in overrides.items() if v is not None})
    config = EvolutionConfig.from_json(settings)
    threads = _set_threads(args.threads)
    out.mkdir(parents=True, exist_ok=True)
    checkpoint = out / "checkpoint.json"
    resume = None
    if args.resume:
        if not checkpoint.exists():
            raise FileNotFoundError(f"no checkpoint to resume from at {checkpoint}")
        resume = Archive.load(checkpoint)
        log.info("resuming at generation %d", resume.generation)
    _snapshot(out / "config.json", "evolve", args, {"evolution": config.to_json()})

    def progress(archive, placement):
        if archive.generation % max(1, config.total_candidates // 20) == 0:
            log.info("generation %d coverage %d", archive.generation, archive.coverage)

    archive = run(config, resume=resume, checkpoint=checkpoint, threads=threads, progress=progress)
    archive.save(out / "archive.json")
    atomic_write_text(out / "heatmap.csv", export_heatmap(archive))
    best = f"{archive.best()[1].fitness:.3f}" if archive.cells else "n/a"
    print(f"coverage {archive.coverage}/{config.bins ** 2}, best fitness {best}")
    return 0


def cmd_reeval(args) -> int:
    archive = Archive.load(args.archive)
    out = _out_path(args, "reeval.csv")
    rows = reevaluate(archive, args.games, args.seed, threads=_set_threads(args.threads))
    atomic_write_text(out, csv_text(["i", "j", "recorded", "mean", "sd", "sem", "n"],
                                    [[r.cell.i, r.cell.j, repr(r.recorded), repr(r.mean),
                                      repr(r.sd), repr(r.sem), r.n] for r in rows], kind="reeval"))
    _snapshot(_config_path_for(out), "reeval", args)
    top = max(rows, key=lambda r: r.mean)
    print(f"{len(rows)} elites; best {top.mean:.3f} (s.e.m. {top.sem:.3f}) at {tuple(top.cell)}; "
          f"max SD {max(r.sd for r in rows):.3f}")
    return 0


def cmd_crossplay(args) -> int:
    archive = Archive.load(args.archive)
    threads = _set_threads(args.threads)
    seed = archive.config.master_seed if args.seed is None else args.seed
    if args.archive_b:
        other = Archive.load(args.archive_b)
        out = _out_path(args, "corresponding.csv")
        rows, overall = corresponding_pairs(archive, other, args.games, master_seed=seed,
                                            threads=threads)
        atomic_write_text(out, corresponding_csv(rows))
        summary = "n/a" if overall is None else f"{overall:.3f}"
        print(f"{len(rows)} corresponding pairs, mean cross-play {summary}")
    else:
        out = _out_path(args, "matrix.csv")
        matrix = matchup_matrix(archive, args.games, master_seed=seed,
                                population=args.population or Path(args.archive).stem,
                                threads=threads)
        matrix.save(out)
        print(f"{len(matrix.pairs)} pairs over {matrix.coverage} elites")
    _snapshot(_config_path_for(out), "crossplay", args)
    return 0


def cmd_respond(args) -> int:
    archive = Archive.load(args.archive)
    matrix = MatchupMatrix.load(args.matrix)
    missing = [c for c in matrix.cells if c not in archive]
    if missing:
        raise ValueError(f"matrix niches missing from the archive: {[tuple(c) for c in missing[:3]]}")
    table = response_table(matrix, archive.bins)
    out = _out_path(args, "table.json")
    table.save(out)
    _snapshot(_config_path_for(out), "respond", args)
    print(f"generalist {tuple(table.generalist)}; {len(table.responses)} responses")
    return 0


def cmd_meta_eval(args) -> int:
    from .meta import ResponseTable

    archive = Archive.load(args.archive)
    table = ResponseTable.load(args.table)
    partners = Archive.load(args.opponents)
    cells = partners.occupied()
    if args.partners is not None and args.partners < len(cells):
        rng = np.random.default_rng(args.seed)
        picks = sorted(rng.choice(len(cells), size=args.partners, replace=False))
        cells = [cells[k] for k in picks]
    config = MetaConfig(args.mode, args.threshold, not args.no_partner_id)
    report = meta_evaluate(table, archive, partners, config, args.games, cells=cells,
                           master_seed=args.seed, threads=_set_threads(args.threads))
    out = _out_path(args, "meta.json")
    write_json(out, report.to_json())
    atomic_write_text(out.with_suffix(".csv"), report.csv())
    _snapshot(_config_path_for(out), "meta-eval", args)
    print(f"{args.mode}: mean {report.mean:.3f} (s.e.m. {report.sem:.3f}) over {len(cells)} partners")
    err = report.estimation_errors()
    if err:
        print(f"estimation MAE: IPP {err['mae_ipp']:.3f} (bias {err['bias_ipp']:+.3f}), "
              f"Communicativeness {err['mae_comm']:.3f} (bias {err['bias_comm']:+.3f})")
    return 0


def cmd_analyze(args) -> int:
    archive = Archive.load(args.archive)
    if args.mode == "heatmap":
        out = _out_path(args, "heatmap.csv")
        atomic_write_text(out, export_heatmap(archive, args.value))
        print(f"wrote {archive.bins}x{archive.bins} grid")
    else:
        if not args.archive_b:
            raise UsageError(f"--archive-b is required for --mode {args.mode}")
        other = Archive.load(args.archive_b)
        if args.mode == "hamming":
            out = _out_path(args, "hamming.csv")
            rows, mean = hamming_report(archive, other)
            atomic_write_text(out, csv_text(["i", "j", "hamming"],
                                            [[c.i, c.j, d] for c, d in rows], kind="hamming"))
            print(f"{len(rows)} common niches, mean Hamming distance "
                  f"{'n/a' if mean is None else f'{mean:.3f}'}")
        else:
            out = _out_path(args, "agreement.csv")
            if args.corpus and Path(args.corpus).exists():
                corpus = StateCorpus.load(args.corpus)
            else:
                corpus = collect_states(archive, args.games_per_elite, args.seed)
                if args.corpus:
                    corpus.save(args.corpus)
            report = action_agreement(archive, other, corpus)
            atomic_write_text(out, report.csv())
            write_json(out.with_suffix(".json"), report.to_json())
            mean = "n/a" if report.mean is None else f"{report.mean:.3f}"
            print(f"{report.n_states} states, {len(report.rows)} common niches, "
                  f"mean agreement {mean}, random baseline {report.random_baseline or 0:.3f}")
    _snapshot(_config_path_for(out), "analyze", args)
    return 0


def cmd_play(args) -> int:
    archive = Archive.load(args.archive)
    first = archive[args.niche]
    second = archive[args.partner] if args.partner else first
    agents = [ChromosomeAgent(first.chromosome, f"elite{tuple(args.niche)}"),
              ChromosomeAgent(second.chromosome, f"elite{tuple(args.partner or args.niche)}")]
    record = play_game(agents, args.seed, GameConfig(2))
    if args.out or os.environ.get(ENV_OUT):
        out = _out_path(args, "game.jsonl")
        atomic_write_text(out, record.to_jsonl())
    print(f"score {record.score} in {len(record)} turns")
    return 0


# --------------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    threads = _default_threads()
    parser = argparse.ArgumentParser(prog="hanabi-qd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--out", help=f"output path (default: under ${ENV_OUT})")
        p.add_argument("--threads", type=int, default=threads,
                       help=f"worker threads (default ${ENV_THREADS} or 1; 1 is bit-reproducible)")
        return p

    p = add("evolve", cmd_evolve, "run MAP-Elites and write the archive")
    p.add_argument("--config", help="JSON file with evolution settings")
    p.add_argument("--seed", type=int, help="master seed (overrides the config file)")
    p.add_argument("--generations", type=int, help="total candidates G")
    p.add_argument("--games-per-eval", type=int)
    p.add_argument("--random-phase", type=int)
    p.add_argument("--checkpoint-every", type=int)
    p.add_argument("--resume", action="store_true", help="continue from OUT/checkpoint.json")

    p = add("reeval", cmd_reeval, "re-evaluate every elite on fresh seeds")
    p.add_argument("--archive", required=True)
    p.add_argument("--games", type=int, default=1000)
    p.add_argument("--seed", type=int, help="seed for the fresh games (default: archive seed)")

    p = add("crossplay", cmd_crossplay, "match-up matrix, or corresponding pairs with --archive-b")
    p.add_argument("--archive", required=True)
    p.add_argument("--archive-b")
    p.add_argument("--games", type=int, default=DEFAULT_GAMES_PER_PAIR)
    p.add_argument("--seed", type=int)
    p.add_argument("--population", help="label stored with the matrix")

    p = add("respond", cmd_respond, "generalist and response table from a matrix")
    p.add_argument("--matrix", required=True)
    p.add_argument("--archive", required=True)

    p = add("meta-eval", cmd_meta_eval, "evaluate the meta-agent against a partner population")
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--archive", required=True)
    p.add_argument("--opponents", required=True)
    p.add_argument("--games", type=int, default=1000)
    p.add_argument("--threshold", type=_threshold, default=0, help="partner turns, or 'inf'")
    p.add_argument("--no-partner-id", action="store_true",
                   help="forget the partner model between games")
    p.add_argument("--partners", type=int, help="sample this many partner niches")
    p.add_argument("--seed", type=int, default=0)

    p = add("analyze", cmd_analyze, "Hamming, action agreement or heatmap export")
    p.add_argument("--mode", choices=("hamming", "agreement", "heatmap"), required=True)
    p.add_argument("--archive", required=True)
    p.add_argument("--archive-b")
    p.add_argument("--corpus", help="state corpus (JSON-Lines); collected and saved if missing")
    p.add_argument("--games-per-elite", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--value", choices=("fitness", "ipp", "communicativeness"), default="fitness")

    p = add("play", cmd_play, "play and record one game between archive elites")
    p.add_argument("--archive", required=True)
    p.add_argument("--niche", type=_parse_cell, required=True, help="seat 0 elite as i,j")
    p.add_argument("--partner", type=_parse_cell, help="seat 1 elite (default: same)")
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    try:
        parser = build_parser()
    except UsageError as exc:
        print(f"hanabi-qd: error: {exc}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors (2), --help and --version (0)
        return exc.code if isinstance(exc.code, int) else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"hanabi-qd: error: {exc}", file=sys.stderr)
        return 2
    except (GameError, SchemaError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"hanabi-qd: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

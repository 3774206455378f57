"""Cross-play between elites: single pairings, full match-up matrices within a
population, and same-niche comparisons across two populations."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import kernel
from .io import atomic_write_text, csv_text, dumps, read_csv, read_json, tag, check_schema
from .map_elites import Archive, score_summary
from .metrics import NicheIndex
from .rng import seed_list

DEFAULT_GAMES_PER_PAIR = 400


class PairResult(NamedTuple):
    mean: float
    sd: float
    n: int

    @property
    def sem(self) -> float:
        return self.sd / np.sqrt(self.n)


def cross_play(chrom_a, chrom_b, seeds, *, mirror: bool = False, threads: int = 1) -> PairResult:
    """A in seat 0 and B in seat 1 (swapped with ``mirror``); who starts is
    drawn from each game's seed."""
    rows = (1, 0) if mirror else (0, 1)
    seat_rows = np.tile(np.array(rows, dtype=np.int64), (len(seeds), 1))
    scores, _, _ = kernel.simulate([chrom_a, chrom_b], seeds, seat_rows, threads=threads)
    mean, sd, _ = score_summary(scores)
    return PairResult(mean, sd, len(scores))


def _ordered(a: NicheIndex, b: NicheIndex) -> tuple[NicheIndex, NicheIndex]:
    return (a, b) if a <= b else (b, a)


@dataclass
class MatchupMatrix:
    """Mean cross-play score for every unordered pair of occupied niches."""

    cells: list[NicheIndex]
    games_per_pair: int
    master_seed: int = 0
    population: str = ""
    pairs: dict[tuple[NicheIndex, NicheIndex], PairResult] = field(default_factory=dict)

    @property
    def coverage(self) -> int:
        return len(self.cells)

    def pair_seeds(self, a, b) -> list[int]:
        a, b = _ordered(NicheIndex(*a), NicheIndex(*b))
        return seed_list(self.master_seed, self.games_per_pair, "matrix", a.i, a.j, b.i, b.j)

    def result(self, a, b) -> PairResult:
        return self.pairs[_ordered(NicheIndex(*a), NicheIndex(*b))]

    def score(self, a, b) -> float:
        return self.result(a, b).mean

    def as_array(self) -> np.ndarray:
        """Dense symmetric matrix in ``self.cells`` order."""
        n = len(self.cells)
        out = np.empty((n, n))
        for x, a in enumerate(self.cells):
            for y in range(x, n):
                out[x, y] = out[y, x] = self.score(a, self.cells[y])
        return out

    def is_complete(self) -> bool:
        n = len(self.cells)
        return len(self.pairs) == n * (n + 1) // 2

    def csv(self) -> str:
        rows = []
        for (a, b) in sorted(self.pairs):
            r = self.pairs[(a, b)]
            rows.append([a.i, a.j, b.i, b.j, repr(r.mean), repr(r.sd), r.n])
        return csv_text(["iA", "jA", "iB", "jB", "mean", "sd", "n"], rows, kind="matrix")

    def summary(self) -> dict:
        diag = [self.score(c, c) for c in self.cells]
        off = [r.mean for (a, b), r in self.pairs.items() if a != b]
        return tag("matrix_summary", {
            "population": self.population,
            "games_per_pair": self.games_per_pair,
            "master_seed": self.master_seed,
            "coverage": self.coverage,
            "pairs": len(self.pairs),
            "mean_self_play": float(np.mean(diag)) if diag else None,
            "mean_cross_play": float(np.mean(off)) if off else None,
            "cells": [list(c) for c in self.cells],
        })

    def save(self, path) -> Path:
        """CSV at ``path`` plus a JSON summary next to it."""
        path = Path(path)
        atomic_write_text(path, self.csv())
        atomic_write_text(path.with_suffix(".json"), dumps(self.summary()))
        return path

    @classmethod
    def load(cls, path) -> MatchupMatrix:
        path = Path(path)
        rows = read_csv(path, "matrix")
        meta = {}
        summary_path = path.with_suffix(".json")
        if summary_path.exists():
            meta = check_schema(read_json(summary_path), "matrix_summary")
        pairs = {}
        cells = set()
        games = 0
        for r in rows:
            a = NicheIndex(int(r["iA"]), int(r["jA"]))
            b = NicheIndex(int(r["iB"]), int(r["jB"]))
            pairs[_ordered(a, b)] = PairResult(float(r["mean"]), float(r["sd"]), int(r["n"]))
            cells.update((a, b))
            games = max(games, int(r["n"]))
        return cls(sorted(cells), meta.get("games_per_pair", games), meta.get("master_seed", 0),
                   meta.get("population", ""), pairs)


def matchup_matrix(archive: Archive, games_per_pair: int = DEFAULT_GAMES_PER_PAIR, *,
                   master_seed: int | None = None, population: str = "", threads: int = 1,
                   cells=None) -> MatchupMatrix:
    """Cross-play every unordered pair of occupied niches (self-pairs included).

    Pair (a, b) with a <= b plays with a in seat 0 on its own seed list, so the
    result does not depend on the order pairs are visited in. ``cells``
    restricts the population to a subset of occupied niches.
    """
    if not archive.cells:
        raise ValueError("match-up matrix needs a non-empty archive")
    master = archive.config.master_seed if master_seed is None else master_seed
    cells = archive.occupied() if cells is None else sorted(NicheIndex(*c) for c in cells)
    matrix = MatchupMatrix(cells, games_per_pair, master, population)
    for x, a in enumerate(cells):
        for b in cells[x:]:
            seeds = matrix.pair_seeds(a, b)
            matrix.pairs[(a, b)] = cross_play(archive[a].chromosome, archive[b].chromosome, seeds,
                                              threads=threads)
    return matrix


@dataclass(frozen=True)
class CorrespondingRow:
    cell: NicheIndex
    mean: float
    sd: float
    n: int

    def to_row(self) -> list:
        return [self.cell.i, self.cell.j, repr(self.mean), repr(self.sd), self.n]


def corresponding_pairs(archive_a: Archive, archive_b: Archive, n_games: int = 1000, *,
                        master_seed: int = 0, threads: int = 1) -> tuple[list[CorrespondingRow], float | None]:
    """Cross-play the two elites of every niche occupied in both archives.

    Returns the per-niche rows and their overall mean (None when no niche is shared).
    """
    if archive_a.bins != archive_b.bins:
        raise ValueError("archives use different grids")
    common = sorted(set(archive_a.cells) & set(archive_b.cells))
    rows = []
    for cell in common:
        seeds = seed_list(master_seed, n_games, "corresponding", cell.i, cell.j)
        r = cross_play(archive_a[cell].chromosome, archive_b[cell].chromosome, seeds,
                       threads=threads)
        rows.append(CorrespondingRow(cell, r.mean, r.sd, r.n))
    overall = float(np.mean([r.mean for r in rows])) if rows else None
    return rows, overall


def corresponding_csv(rows: list[CorrespondingRow]) -> str:
    return csv_text(["i", "j", "mean", "sd", "n"], [r.to_row() for r in rows],
                    kind="corresponding")

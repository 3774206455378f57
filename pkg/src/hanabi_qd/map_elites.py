"""MAP-Elites over rule chromosomes with seed-matched incumbent re-evaluation.

Each generation draws a fresh seed list; the candidate plays self-play games on
it, and if its niche is already held, the incumbent is re-run on the very same
seeds so that the comparison is paired. Archive updates go through
``try_insert``, which also checks the archive invariants after every change.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from . import kernel
from .engine import ConfigError
from .io import check_schema, csv_text, atomic_write_text, dumps, read_json, tag
from .metrics import (DEFAULT_BINS, BehaviorDescriptor, NicheIndex, PlayStats, descriptor,
                      is_defined, niche)
from .rng import derive_seed, seed_list
from .rules import CHROMOSOME_LENGTH, N_RULES, catalog_hash, validate_chromosome

INSERTED, REPLACED, KEPT, REJECTED = "inserted", "replaced", "kept", "rejected"


class ArchiveInvariantError(AssertionError):
    pass


@dataclass(frozen=True)
class EvolutionConfig:
    total_candidates: int = 10**6
    random_phase: int | None = None  # default: min(10^4, total_candidates)
    games_per_eval: int = 100
    mutation_rate: float = 0.1
    crossover_prob: float = 0.5
    chromosome_length: int = CHROMOSOME_LENGTH
    bins: int = DEFAULT_BINS
    master_seed: int = 0
    checkpoint_every: int = 10**4

    def __post_init__(self):
        if self.random_phase is None:
            object.__setattr__(self, "random_phase", min(10**4, self.total_candidates))
        if self.total_candidates < 0:
            raise ConfigError("total_candidates must be >= 0")
        if not 0 <= self.random_phase <= self.total_candidates:
            raise ConfigError(
                f"random_phase ({self.random_phase}) must lie in [0, total_candidates]")
        if self.games_per_eval < 1:
            raise ConfigError("games_per_eval must be >= 1")
        for name in ("mutation_rate", "crossover_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must be a probability, got {getattr(self, name)}")
        if self.chromosome_length != CHROMOSOME_LENGTH:
            raise ConfigError(f"chromosome_length is fixed at {CHROMOSOME_LENGTH} by the kernel")
        if self.bins < 1:
            raise ConfigError("bins must be >= 1")
        if self.checkpoint_every < 1:
            raise ConfigError("checkpoint_every must be >= 1")

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> EvolutionConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown evolution settings: {sorted(unknown)}")
        return cls(**data)


class FitnessResult(NamedTuple):
    mean: float
    stats: PlayStats  # pooled over every seat of every game
    scores: tuple[int, ...]

    @property
    def defined(self) -> bool:
        return is_defined(self.stats)

    @property
    def descriptor(self) -> BehaviorDescriptor:
        return descriptor(self.stats)


@dataclass
class ArchiveEntry:
    chromosome: tuple[int, ...]
    fitness: float
    descriptor: BehaviorDescriptor
    stats: PlayStats
    eval_seeds: list[int]
    games_played: int
    born: int  # generation that produced this chromosome

    def to_json(self, cell: NicheIndex) -> dict:
        return {
            "i": cell.i,
            "j": cell.j,
            "chromosome": list(self.chromosome),
            "fitness": self.fitness,
            "ipp": self.descriptor.ipp,
            "communicativeness": self.descriptor.communicativeness,
            "stats": self.stats.to_json(),
            "eval_seeds": list(self.eval_seeds),
            "games_played": self.games_played,
            "born": self.born,
        }

    @classmethod
    def from_json(cls, d: dict) -> tuple[NicheIndex, ArchiveEntry]:
        entry = cls(
            chromosome=validate_chromosome(d["chromosome"]),
            fitness=float(d["fitness"]),
            descriptor=BehaviorDescriptor(float(d["ipp"]), float(d["communicativeness"])),
            stats=PlayStats.from_json(d["stats"]),
            eval_seeds=[int(s) for s in d["eval_seeds"]],
            games_played=int(d["games_played"]),
            born=int(d["born"]),
        )
        return NicheIndex(int(d["i"]), int(d["j"])), entry


@dataclass
class Archive:
    config: EvolutionConfig
    cells: dict[NicheIndex, ArchiveEntry] = field(default_factory=dict)
    generation: int = 0
    rng_state: dict | None = None

    @property
    def bins(self) -> int:
        return self.config.bins

    @property
    def coverage(self) -> int:
        return len(self.cells)

    def occupied(self) -> list[NicheIndex]:
        return sorted(self.cells)

    def __getitem__(self, cell) -> ArchiveEntry:
        return self.cells[NicheIndex(*cell)]

    def __contains__(self, cell) -> bool:
        return NicheIndex(*cell) in self.cells

    def __len__(self):
        return len(self.cells)

    def best(self) -> tuple[NicheIndex, ArchiveEntry]:
        """Highest recorded fitness; ties go to the smallest cell."""
        cell = max(self.occupied(), key=lambda c: (self.cells[c].fitness, -c.i, -c.j))
        return cell, self.cells[cell]

    def fitness_grid(self) -> np.ndarray:
        grid = np.full((self.bins, self.bins), np.nan)
        for cell, entry in self.cells.items():
            grid[cell] = entry.fitness
        return grid

    def to_json(self) -> dict:
        return tag("archive", {
            "config": self.config.to_json(),
            "catalog": catalog_hash(),
            "generation": self.generation,
            "rng_state": self.rng_state,
            "coverage": self.coverage,
            "entries": [self.cells[c].to_json(c) for c in self.occupied()],
        })

    @classmethod
    def from_json(cls, doc: dict) -> Archive:
        check_schema(doc, "archive")
        if doc.get("catalog") != catalog_hash():
            raise ConfigError("archive was built with a different rule catalog")
        archive = cls(EvolutionConfig.from_json(doc["config"]), generation=int(doc["generation"]),
                      rng_state=doc.get("rng_state"))
        for d in doc["entries"]:
            cell, entry = ArchiveEntry.from_json(d)
            archive.cells[cell] = entry
        return archive

    def csv(self) -> str:
        rows = []
        for c in self.occupied():
            e = self.cells[c]
            rows.append([c.i, c.j, repr(e.descriptor.ipp), repr(e.descriptor.communicativeness),
                         repr(e.fitness), " ".join(map(str, e.chromosome))])
        return csv_text(["i", "j", "ipp", "communicativeness", "fitness", "chromosome"], rows,
                        kind="archive_flat")

    def save(self, path) -> Path:
        """Write ``path`` (JSON) and the flat CSV view next to it."""
        path = Path(path)
        atomic_write_text(path, dumps(self.to_json()))
        atomic_write_text(path.with_suffix(".csv"), self.csv())
        return path

    @classmethod
    def load(cls, path) -> Archive:
        return cls.from_json(read_json(path))


# --------------------------------------------------------------------------- operators

def evolution_rng(config: EvolutionConfig) -> np.random.Generator:
    return np.random.default_rng(derive_seed(config.master_seed, "evolution"))


def generation_seeds(config: EvolutionConfig, generation: int) -> list[int]:
    return seed_list(config.master_seed, config.games_per_eval, "evaluation", generation)


def new_chromosome(archive: Archive, generation: int, rng: np.random.Generator) -> tuple[int, ...]:
    cfg = archive.config
    length = cfg.chromosome_length
    occupied = archive.occupied()
    if generation < cfg.random_phase or not occupied:
        return tuple(int(g) for g in rng.integers(0, N_RULES, size=length))
    parent = np.array(archive.cells[occupied[rng.integers(len(occupied))]].chromosome)
    if rng.random() < cfg.crossover_prob:
        other = np.array(archive.cells[occupied[rng.integers(len(occupied))]].chromosome)
        parent = np.where(rng.random(length) < 0.5, other, parent)
    mutate = rng.random(length) < cfg.mutation_rate
    child = parent.copy()
    child[mutate] = rng.integers(0, N_RULES, size=int(mutate.sum()))
    return tuple(int(g) for g in child)


def fitness(chromosome, seeds, threads: int = 1) -> FitnessResult:
    """Self-play mean score on ``seeds`` and PlayStats pooled over both seats."""
    scores, stats, _ = kernel.simulate([chromosome], seeds, threads=threads)
    pooled = PlayStats(*(int(v) for v in stats.sum(axis=(0, 1))))
    return FitnessResult(float(scores.mean()), pooled, tuple(int(s) for s in scores))


class Placement(NamedTuple):
    outcome: str
    cell: NicheIndex | None
    candidate: float
    incumbent: float | None = None  # incumbent's mean on the same seeds
    rewritten: bool = True  # False when a kept incumbent's record was left as it was


def try_insert(archive: Archive, chromosome, result: FitnessResult, seeds, generation: int,
               threads: int = 1) -> Placement:
    """Place a candidate evaluated on ``seeds``.

    Rejected when its fitness is not positive or its descriptor is undefined.
    An occupied cell's incumbent is replayed on ``seeds``; the candidate wins
    only with a strictly higher mean. Whichever survives records the fitness
    from this paired comparison (a kept incumbent only if its fresh
    descriptor still falls in the same cell).
    """
    chromosome = tuple(chromosome)
    if result.mean <= 0 or not result.defined:
        return Placement(REJECTED, None, result.mean)
    desc = result.descriptor
    cell = niche(desc, archive.bins)
    seeds = [int(s) for s in seeds]
    coverage_before = archive.coverage
    incumbent = archive.cells.get(cell)
    candidate = ArchiveEntry(chromosome, result.mean, desc, result.stats, seeds, len(seeds),
                             generation)
    if incumbent is None:
        archive.cells[cell] = candidate
        placement = Placement(INSERTED, cell, result.mean)
    else:
        rerun = fitness(incumbent.chromosome, seeds, threads)
        if result.mean > rerun.mean:
            archive.cells[cell] = candidate
            placement = Placement(REPLACED, cell, result.mean, rerun.mean)
        else:
            incumbent.games_played += len(seeds)
            same_cell = rerun.defined and niche(rerun.descriptor, archive.bins) == cell
            if same_cell:
                incumbent.fitness = rerun.mean
                incumbent.descriptor = rerun.descriptor
                incumbent.stats = rerun.stats
                incumbent.eval_seeds = seeds
            placement = Placement(KEPT, cell, result.mean, rerun.mean, same_cell)
    _check_update(archive, placement, coverage_before)
    return placement


def _check_update(archive: Archive, placement: Placement, coverage_before: int) -> None:
    """In-run guards: coverage never shrinks; the surviving record is at least
    the previous elite's score on the same seeds; entry and cell agree.

    A record that was not rewritten keeps the value it won with earlier."""
    if archive.coverage < coverage_before:
        raise ArchiveInvariantError("coverage decreased")
    entry = archive.cells[placement.cell]
    if entry.fitness <= 0:
        raise ArchiveInvariantError(f"non-positive fitness stored in {placement.cell}")
    if placement.rewritten and placement.incumbent is not None \
            and entry.fitness < placement.incumbent:
        raise ArchiveInvariantError(
            f"recorded fitness of {placement.cell} fell below the previous elite's paired score")
    if niche(entry.descriptor, archive.bins) != placement.cell:
        raise ArchiveInvariantError(f"entry descriptor does not map to {placement.cell}")


# --------------------------------------------------------------------------- loop

def run(config: EvolutionConfig, *, resume: Archive | None = None, checkpoint: str | Path | None = None,
        threads: int = 1, progress: Callable[[Archive, Placement], None] | None = None) -> Archive:
    """Run generations up to ``config.total_candidates``.

    With ``checkpoint`` set, the archive (including the evolution RNG state)
    is written there atomically every ``config.checkpoint_every`` generations,
    so a crash leaves the last good checkpoint intact. ``resume`` continues a
    checkpointed archive and gives the same result as an uninterrupted run.
    """
    if resume is not None:
        archive = resume
        if dataclasses.replace(archive.config, total_candidates=config.total_candidates,
                               random_phase=config.random_phase) != config:
            raise ConfigError("checkpoint was written with different evolution settings")
        archive.config = config
        rng = evolution_rng(config)
        if archive.rng_state is not None:
            rng.bit_generator.state = archive.rng_state
    else:
        archive = Archive(config)
        rng = evolution_rng(config)
    for gen in range(archive.generation, config.total_candidates):
        child = new_chromosome(archive, gen, rng)
        seeds = generation_seeds(config, gen)
        placement = try_insert(archive, child, fitness(child, seeds, threads), seeds, gen, threads)
        archive.generation = gen + 1
        if progress is not None:
            progress(archive, placement)
        if checkpoint is not None and archive.generation % config.checkpoint_every == 0:
            archive.rng_state = rng.bit_generator.state
            archive.save(checkpoint)
    archive.rng_state = rng.bit_generator.state
    return archive


# --------------------------------------------------------------------------- reports

@dataclass(frozen=True)
class ReevalRow:
    cell: NicheIndex
    recorded: float
    mean: float
    sd: float
    sem: float
    n: int

    def to_json(self) -> dict:
        return {"i": self.cell.i, "j": self.cell.j, "recorded": self.recorded,
                "mean": self.mean, "sd": self.sd, "sem": self.sem, "n": self.n}


def score_summary(scores) -> tuple[float, float, float]:
    """Mean, sample SD and s.e.m. (SD and s.e.m. are 0 for a single game)."""
    arr = np.asarray(scores, dtype=np.float64)
    n = len(arr)
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1)) if n > 1 else 0.0
    return mean, sd, sd / math.sqrt(n)


def reevaluate(archive: Archive, n: int = 1000, master_seed: int | None = None,
               threads: int = 1) -> list[ReevalRow]:
    """Play every elite ``n`` fresh self-play games; the archive is not changed."""
    if not archive.cells:
        raise ValueError("cannot re-evaluate an empty archive")
    master = archive.config.master_seed if master_seed is None else master_seed
    seeds = seed_list(master, n, "reeval")
    rows = []
    for cell in archive.occupied():
        entry = archive.cells[cell]
        scores, _, _ = kernel.simulate([entry.chromosome], seeds, threads=threads)
        mean, sd, sem = score_summary(scores)
        rows.append(ReevalRow(cell, entry.fitness, mean, sd, sem, n))
    return rows

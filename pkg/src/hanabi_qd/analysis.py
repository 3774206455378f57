"""Diversity diagnostics between populations: genotype distance (Hamming) and
phenotype similarity (how often two elites pick the same action on a shared
corpus of recorded states), plus grid exports for plotting."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import kernel
from .engine import GameState, deal
from .io import atomic_write_text, check_schema, csv_text, tag
from .map_elites import Archive
from .metrics import NicheIndex
from .rng import MASK64, SplitMix64, derive_seed, rule_rng, seed_list
from .rules import agent_act


def hamming(c1, c2) -> int:
    c1, c2 = tuple(c1), tuple(c2)
    if len(c1) != len(c2):
        raise ValueError(f"chromosome lengths differ: {len(c1)} vs {len(c2)}")
    return sum(a != b for a, b in zip(c1, c2))


def hamming_report(archive_a: Archive, archive_b: Archive) -> tuple[list[tuple[NicheIndex, int]], float | None]:
    """Hamming distance of the two elites in every niche occupied in both."""
    common = sorted(set(archive_a.cells) & set(archive_b.cells))
    rows = [(c, hamming(archive_a[c].chromosome, archive_b[c].chromosome)) for c in common]
    mean = float(np.mean([d for _, d in rows])) if rows else None
    return rows, mean


# --------------------------------------------------------------------------- corpus

class Snapshot(NamedTuple):
    """A non-terminal decision point: the full state before ``player`` acts."""

    state: GameState
    source: NicheIndex  # niche of the elite whose self-play game produced it
    seed: int
    turn: int

    @property
    def player(self) -> int:
        return self.state.current_player

    @property
    def key(self) -> int:
        """Identity that does not depend on the snapshot's position in a corpus."""
        return derive_seed(0, "snapshot", self.source.i, self.source.j, self.seed, self.turn)

    def to_json(self) -> dict:
        return {"source": list(self.source), "seed": self.seed, "turn": self.turn,
                "state": self.state.to_json()}

    @classmethod
    def from_json(cls, d: dict) -> Snapshot:
        return cls(GameState.from_json(d["state"]), NicheIndex(*d["source"]), int(d["seed"]),
                   int(d["turn"]))


@dataclass
class StateCorpus:
    snapshots: list[Snapshot]
    games_per_elite: int = 0
    master_seed: int = 0

    def __len__(self):
        return len(self.snapshots)

    def to_jsonl(self) -> str:
        head = tag("corpus", {"games_per_elite": self.games_per_elite,
                              "master_seed": self.master_seed, "count": len(self.snapshots)})
        lines = [head] + [s.to_json() for s in self.snapshots]
        return "".join(json.dumps(x, sort_keys=True, separators=(",", ":")) + "\n" for x in lines)

    @classmethod
    def from_jsonl(cls, text: str) -> StateCorpus:
        lines = [json.loads(x) for x in text.splitlines() if x.strip()]
        if not lines:
            raise ValueError("empty corpus file")
        head = check_schema(lines[0], "corpus")
        snaps = [Snapshot.from_json(d) for d in lines[1:]]
        if len(snaps) != head["count"]:
            raise ValueError(f"corpus header announces {head['count']} snapshots, found {len(snaps)}")
        return cls(snaps, head["games_per_elite"], head["master_seed"])

    def save(self, path) -> Path:
        return atomic_write_text(path, self.to_jsonl())

    @classmethod
    def load(cls, path) -> StateCorpus:
        return cls.from_jsonl(Path(path).read_text(encoding="utf-8"))


def self_play_snapshots(chromosome, seed: int, source: NicheIndex, config=None) -> list[Snapshot]:
    from .engine import GameConfig

    state, _ = deal(config or GameConfig(), seed)
    rng = rule_rng(seed)
    out = []
    while not state.is_terminal():
        out.append(Snapshot(state.copy(), source, seed, state.turn))
        state.step(agent_act(chromosome, state.view(state.current_player), rng))
    return out


def collect_states(archive: Archive, games_per_elite: int = 10, seed: int = 0) -> StateCorpus:
    """Every decision point of ``games_per_elite`` self-play games per elite,
    without de-duplication."""
    snaps = []
    for cell in archive.occupied():
        for game_seed in seed_list(seed, games_per_elite, "corpus", cell.i, cell.j):
            snaps.extend(self_play_snapshots(archive[cell].chromosome, game_seed, cell))
    return StateCorpus(snaps, games_per_elite, seed)


# --------------------------------------------------------------------------- agreement

def agent_key(chromosome) -> int:
    """Stable 64-bit id of a chromosome, so equal policies share random draws."""
    digest = hashlib.blake2b(",".join(map(str, chromosome)).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def rule_seed(snapshot_key: int, chromosome) -> int:
    return (snapshot_key ^ agent_key(chromosome)) & MASK64


def actions_reference(chromosome, corpus: StateCorpus) -> list:
    """Actions of one chromosome on every snapshot via the Python rules."""
    return [agent_act(chromosome, s.state.view(s.player), SplitMix64(rule_seed(s.key, chromosome)))
            for s in corpus.snapshots]


class _Packed(NamedTuple):
    states: np.ndarray
    n_players: np.ndarray
    keys: np.ndarray  # uint64 snapshot keys


def _pack(corpus: StateCorpus) -> _Packed:
    if not corpus.snapshots:
        return _Packed(np.zeros((0, kernel.STATE_SIZE), np.int64), np.zeros(0, np.int64),
                       np.zeros(0, np.uint64))
    return _Packed(np.stack([kernel.state_array(s.state) for s in corpus.snapshots]),
                   np.array([s.state.n_players for s in corpus.snapshots], dtype=np.int64),
                   np.array([s.key for s in corpus.snapshots], dtype=np.uint64))


def corpus_actions(chromosomes, corpus: StateCorpus, packed: _Packed | None = None) -> np.ndarray:
    """Kernel action codes, shape (len(chromosomes), len(corpus))."""
    packed = packed or _pack(corpus)
    chromosomes = [tuple(c) for c in chromosomes]
    if not chromosomes or not len(packed.keys):
        return np.zeros((len(chromosomes), len(packed.keys)), np.int64)
    agents = np.array([agent_key(c) for c in chromosomes], dtype=np.uint64)
    seeds = np.bitwise_xor.outer(agents, packed.keys)  # rule_seed for every pair
    return kernel.act_on_states(chromosomes, packed.states, packed.n_players, seeds)


@dataclass
class AgreementReport:
    rows: list[tuple[NicheIndex, float]]
    n_states: int
    mean_legal_actions: float | None
    random_baseline: float | None  # expected agreement of two uniform-random agents

    @property
    def mean(self) -> float | None:
        return float(np.mean([a for _, a in self.rows])) if self.rows else None

    def csv(self) -> str:
        return csv_text(["i", "j", "agreement", "states"],
                        [[c.i, c.j, repr(a), self.n_states] for c, a in self.rows],
                        kind="agreement")

    def to_json(self) -> dict:
        return tag("agreement_report", {
            "states": self.n_states,
            "common_niches": len(self.rows),
            "mean_agreement": self.mean,
            "mean_legal_actions": self.mean_legal_actions,
            "random_baseline": self.random_baseline,
        })


def legal_action_counts(corpus: StateCorpus) -> list[int]:
    return [len(s.state.legal_actions()) for s in corpus.snapshots]


def action_agreement(archive_a: Archive, archive_b: Archive, corpus: StateCorpus) -> AgreementReport:
    """Fraction of corpus states on which the two elites of each shared niche
    choose the identical action."""
    if archive_a.bins != archive_b.bins:
        raise ValueError("archives use different grids")
    common = sorted(set(archive_a.cells) & set(archive_b.cells))
    packed = _pack(corpus)
    n = len(corpus)
    rows = []
    if n and common:
        acts_a = corpus_actions([archive_a[c].chromosome for c in common], corpus, packed)
        acts_b = corpus_actions([archive_b[c].chromosome for c in common], corpus, packed)
        for k, cell in enumerate(common):
            rows.append((cell, float(np.mean(acts_a[k] == acts_b[k]))))
    counts = legal_action_counts(corpus)
    mean_legal = float(np.mean(counts)) if counts else None
    baseline = float(np.mean([1.0 / k for k in counts])) if counts else None
    return AgreementReport(rows, n, mean_legal, baseline)


# --------------------------------------------------------------------------- exports

def export_heatmap(archive: Archive, value: str = "fitness") -> str:
    """bins x bins CSV grid (row = IPP bin, column = Communicativeness bin);
    empty cells are blank."""
    if value not in ("fitness", "ipp", "communicativeness"):
        raise ValueError(f"unknown heatmap value {value!r}")
    rows = []
    for i in range(archive.bins):
        row = [i]
        for j in range(archive.bins):
            entry = archive.cells.get(NicheIndex(i, j))
            if entry is None:
                row.append("")
            elif value == "fitness":
                row.append(repr(entry.fitness))
            else:
                row.append(repr(getattr(entry.descriptor, value)))
        rows.append(row)
    return csv_text(["ipp_bin"] + [f"comm_{j}" for j in range(archive.bins)], rows, kind="heatmap")


def region_occupancy(archive: Archive, comm_below: float = 0.25, ipp_above: float = 0.75) -> tuple[int, int]:
    """(occupied, total) cells whose whole extent lies in Comm < comm_below and
    IPP > ipp_above."""
    b = archive.bins
    cells = [(i, j) for i in range(b) for j in range(b)
             if i / b >= ipp_above and (j + 1) / b <= comm_below]
    return sum(NicheIndex(*c) in archive.cells for c in cells), len(cells)


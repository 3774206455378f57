"""Generalist and response policies drawn from a match-up matrix, and a
meta-agent that picks between them while it watches its partner play.

Policy choice at every meta-agent turn:

* ``oracle``: the response to the partner's true niche.
* ``generalist``: always the generalist.
* ``adaptive``: once more than ``threshold`` partner turns have been observed
  and the partner's descriptor estimate is defined, the response to the
  estimated niche; before that, the generalist. Being confident leads to the
  specialised response, not to the generalist.

Estimated or true niches that hold no elite are mapped to the nearest occupied
niche (squared grid distance between cell centers, ties to the smallest cell).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import kernel
from .engine import ConfigError, PlayerView, Turn
from .evaluation import MatchupMatrix
from .io import atomic_write_text, check_schema, csv_text, dumps, read_json, tag
from .map_elites import Archive, score_summary
from .metrics import (BehaviorDescriptor, NicheIndex, PlayStats, descriptor, is_defined, niche,
                      record_turn)
from .rng import SplitMix64, seed_list
from .rules import agent_act

ORACLE, GENERALIST, ADAPTIVE = "oracle", "generalist", "adaptive"
MODES = (ORACLE, GENERALIST, ADAPTIVE)


# --------------------------------------------------------------------------- matrix policies

def intra_score(matrix: MatchupMatrix, cell) -> float:
    """Mean score of ``cell`` paired with every occupied niche, itself included."""
    cell = NicheIndex(*cell)
    if cell not in matrix.cells:
        raise KeyError(f"niche {tuple(cell)} is not occupied")
    total = 0.0
    for partner in matrix.cells:
        total += matrix.score(cell, partner)
    return total / len(matrix.cells)


def _argmax_cell(cells, value) -> NicheIndex:
    """First cell (in lexicographic order) with the largest value."""
    best = None
    best_value = -math.inf
    for c in sorted(cells):
        v = value(c)
        if v > best_value:
            best, best_value = c, v
    return best


def generalist(matrix: MatchupMatrix) -> NicheIndex:
    if not matrix.cells:
        raise ValueError("generalist of an empty population")
    return _argmax_cell(matrix.cells, lambda c: intra_score(matrix, c))


@dataclass
class ResponseTable:
    generalist: NicheIndex
    responses: dict[NicheIndex, NicheIndex]
    bins: int
    population: str = ""

    def response(self, partner) -> NicheIndex:
        """Response to ``partner``, going through its nearest occupied niche."""
        return self.responses[nearest_occupied(partner, self.responses)]

    def lookup(self) -> np.ndarray:
        """bins x bins grid of response cells for every (estimated) niche."""
        out = np.empty((self.bins, self.bins, 2), dtype=np.int64)
        for i in range(self.bins):
            for j in range(self.bins):
                out[i, j] = self.response((i, j))
        return out

    def to_json(self) -> dict:
        return tag("response_table", {
            "population": self.population,
            "bins": self.bins,
            "generalist": list(self.generalist),
            "responses": [{"partner": list(p), "response": list(r)}
                          for p, r in sorted(self.responses.items())],
        })

    @classmethod
    def from_json(cls, doc: dict) -> ResponseTable:
        check_schema(doc, "response_table")
        responses = {NicheIndex(*e["partner"]): NicheIndex(*e["response"])
                     for e in doc["responses"]}
        table = cls(NicheIndex(*doc["generalist"]), responses, int(doc["bins"]),
                    doc.get("population", ""))
        table.validate()
        return table

    def validate(self, archive: Archive | None = None) -> None:
        occupied = set(self.responses)
        if self.generalist not in occupied:
            raise ValueError("generalist niche is not among the occupied niches")
        for r in self.responses.values():
            if r not in occupied:
                raise ValueError(f"response {tuple(r)} is not an occupied niche")
        if archive is not None:
            missing = [c for c in occupied if c not in archive]
            if missing:
                raise ValueError(f"table refers to niches missing from the archive: {missing[:3]}")

    def segments_csv(self) -> str:
        rows = [[p.i, p.j, r.i, r.j] for p, r in sorted(self.responses.items())]
        return csv_text(["m", "n", "i_response", "j_response"], rows, kind="response_segments")

    def save(self, path) -> Path:
        path = Path(path)
        atomic_write_text(path, dumps(self.to_json()))
        atomic_write_text(path.with_name(path.stem + "_segments.csv"), self.segments_csv())
        return path

    @classmethod
    def load(cls, path) -> ResponseTable:
        return cls.from_json(read_json(path))


def response_table(matrix: MatchupMatrix, bins: int = 20) -> ResponseTable:
    if not matrix.cells:
        raise ValueError("response table of an empty population")
    responses = {p: _argmax_cell(matrix.cells, lambda c, p=p: matrix.score(c, p))
                 for p in matrix.cells}
    return ResponseTable(generalist(matrix), responses, bins, matrix.population)


def nearest_occupied(cell, occupied) -> NicheIndex:
    cell = NicheIndex(*cell)
    if cell in occupied:
        return cell
    if not occupied:
        raise ValueError("no occupied niche to map to")
    return min(sorted(occupied), key=lambda c: (c.i - cell.i) ** 2 + (c.j - cell.j) ** 2)


# --------------------------------------------------------------------------- partner model

@dataclass
class PartnerModel:
    partner_id: object = None
    stats: PlayStats = field(default_factory=PlayStats)
    turns_observed: int = 0


def update_partner_model(model: PartnerModel, turn: Turn) -> PartnerModel:
    """Fold one observed partner turn (public events only) into the model."""
    return PartnerModel(model.partner_id, record_turn(model.stats, turn), model.turns_observed + 1)


class Estimate(NamedTuple):
    niche: NicheIndex | None
    descriptor: BehaviorDescriptor | None
    confidence: int


def estimate_niches(model: PartnerModel, bins: int = 20) -> Estimate:
    """Partner niche from its observed stats; confidence is the number of
    partner turns seen, or 0 while the descriptor is undefined."""
    if not is_defined(model.stats):
        return Estimate(None, None, 0)
    desc = descriptor(model.stats)
    return Estimate(niche(desc, bins), desc, model.turns_observed)


# --------------------------------------------------------------------------- meta-agent

@dataclass(frozen=True)
class MetaConfig:
    mode: str = ADAPTIVE
    threshold: float = 0  # partner turns; math.inf never switches
    persist: bool = True  # pool partner stats across games (partner ids enabled)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown meta-agent mode {self.mode!r}; expected one of {MODES}")
        if not (self.threshold == math.inf or (self.threshold >= 0 and
                                                float(self.threshold).is_integer())):
            raise ConfigError("threshold must be a non-negative integer or infinity")

    def to_json(self) -> dict:
        return {"mode": self.mode,
                "threshold": None if self.threshold == math.inf else int(self.threshold),
                "persist": self.persist}


def choose_policy(table: ResponseTable, model: PartnerModel, config: MetaConfig,
                  true_niche=None) -> NicheIndex:
    """Niche whose elite the meta-agent imitates this turn."""
    if config.mode == ORACLE:
        if true_niche is None:
            raise ConfigError("oracle mode needs the partner's true niche")
        return table.response(true_niche)
    if config.mode == GENERALIST:
        return table.generalist
    est = estimate_niches(model, table.bins)
    if est.niche is not None and est.confidence > config.threshold:
        return table.response(est.niche)
    return table.generalist


def meta_act(view: PlayerView, table: ResponseTable, archive: Archive, model: PartnerModel,
             config: MetaConfig, true_niche=None, rng: SplitMix64 | None = None):
    cell = choose_policy(table, model, config, true_niche)
    return agent_act(archive[cell].chromosome, view, rng)


class MetaAgent:
    """Two-player meta-agent for ``records.play_game``.

    Partner models are kept per partner id; call ``set_partner`` before a
    game to name the partner (and, for oracle mode, give its true niche).
    """

    def __init__(self, table: ResponseTable, archive: Archive, config: MetaConfig,
                 name: str = "meta"):
        table.validate(archive)
        self.table = table
        self.archive = archive
        self.config = config
        self.name = name
        self.models: dict[object, PartnerModel] = {}
        self.partner_id = None
        self.true_niche = None
        self.seat = 0
        self.policy_log: list[NicheIndex] = []

    def set_partner(self, partner_id, true_niche=None) -> None:
        self.partner_id = partner_id
        self.true_niche = true_niche

    @property
    def model(self) -> PartnerModel:
        return self.models.setdefault(self.partner_id, PartnerModel(self.partner_id))

    def begin_game(self, seat: int, n_players: int) -> None:
        if n_players != 2:
            raise ConfigError("the meta-agent plays two-player games only")
        self.seat = seat
        if not self.config.persist:
            self.models[self.partner_id] = PartnerModel(self.partner_id)

    def observe(self, turn: Turn) -> None:
        if turn.player != self.seat:
            self.models[self.partner_id] = update_partner_model(self.model, turn)

    def act(self, view: PlayerView, rng: SplitMix64):
        cell = choose_policy(self.table, self.model, self.config, self.true_niche)
        self.policy_log.append(cell)
        return agent_act(self.archive[cell].chromosome, view, rng)


# --------------------------------------------------------------------------- evaluation

@dataclass(frozen=True)
class MetaRow:
    partner: NicheIndex
    mean: float
    sd: float
    n: int
    est_ipp: float | None = None
    est_comm: float | None = None
    true_ipp: float | None = None
    true_comm: float | None = None

    @property
    def sem(self) -> float:
        return self.sd / math.sqrt(self.n)

    def to_json(self) -> dict:
        return {"i": self.partner.i, "j": self.partner.j, "mean": self.mean, "sd": self.sd,
                "n": self.n, "est_ipp": self.est_ipp, "est_comm": self.est_comm,
                "true_ipp": self.true_ipp, "true_comm": self.true_comm}


@dataclass
class MetaReport:
    config: MetaConfig
    rows: list[MetaRow]

    @property
    def mean(self) -> float:
        return float(np.mean([r.mean for r in self.rows]))

    @property
    def sem(self) -> float:
        """s.e.m. of the mean over partners, pooling each partner's games."""
        k = len(self.rows)
        return math.sqrt(sum(r.sem ** 2 for r in self.rows)) / k

    def estimation_errors(self) -> dict | None:
        """Mean absolute error and mean signed error (estimate minus truth) of
        the final partner-descriptor estimates."""
        rows = [r for r in self.rows if r.est_ipp is not None and r.true_ipp is not None]
        if not rows:
            return None
        d_ipp = np.array([r.est_ipp - r.true_ipp for r in rows])
        d_comm = np.array([r.est_comm - r.true_comm for r in rows])
        return {"partners": len(rows),
                "mae_ipp": float(np.abs(d_ipp).mean()), "bias_ipp": float(d_ipp.mean()),
                "mae_comm": float(np.abs(d_comm).mean()), "bias_comm": float(d_comm.mean())}

    def to_json(self) -> dict:
        return tag("meta_report", {
            "config": self.config.to_json(),
            "mean": self.mean,
            "sem": self.sem,
            "estimation": self.estimation_errors(),
            "rows": [r.to_json() for r in self.rows],
        })

    def csv(self) -> str:
        head = ["i", "j", "mean", "sd", "n", "est_ipp", "est_comm", "true_ipp", "true_comm"]
        return csv_text(head, [[r.to_json()[h] for h in head] for r in self.rows],
                        kind="meta_rows")


def partner_seeds(master_seed: int, n_games: int, partner: NicheIndex) -> list[int]:
    return seed_list(master_seed, n_games, "meta", partner.i, partner.j)


def meta_evaluate(table: ResponseTable, archive: Archive, partners: Archive, config: MetaConfig,
                  n_games: int = 1000, *, cells=None, master_seed: int = 0,
                  threads: int = 1) -> MetaReport:
    """Score the meta-agent (seat 0) with each elite of ``partners`` (seat 1).

    ``cells`` selects a subset of partner niches. In oracle mode the partner's
    true niche is its niche in ``partners``. The partner's true descriptor for
    the estimation diagnostic is its stored archive descriptor.
    """
    table.validate(archive)
    cells = partners.occupied() if cells is None else [NicheIndex(*c) for c in cells]
    policy_cells = sorted(table.responses)
    index = {c: k for k, c in enumerate(policy_cells)}
    chroms = [archive[c].chromosome for c in policy_cells]
    lookup = np.vectorize(lambda i, j: index[table.response((i, j))])(
        *np.indices((table.bins, table.bins)))
    rows = []
    for cell in cells:
        partner = partners[cell]
        seeds = partner_seeds(master_seed, n_games, cell)
        est = (None, None)
        if config.mode == ADAPTIVE:
            scores, model, _ = kernel.simulate_meta(
                chroms + [partner.chromosome], len(chroms), index[table.generalist], lookup,
                config.threshold, config.persist, seeds)
            stats = PlayStats(*(int(v) for v in model[:4]))
            if is_defined(stats):
                est = tuple(descriptor(stats))
        else:
            own = table.response(cell) if config.mode == ORACLE else table.generalist
            seat_rows = np.tile(np.array([0, 1], dtype=np.int64), (n_games, 1))
            scores, _, _ = kernel.simulate([archive[own].chromosome, partner.chromosome], seeds,
                                           seat_rows, threads=threads)
        mean, sd, _ = score_summary(scores)
        rows.append(MetaRow(cell, mean, sd, n_games, est[0], est[1],
                            partner.descriptor.ipp, partner.descriptor.communicativeness))
    return MetaReport(config, rows)

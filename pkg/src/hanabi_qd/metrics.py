"""Behavior descriptors: Information per Play (IPP) and Communicativeness.

Both are computed only from public information: the action taken, the hint
tokens available when the turn started, and the possibility sets of a card at
the moment it is played. The card's true identity is never consulted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .engine import PLAY, Turn

DEFAULT_BINS = 20
# ratios of game counts never come closer than ~1e-6 to a bin edge without
# sitting on it, so this only absorbs float round-off from the division
_EDGE_TOL = 1e-9


class UndefinedDescriptorError(ValueError):
    pass


@dataclass(frozen=True)
class PlayStats:
    pieces_known: int = 0
    cards_played: int = 0
    hints_given: int = 0
    turns_with_token: int = 0

    def __add__(self, other: PlayStats) -> PlayStats:
        return PlayStats(
            self.pieces_known + other.pieces_known,
            self.cards_played + other.cards_played,
            self.hints_given + other.hints_given,
            self.turns_with_token + other.turns_with_token,
        )

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.pieces_known, self.cards_played, self.hints_given, self.turns_with_token)

    def to_json(self) -> list[int]:
        return list(self.as_tuple())

    @classmethod
    def from_json(cls, data) -> PlayStats:
        return cls(*map(int, data))

    @classmethod
    def pooled(cls, stats: Iterable[PlayStats]) -> PlayStats:
        total = cls()
        for s in stats:
            total = total + s
        return total


class BehaviorDescriptor(NamedTuple):
    ipp: float
    communicativeness: float


class NicheIndex(NamedTuple):
    i: int  # IPP axis
    j: int  # Communicativeness axis


def pieces_in_play_event(event: dict) -> int:
    return (len(event["colors"]) == 1) + (len(event["ranks"]) == 1)


def record_turn(stats: PlayStats, turn: Turn) -> PlayStats:
    """Fold one turn of the tracked player into ``stats``."""
    pieces, played, hints, token_turns = stats.as_tuple()
    if turn.tokens_before >= 1:
        token_turns += 1
        if turn.action.is_hint:
            hints += 1
    if turn.action.kind == PLAY:
        played += 1
        event = next(e for e in turn.events if e["type"] == PLAY)
        pieces += pieces_in_play_event(event)
    return PlayStats(pieces, played, hints, token_turns)


def stats_from_turns(turns: Iterable[Turn], n_players: int) -> list[PlayStats]:
    per_player = [PlayStats() for _ in range(n_players)]
    for turn in turns:
        per_player[turn.player] = record_turn(per_player[turn.player], turn)
    return per_player


def is_defined(stats: PlayStats) -> bool:
    return stats.cards_played > 0 and stats.turns_with_token > 0


def descriptor(stats: PlayStats) -> BehaviorDescriptor:
    if stats.cards_played == 0:
        raise UndefinedDescriptorError("IPP undefined: no card was played")
    if stats.turns_with_token == 0:
        raise UndefinedDescriptorError("Communicativeness undefined: no turn had a hint token")
    return BehaviorDescriptor(
        stats.pieces_known / (2 * stats.cards_played),
        stats.hints_given / stats.turns_with_token,
    )


def _bin(value: float, bins: int) -> int:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"descriptor value {value} outside [0, 1]")
    return min(bins - 1, math.floor(value * bins + _EDGE_TOL))


def niche(desc: BehaviorDescriptor | tuple[float, float], bins: int = DEFAULT_BINS) -> NicheIndex:
    """Grid cell of a descriptor; an edge value belongs to the upper cell and
    1.0 is clamped into the last one."""
    return NicheIndex(_bin(desc[0], bins), _bin(desc[1], bins))


def niche_center(index: tuple[int, int], bins: int = DEFAULT_BINS) -> tuple[float, float]:
    return ((index[0] + 0.5) / bins, (index[1] + 0.5) / bins)


def risk_aversion(records) -> float:
    """Mean playability, from the player's own perspective, over every played card.

    Needs the full views at play time, so each record is replayed from its seed.
    """
    from .records import replay_views
    from .rules import playability

    probs = []
    for record in records:
        for view, turn in replay_views(record):
            if turn.action.kind == PLAY:
                probs.append(playability(view, turn.action.slot))
    if not probs:
        raise UndefinedDescriptorError("risk aversion undefined: no card was played")
    return sum(probs) / len(probs)

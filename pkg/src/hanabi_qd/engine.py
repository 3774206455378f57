"""Hanabi rules engine.

Deterministic dealing from a 64-bit seed, legality checks, state transitions with
hint-knowledge bookkeeping (including negative information) and per-player views
that hide the viewer's own cards and the deck order.

Hands are ordered oldest card first; drawn cards go to the newest slot and the
remaining slots shift left when a card leaves the hand.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import NamedTuple

from .rng import SplitMix64

COLORS = "BRYWG"
N_COLORS = 5
N_RANKS = 5
COPIES = (3, 2, 2, 2, 1)  # indexed by rank - 1
DECK_SIZE = 50
MAX_TOKENS = 8
MAX_LIVES = 3
FULL_MASK = 0b11111

PLAY = "play"
DISCARD = "discard"
HINT_COLOR = "hint_color"
HINT_RANK = "hint_rank"
HINT_KINDS = (HINT_COLOR, HINT_RANK)


class GameError(Exception):
    pass


class ConfigError(GameError, ValueError):
    pass


class IllegalActionError(GameError, ValueError):
    pass


class TerminalStateError(GameError):
    pass


class InvariantError(GameError, AssertionError):
    pass


class Card(NamedTuple):
    color: int  # index into COLORS
    rank: int  # 1..5

    @property
    def index(self) -> int:
        return self.color * N_RANKS + self.rank - 1

    @classmethod
    def from_index(cls, index: int) -> Card:
        return cls(index // N_RANKS, index % N_RANKS + 1)

    @classmethod
    def parse(cls, text: str) -> Card:
        return cls(COLORS.index(text[0]), int(text[1:]))

    def __str__(self):
        return f"{COLORS[self.color]}{self.rank}"


def full_deck() -> list[Card]:
    return [
        Card(color, rank)
        for color in range(N_COLORS)
        for rank in range(1, N_RANKS + 1)
        for _ in range(COPIES[rank - 1])
    ]


def copies_of(index: int) -> int:
    return COPIES[index % N_RANKS]


def mask_to_str(mask: int, alphabet: str) -> str:
    return "".join(ch for i, ch in enumerate(alphabet) if mask >> i & 1)


def str_to_mask(text: str, alphabet: str) -> int:
    return sum(1 << alphabet.index(ch) for ch in text)


class CardKnowledge(NamedTuple):
    """What the holder (and everyone else) publicly knows about one card.

    ``colors`` and ``ranks`` are bitmasks: bit ``c`` for color index ``c``,
    bit ``r - 1`` for rank ``r``.
    """

    colors: int = FULL_MASK
    ranks: int = FULL_MASK
    color_hinted: bool = False
    rank_hinted: bool = False
    hinted_turn: int = -1

    @property
    def possible_colors(self) -> frozenset[str]:
        return frozenset(mask_to_str(self.colors, COLORS))

    @property
    def possible_ranks(self) -> frozenset[int]:
        return frozenset(r for r in range(1, N_RANKS + 1) if self.ranks >> (r - 1) & 1)

    @property
    def knows_color(self) -> bool:
        return self.colors.bit_count() == 1

    @property
    def knows_rank(self) -> bool:
        return self.ranks.bit_count() == 1

    @property
    def pieces_known(self) -> int:
        return self.knows_color + self.knows_rank

    @property
    def untouched(self) -> bool:
        return self.colors == FULL_MASK and self.ranks == FULL_MASK

    def admits(self, card: Card) -> bool:
        return bool(self.colors >> card.color & 1 and self.ranks >> (card.rank - 1) & 1)

    def identities(self) -> list[int]:
        """Card indices compatible with the possibility sets."""
        return [
            c * N_RANKS + r
            for c in range(N_COLORS)
            if self.colors >> c & 1
            for r in range(N_RANKS)
            if self.ranks >> r & 1
        ]

    def to_json(self) -> dict:
        return {
            "colors": mask_to_str(self.colors, COLORS),
            "ranks": mask_to_str(self.ranks, "12345"),
            "color_hinted": self.color_hinted,
            "rank_hinted": self.rank_hinted,
            "hinted_turn": self.hinted_turn,
        }

    @classmethod
    def from_json(cls, d: dict) -> CardKnowledge:
        return cls(
            str_to_mask(d["colors"], COLORS),
            str_to_mask(d["ranks"], "12345"),
            d["color_hinted"],
            d["rank_hinted"],
            d["hinted_turn"],
        )


class Action(NamedTuple):
    kind: str
    slot: int = -1
    target: int = -1
    value: int = -1  # color index for color hints, rank for rank hints

    @classmethod
    def play(cls, slot: int) -> Action:
        return cls(PLAY, slot=slot)

    @classmethod
    def discard(cls, slot: int) -> Action:
        return cls(DISCARD, slot=slot)

    @classmethod
    def hint_color(cls, target: int, color: int) -> Action:
        return cls(HINT_COLOR, target=target, value=color)

    @classmethod
    def hint_rank(cls, target: int, rank: int) -> Action:
        return cls(HINT_RANK, target=target, value=rank)

    @property
    def is_hint(self) -> bool:
        return self.kind in HINT_KINDS

    def touches(self, card: Card) -> bool:
        if self.kind == HINT_COLOR:
            return card.color == self.value
        return card.rank == self.value

    def to_json(self) -> dict:
        if self.kind == HINT_COLOR:
            return {"kind": self.kind, "target": self.target, "color": COLORS[self.value]}
        if self.kind == HINT_RANK:
            return {"kind": self.kind, "target": self.target, "rank": self.value}
        return {"kind": self.kind, "slot": self.slot}

    @classmethod
    def from_json(cls, d: dict) -> Action:
        kind = d["kind"]
        if kind == HINT_COLOR:
            return cls.hint_color(d["target"], COLORS.index(d["color"]))
        if kind == HINT_RANK:
            return cls.hint_rank(d["target"], d["rank"])
        if kind in (PLAY, DISCARD):
            return cls(kind, slot=d["slot"])
        raise ValueError(f"unknown action kind {kind!r}")

    def __str__(self):
        if self.kind == PLAY:
            return f"Play({self.slot})"
        if self.kind == DISCARD:
            return f"Discard({self.slot})"
        if self.kind == HINT_COLOR:
            return f"HintColor({self.target}, {COLORS[self.value]})"
        return f"HintRank({self.target}, {self.value})"


class Turn(NamedTuple):
    """One completed turn as seen by every player (events carry no hidden data
    beyond the identity of the card that was played or discarded)."""

    turn: int
    player: int
    tokens_before: int
    action: Action
    events: tuple[dict, ...]
    view_digest: str = ""


@dataclass(frozen=True)
class GameConfig:
    n_players: int = 2
    hand_size: int | None = None

    def __post_init__(self):
        if not 2 <= self.n_players <= 5:
            raise ConfigError(f"player count must be in 2..5, got {self.n_players}")
        if self.hand_size is None:
            object.__setattr__(self, "hand_size", 5 if self.n_players <= 3 else 4)
        elif not 1 <= self.hand_size <= 5:
            raise ConfigError(f"hand size must be in 1..5, got {self.hand_size}")

    def to_json(self) -> dict:
        return {"n_players": self.n_players, "hand_size": self.hand_size}


def enumerate_legal(player, n_players, own_size, hands, tokens) -> list[Action]:
    """Legal actions in canonical order: plays by slot, discards by slot, then
    hints by target, color hints (B,R,Y,W,G) before rank hints (1..5).

    ``hands[player]`` is never read, so masked views can call this directly.
    """
    actions = [Action.play(s) for s in range(own_size)]
    if tokens < MAX_TOKENS:
        actions.extend(Action.discard(s) for s in range(own_size))
    if tokens >= 1:
        for target in range(n_players):
            if target == player:
                continue
            hand = hands[target]
            colors = {card.color for card in hand}
            ranks = {card.rank for card in hand}
            actions.extend(Action.hint_color(target, c) for c in sorted(colors))
            actions.extend(Action.hint_rank(target, r) for r in sorted(ranks))
    return actions


@dataclass(frozen=True)
class PlayerView:
    """Everything one player may legally observe."""

    viewer: int
    n_players: int
    hands: tuple  # own hand entries are None
    knowledge: tuple  # knowledge of every hand; public information
    fireworks: tuple
    discard: tuple
    deck_size: int
    hint_tokens: int
    lives: int
    current_player: int
    final_countdown: int | None
    turn: int
    history: tuple = ()

    @property
    def own_size(self) -> int:
        return len(self.knowledge[self.viewer])

    def partners(self) -> list[int]:
        """Other players, starting with the next one to act."""
        return [(self.viewer + k) % self.n_players for k in range(1, self.n_players)]

    def legal_actions(self) -> list[Action]:
        return enumerate_legal(
            self.viewer, self.n_players, self.own_size, self.hands, self.hint_tokens
        )

    def is_legal(self, action: Action) -> bool:
        return _is_legal(self.viewer, self.n_players, self.own_size, self.hands,
                         self.hint_tokens, action)

    def unseen_counts(self) -> list[int]:
        """Copies of each card index the viewer cannot locate: 50 minus partner
        hands, discards and played cards."""
        counts = [copies_of(i) for i in range(N_COLORS * N_RANKS)]
        for card in self.discard:
            counts[card.index] -= 1
        for color, height in enumerate(self.fireworks):
            for rank in range(1, height + 1):
                counts[color * N_RANKS + rank - 1] -= 1
        for p in range(self.n_players):
            if p != self.viewer:
                for card in self.hands[p]:
                    counts[card.index] -= 1
        return counts

    def to_json(self) -> dict:
        return {
            "viewer": self.viewer,
            "n_players": self.n_players,
            "hands": [[None if c is None else str(c) for c in hand] for hand in self.hands],
            "knowledge": [[k.to_json() for k in hand] for hand in self.knowledge],
            "fireworks": list(self.fireworks),
            "discard": [str(c) for c in self.discard],
            "deck_size": self.deck_size,
            "hint_tokens": self.hint_tokens,
            "lives": self.lives,
            "current_player": self.current_player,
            "final_countdown": self.final_countdown,
            "turn": self.turn,
            "history": [[p, a.to_json()] for p, a in self.history],
        }

    def digest(self) -> str:
        """Short hash of what the viewer sees now. The action history is left
        out (a game record already carries it), keeping recording linear.
        Cards and knowledge are tuples of ints, so their repr is canonical."""
        fields = (self.viewer, self.n_players, self.hands, self.knowledge, self.fireworks,
                  self.discard, self.deck_size, self.hint_tokens, self.lives,
                  self.current_player, self.final_countdown, self.turn)
        blob = repr(fields)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _is_legal(player, n_players, own_size, hands, tokens, action) -> bool:
    if not isinstance(action, Action):
        return False
    if action.kind == PLAY:
        return 0 <= action.slot < own_size
    if action.kind == DISCARD:
        return tokens < MAX_TOKENS and 0 <= action.slot < own_size
    if action.kind == HINT_COLOR:
        valid = 0 <= action.value < N_COLORS
    elif action.kind == HINT_RANK:
        valid = 1 <= action.value <= N_RANKS
    else:
        return False
    if not valid or tokens < 1 or not 0 <= action.target < n_players or action.target == player:
        return False
    return any(action.touches(card) for card in hands[action.target])


@dataclass
class GameState:
    config: GameConfig
    deck: list  # draw from the end
    hands: list
    knowledge: list
    fireworks: list = field(default_factory=lambda: [0] * N_COLORS)
    discard: list = field(default_factory=list)
    hint_tokens: int = MAX_TOKENS
    lives: int = MAX_LIVES
    current_player: int = 0
    final_countdown: int | None = None
    turn: int = 0
    history: list = field(default_factory=list)

    @property
    def n_players(self) -> int:
        return self.config.n_players

    def copy(self) -> GameState:
        return GameState(
            config=self.config,
            deck=list(self.deck),
            hands=[list(h) for h in self.hands],
            knowledge=[list(k) for k in self.knowledge],
            fireworks=list(self.fireworks),
            discard=list(self.discard),
            hint_tokens=self.hint_tokens,
            lives=self.lives,
            current_player=self.current_player,
            final_countdown=self.final_countdown,
            turn=self.turn,
            history=list(self.history),
        )

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "deck": [str(c) for c in self.deck],
            "hands": [[str(c) for c in hand] for hand in self.hands],
            "knowledge": [[k.to_json() for k in hand] for hand in self.knowledge],
            "fireworks": list(self.fireworks),
            "discard": [str(c) for c in self.discard],
            "hint_tokens": self.hint_tokens,
            "lives": self.lives,
            "current_player": self.current_player,
            "final_countdown": self.final_countdown,
            "turn": self.turn,
            "history": [[p, a.to_json()] for p, a in self.history],
        }

    @classmethod
    def from_json(cls, d: dict) -> GameState:
        return cls(
            config=GameConfig(**d["config"]),
            deck=[Card.parse(c) for c in d["deck"]],
            hands=[[Card.parse(c) for c in hand] for hand in d["hands"]],
            knowledge=[[CardKnowledge.from_json(k) for k in hand] for hand in d["knowledge"]],
            fireworks=list(d["fireworks"]),
            discard=[Card.parse(c) for c in d["discard"]],
            hint_tokens=d["hint_tokens"],
            lives=d["lives"],
            current_player=d["current_player"],
            final_countdown=d["final_countdown"],
            turn=d["turn"],
            history=[(p, Action.from_json(a)) for p, a in d["history"]],
        )

    def is_terminal(self) -> bool:
        return (
            self.lives == 0
            or self.final_countdown == 0
            or all(h == N_RANKS for h in self.fireworks)
        )

    def score(self) -> int:
        return sum(self.fireworks)

    def view(self, player: int) -> PlayerView:
        hands = tuple(
            tuple(None for _ in hand) if p == player else tuple(hand)
            for p, hand in enumerate(self.hands)
        )
        return PlayerView(
            viewer=player,
            n_players=self.n_players,
            hands=hands,
            knowledge=tuple(tuple(k) for k in self.knowledge),
            fireworks=tuple(self.fireworks),
            discard=tuple(self.discard),
            deck_size=len(self.deck),
            hint_tokens=self.hint_tokens,
            lives=self.lives,
            current_player=self.current_player,
            final_countdown=self.final_countdown,
            turn=self.turn,
            history=tuple(self.history),
        )

    def legal_actions(self) -> list[Action]:
        if self.is_terminal():
            raise TerminalStateError("no legal actions in a terminal state")
        p = self.current_player
        return enumerate_legal(p, self.n_players, len(self.hands[p]), self.hands,
                               self.hint_tokens)

    def is_legal(self, action: Action) -> bool:
        p = self.current_player
        return _is_legal(p, self.n_players, len(self.hands[p]), self.hands,
                         self.hint_tokens, action)

    def step(self, action: Action) -> list[dict]:
        """Apply ``action`` for the current player in place; return the events."""
        if self.is_terminal():
            raise TerminalStateError("game is over")
        p = self.current_player
        if not self.is_legal(action):
            raise IllegalActionError(f"illegal action {action} for player {p} at turn {self.turn}")
        countdown_running = self.final_countdown is not None
        events: list[dict] = []
        if action.kind == PLAY:
            card = self.hands[p].pop(action.slot)
            know = self.knowledge[p].pop(action.slot)
            event = {"type": PLAY, "player": p, "slot": action.slot, "card": str(card),
                     **know.to_json()}
            if card.rank == self.fireworks[card.color] + 1:
                self.fireworks[card.color] += 1
                event["success"] = True
                if card.rank == N_RANKS and self.hint_tokens < MAX_TOKENS:
                    self.hint_tokens += 1
                    event["token_regained"] = True
            else:
                self.discard.append(card)
                self.lives -= 1
                event["success"] = False
            events.append(event)
            self._draw(p, events)
        elif action.kind == DISCARD:
            card = self.hands[p].pop(action.slot)
            know = self.knowledge[p].pop(action.slot)
            self.discard.append(card)
            self.hint_tokens = min(MAX_TOKENS, self.hint_tokens + 1)
            events.append({"type": DISCARD, "player": p, "slot": action.slot, "card": str(card),
                           **know.to_json()})
            self._draw(p, events)
        else:
            self.hint_tokens -= 1
            touched = self._hint(action)
            events.append({"type": action.kind, "player": p, "target": action.target,
                           "value": action.value, "touched": touched})
        self.history.append((p, action))
        if countdown_running:
            self.final_countdown -= 1
        elif not self.deck:
            self.final_countdown = self.n_players
            events.append({"type": "deck_exhausted", "countdown": self.n_players})
        self.current_player = (p + 1) % self.n_players
        self.turn += 1
        return events

    def _draw(self, player: int, events: list) -> None:
        if self.deck:
            self.hands[player].append(self.deck.pop())
            self.knowledge[player].append(CardKnowledge())
            events.append({"type": "draw", "player": player})

    def _hint(self, action: Action) -> list[int]:
        hand = self.hands[action.target]
        know = self.knowledge[action.target]
        touched = []
        is_color = action.kind == HINT_COLOR
        bit = 1 << (action.value if is_color else action.value - 1)
        for slot, card in enumerate(hand):
            k = know[slot]
            if action.touches(card):
                touched.append(slot)
                if is_color:
                    know[slot] = k._replace(colors=bit, color_hinted=True, hinted_turn=self.turn)
                else:
                    know[slot] = k._replace(ranks=bit, rank_hinted=True, hinted_turn=self.turn)
            elif is_color:
                know[slot] = k._replace(colors=k.colors & ~bit)
            else:
                know[slot] = k._replace(ranks=k.ranks & ~bit)
        return touched

    def check_invariants(self) -> None:
        in_hands = sum(len(h) for h in self.hands)
        total = len(self.deck) + in_hands + len(self.discard) + sum(self.fireworks)
        if total != DECK_SIZE:
            raise InvariantError(f"card conservation broken: {total} != {DECK_SIZE}")
        if not 0 <= self.hint_tokens <= MAX_TOKENS:
            raise InvariantError(f"hint tokens out of range: {self.hint_tokens}")
        if not 0 <= self.lives <= MAX_LIVES:
            raise InvariantError(f"lives out of range: {self.lives}")
        if any(not 0 <= h <= N_RANKS for h in self.fireworks):
            raise InvariantError(f"firework height out of range: {self.fireworks}")
        for p, (hand, know) in enumerate(zip(self.hands, self.knowledge)):
            if len(hand) != len(know) or len(hand) > self.config.hand_size:
                raise InvariantError(f"hand/knowledge size mismatch for player {p}")
            for slot, (card, k) in enumerate(zip(hand, know)):
                if not k.colors or not k.ranks:
                    raise InvariantError(f"empty possibility set at player {p} slot {slot}")
                if not k.admits(card):
                    raise InvariantError(f"knowledge excludes true card {card} at {p}/{slot}")
                if (k.color_hinted and not k.knows_color) or (k.rank_hinted and not k.knows_rank):
                    raise InvariantError(f"hinted flag without singleton at {p}/{slot}")


def deal(config: GameConfig, seed: int) -> tuple[GameState, SplitMix64]:
    rng = SplitMix64(seed)
    deck = full_deck()
    for i in range(len(deck) - 1, 0, -1):
        j = rng.below(i + 1)
        deck[i], deck[j] = deck[j], deck[i]
    hands = []
    for _ in range(config.n_players):
        hands.append([deck.pop() for _ in range(config.hand_size)])
    state = GameState(
        config=config,
        deck=deck,
        hands=hands,
        knowledge=[[CardKnowledge() for _ in hand] for hand in hands],
    )
    state.current_player = rng.below(config.n_players)
    return state, rng


def new_game(config: GameConfig | int = 2, seed: int = 0) -> GameState:
    """Shuffle from ``seed``, deal, and pick the starting player from the same stream."""
    if isinstance(config, int):
        config = GameConfig(n_players=config)
    return deal(config, seed)[0]


def legal_actions(state: GameState) -> list[Action]:
    return state.legal_actions()


def apply(state: GameState, action: Action) -> tuple[GameState, list[dict]]:
    nxt = state.copy()
    events = nxt.step(action)
    return nxt, events


def is_terminal(state: GameState) -> bool:
    return state.is_terminal()


def score(state: GameState) -> int:
    return state.score()


def max_turns(config: GameConfig) -> int:
    """Tight upper bound on game length.

    Before the deck runs out every play or discard consumes one deck card, and
    each hint spends a token that came from the initial 8, a discard, or a
    completed stack (itself a play). The token freed by the move that draws
    the last card can only be spent after the deck is empty, so at most
    8 + deck - 1 hints come first. Then each player gets one more turn.
    Hinting whenever possible and discarding otherwise reaches the bound.
    """
    deck = DECK_SIZE - config.n_players * config.hand_size
    return 2 * deck + MAX_TOKENS - 1 + config.n_players

"""Playing full games and keeping a replayable record of them.

A record serializes to JSON-Lines: one header line (seed, agents, config,
starting player), one line per turn, and a footer line (score, per-player stats).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Protocol, Sequence

from .engine import Action, GameConfig, IllegalActionError, PlayerView, Turn, deal
from .io import SchemaError, check_schema, tag
from .metrics import PlayStats, record_turn
from .rng import SplitMix64, rule_rng


class Agent(Protocol):
    name: str

    def act(self, view: PlayerView, rng: SplitMix64) -> Action: ...


@dataclass
class GameRecord:
    seed: int
    config: GameConfig
    agents: list[str]
    start_player: int
    turns: list[Turn] = field(default_factory=list)
    score: int = 0
    stats: list[PlayStats] = field(default_factory=list)

    def __len__(self):
        return len(self.turns)

    def to_jsonl(self) -> str:
        lines = [tag("record", {
            "kind": "header",
            "seed": self.seed,
            "agents": self.agents,
            "config": self.config.to_json(),
            "start_player": self.start_player,
        })]
        for t in self.turns:
            lines.append({
                "kind": "turn",
                "turn": t.turn,
                "player": t.player,
                "tokens_before": t.tokens_before,
                "view": t.view_digest,
                "action": t.action.to_json(),
                "events": list(t.events),
            })
        lines.append({
            "kind": "footer",
            "score": self.score,
            "stats": [s.to_json() for s in self.stats],
        })
        return "".join(json.dumps(line, sort_keys=True, separators=(",", ":")) + "\n"
                       for line in lines)

    @classmethod
    def from_jsonl(cls, text: str) -> GameRecord:
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or rows[0].get("kind") != "header" or rows[-1].get("kind") != "footer":
            raise SchemaError("a game record needs a header line and a footer line")
        head = check_schema(rows[0], "record")
        turns = [
            Turn(r["turn"], r["player"], r["tokens_before"], Action.from_json(r["action"]),
                 tuple(r["events"]), r["view"])
            for r in rows[1:-1]
        ]
        return cls(
            seed=head["seed"],
            config=GameConfig(**head["config"]),
            agents=list(head["agents"]),
            start_player=head["start_player"],
            turns=turns,
            score=rows[-1]["score"],
            stats=[PlayStats.from_json(s) for s in rows[-1]["stats"]],
        )

    def redacted(self) -> GameRecord:
        """Copy with every card identity stripped from the events."""
        turns = [
            t._replace(events=tuple({k: v for k, v in e.items() if k != "card"} for e in t.events))
            for t in self.turns
        ]
        return GameRecord(self.seed, self.config, list(self.agents), self.start_player,
                          turns, self.score, list(self.stats))


def agent_name(agent) -> str:
    return getattr(agent, "name", type(agent).__name__)


def play_game(agents: Sequence, seed: int, config: GameConfig | None = None, *,
              check_invariants: bool = False) -> GameRecord:
    """Play one game with ``agents[k]`` in seat ``k``.

    Agents may define ``begin_game(seat, n_players)`` and ``observe(turn)``;
    every agent observes every completed turn.
    """
    if config is None:
        config = GameConfig(n_players=len(agents))
    if len(agents) != config.n_players:
        raise ValueError(f"{len(agents)} agents for a {config.n_players}-player game")
    state, _ = deal(config, seed)
    rng = rule_rng(seed)
    record = GameRecord(seed, config, [agent_name(a) for a in agents], state.current_player)
    stats = [PlayStats() for _ in agents]
    for seat, agent in enumerate(agents):
        if hasattr(agent, "begin_game"):
            agent.begin_game(seat, config.n_players)
    while not state.is_terminal():
        p = state.current_player
        view = state.view(p)
        action = agents[p].act(view, rng)
        if not state.is_legal(action):
            raise IllegalActionError(
                f"agent {agent_name(agents[p])!r} in seat {p} returned illegal action "
                f"{action} at turn {state.turn} (seed {seed})"
            )
        tokens = state.hint_tokens
        events = state.step(action)
        if check_invariants:
            state.check_invariants()
        turn = Turn(view.turn, p, tokens, action, tuple(events), view.digest())
        record.turns.append(turn)
        stats[p] = record_turn(stats[p], turn)
        for agent in agents:
            if hasattr(agent, "observe"):
                agent.observe(turn)
    record.score = state.score()
    record.stats = stats
    return record


def replay_views(record: GameRecord) -> Iterator[tuple[PlayerView, Turn]]:
    """Re-deal from the record's seed and yield the acting player's view before
    each recorded turn."""
    state, _ = deal(record.config, record.seed)
    for turn in record.turns:
        if state.current_player != turn.player:
            raise ValueError(f"record diverges from its seed at turn {turn.turn}")
        view = state.view(turn.player)
        yield view, turn
        state.step(turn.action)
    if state.score() != record.score:
        raise ValueError("replayed score does not match the record")

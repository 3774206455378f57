"""Rule catalog and chromosome-driven agents.

An agent is an ordered list of rule ids; on its turn it returns the action of
the first rule that fires. Rules never look at hidden information: they see a
``PlayerView`` plus the per-game random stream (only the two "random" rules
draw from it, and only when they fire).

Tie-breaking everywhere: lowest slot, then partner order starting with the
next player, then color order B,R,Y,W,G, then ascending rank.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import cached_property

from .engine import (
    COPIES,
    MAX_TOKENS,
    N_COLORS,
    N_RANKS,
    Action,
    PlayerView,
)
from .rng import SplitMix64

CATALOG_VERSION = "v1"
CHROMOSOME_LENGTH = 15

PLAY_BASES = (
    ("PlayIfCertain", None),
    *(("PlayProbability", t / 10) for t in range(10)),
    ("PlayMostRecentlyHinted", None),
)
TELL_BASES = tuple((name, None) for name in (
    "TellAboutPlayableCard",
    "TellAboutUselessCard",
    "TellMostInformation",
    "TellAboutOnes",
    "TellAboutFives",
    "TellRandomly",
    "TellToSetSingletonColor",
    "TellToSetSingletonRank",
    "TellDangerCard",
    "TellUnknownCard",
))
DISCARD_BASES = (
    ("DiscardOldest", None),
    ("DiscardRandom", None),
    ("DiscardUseless", None),
    ("DiscardProbabilityUseless", 0.6),
    ("DiscardProbabilityUseless", 0.8),
    ("DiscardProbabilityUseless", 1.0),
    ("DiscardHighestRank", None),
    ("DiscardLeastInformation", None),
    ("DiscardOldestNoInfo", None),
    ("DiscardLeastLikelyCritical", None),
)
# play: fire only if lives > g; tell: only if tokens > g; discard: only if tokens < g
PLAY_GATES = (0, 1, 2)
TELL_GATES = (0, 1, 2, 4, 6)
DISCARD_GATES = (8, 7, 6, 4, 2)

BASE_NAMES = tuple(dict.fromkeys(name for name, _ in PLAY_BASES + TELL_BASES + DISCARD_BASES))


class UnknownRuleError(KeyError):
    pass


@dataclass(frozen=True)
class Rule:
    id: int
    family: str
    base: str
    param: float | None
    gate: int

    @property
    def base_code(self) -> int:
        return BASE_NAMES.index(self.base)

    @property
    def name(self) -> str:
        label = self.base if self.param is None else f"{self.base}({self.param:g})"
        if self.family == "play" and self.gate > 0:
            label += f" if lives > {self.gate}"
        elif self.family == "tell" and self.gate > 0:
            label += f" if tokens > {self.gate}"
        elif self.family == "discard" and self.gate < MAX_TOKENS:
            label += f" if tokens < {self.gate}"
        return label

    def gate_open(self, view: PlayerView) -> bool:
        if self.family == "play":
            return view.lives > self.gate
        if self.family == "tell":
            return view.hint_tokens > self.gate
        return view.hint_tokens < self.gate

    def to_json(self) -> dict:
        return {"id": self.id, "family": self.family, "base": self.base,
                "param": self.param, "gate": self.gate, "name": self.name}


def build_catalog() -> tuple[Rule, ...]:
    rules = []
    for family, bases, gates in (("play", PLAY_BASES, PLAY_GATES),
                                 ("tell", TELL_BASES, TELL_GATES),
                                 ("discard", DISCARD_BASES, DISCARD_GATES)):
        for base, param in bases:
            for gate in gates:
                rules.append(Rule(len(rules), family, base, param, gate))
    return tuple(rules)


CATALOG = build_catalog()
N_RULES = len(CATALOG)


def catalog_json(catalog=CATALOG) -> dict:
    return {"schema": "hanabi_qd.catalog", "version": CATALOG_VERSION,
            "rules": [r.to_json() for r in catalog]}


def catalog_hash(catalog=CATALOG) -> str:
    blob = json.dumps(catalog_json(catalog), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def rule(rule_id: int) -> Rule:
    if not 0 <= rule_id < N_RULES:
        raise UnknownRuleError(f"rule id {rule_id} not in catalog {CATALOG_VERSION} (0..{N_RULES - 1})")
    return CATALOG[rule_id]


_BY_NAME = {r.name: r.id for r in CATALOG}


def rule_id(name: str) -> int:
    """Id of the rule whose display name is ``name``, e.g. "PlayProbability(0.6) if lives > 1"."""
    try:
        return _BY_NAME[name]
    except KeyError:
        raise UnknownRuleError(f"no rule named {name!r}") from None


def describe(chromosome) -> list[str]:
    return [rule(g).name for g in chromosome]


# --------------------------------------------------------------------------- analysis

def _card_tables(view: PlayerView):
    """Per card index: playable / dead / critical flags and discarded counts."""
    discarded = [0] * (N_COLORS * N_RANKS)
    for card in view.discard:
        discarded[card.index] += 1
    playable = [False] * 25
    dead = [False] * 25
    critical = [False] * 25
    for c in range(N_COLORS):
        height = view.fireworks[c]
        blocked = False
        for r in range(1, N_RANKS + 1):
            i = c * N_RANKS + r - 1
            playable[i] = r == height + 1
            dead[i] = r <= height or blocked
            critical[i] = not dead[i] and COPIES[r - 1] - discarded[i] == 1
            if r > height and discarded[i] == COPIES[r - 1]:
                blocked = True
    return playable, dead, critical


class HandAnalysis:
    """Probabilities over the viewer's own cards, weighting each identity
    allowed by the possibility sets by its number of unseen copies."""

    def __init__(self, view: PlayerView):
        self.view = view
        self.playable, self.dead, self.critical = _card_tables(view)
        unseen = view.unseen_counts()
        self.knowledge = view.knowledge[view.viewer]
        self.playability = []
        self.p_dead = []
        self.p_critical = []
        self.expected_rank = []
        self.certain_playable = []
        self.certain_dead = []
        for k in self.knowledge:
            ids = k.identities()
            total = play = dead = crit = rank_sum = 0
            for i in ids:
                w = unseen[i]
                total += w
                if self.playable[i]:
                    play += w
                if self.dead[i]:
                    dead += w
                if self.critical[i]:
                    crit += w
                rank_sum += w * (i % N_RANKS + 1)
            if total == 0:  # only reachable from inconsistent hand-built views
                total = 1
            self.playability.append(play / total)
            self.p_dead.append(dead / total)
            self.p_critical.append(crit / total)
            self.expected_rank.append(rank_sum / total)
            self.certain_playable.append(all(self.playable[i] for i in ids))
            self.certain_dead.append(all(self.dead[i] for i in ids))

    @cached_property
    def hints(self) -> list[Action]:
        return [a for a in self.view.legal_actions() if a.is_hint]


def playability(view: PlayerView, slot: int) -> float:
    if not 0 <= slot < view.own_size:
        raise IndexError(f"slot {slot} not held by player {view.viewer}")
    return HandAnalysis(view).playability[slot]


def _argmax(values) -> int:
    best = 0
    for s in range(1, len(values)):
        if values[s] > values[best]:
            best = s
    return best


def _argmin(values) -> int:
    best = 0
    for s in range(1, len(values)):
        if values[s] < values[best]:
            best = s
    return best


def _hint_for(target, card, k):
    """The missing piece of a partner's card, rank first."""
    if not k.knows_rank:
        return Action.hint_rank(target, card.rank)
    if not k.knows_color:
        return Action.hint_color(target, card.color)
    return None


def _partner_cards(view):
    for target in view.partners():
        for card, k in zip(view.hands[target], view.knowledge[target]):
            yield target, card, k


# --------------------------------------------------------------------------- rules

def _play_if_certain(a, rule, rng):
    for s, certain in enumerate(a.certain_playable):
        if certain:
            return Action.play(s)
    return None


def _play_probability(a, rule, rng):
    if not a.playability:
        return None
    best = _argmax(a.playability)
    if a.playability[best] > rule.param:
        return Action.play(best)
    return None


def _play_most_recently_hinted(a, rule, rng):
    latest = max((k.hinted_turn for k in a.knowledge), default=-1)
    if latest < 0:
        return None
    for s, k in enumerate(a.knowledge):
        if k.hinted_turn == latest and a.playability[s] > 0:
            return Action.play(s)
    return None


def _tell_playable(a, rule, rng):
    for target, card, k in _partner_cards(a.view):
        if a.playable[card.index]:
            hint = _hint_for(target, card, k)
            if hint is not None:
                return hint
    return None


def _tell_useless(a, rule, rng):
    for target, card, k in _partner_cards(a.view):
        if a.dead[card.index] and not all(a.dead[i] for i in k.identities()):
            hint = _hint_for(target, card, k)
            if hint is not None:
                return hint
    return None


def _hint_information(view, hint) -> int:
    gained = 0
    is_color = hint.kind == "hint_color"
    bit = 1 << (hint.value if is_color else hint.value - 1)
    for card, k in zip(view.hands[hint.target], view.knowledge[hint.target]):
        mask = k.colors if is_color else k.ranks
        if hint.touches(card):
            gained += mask.bit_count() - 1
        elif mask & bit:
            gained += 1
    return gained


def _tell_most_information(a, rule, rng):
    best, best_info = None, 0
    for hint in a.hints:
        info = _hint_information(a.view, hint)
        if info > best_info:
            best, best_info = hint, info
    return best


def _tell_rank(rank):
    def tell(a, rule, rng):
        for target, card, k in _partner_cards(a.view):
            if card.rank == rank and not k.knows_rank:
                return Action.hint_rank(target, rank)
        return None
    return tell


def _tell_randomly(a, rule, rng):
    hints = a.hints
    if not hints:
        return None
    return hints[rng.below(len(hints))]


def _tell_singleton_color(a, rule, rng):
    for target, card, k in _partner_cards(a.view):
        if not a.dead[card.index] and k.knows_rank and not k.knows_color:
            return Action.hint_color(target, card.color)
    return None


def _tell_singleton_rank(a, rule, rng):
    for target, card, k in _partner_cards(a.view):
        if not a.dead[card.index] and k.knows_color and not k.knows_rank:
            return Action.hint_rank(target, card.rank)
    return None


def _tell_danger(a, rule, rng):
    for target, card, k in _partner_cards(a.view):
        if a.critical[card.index]:
            hint = _hint_for(target, card, k)
            if hint is not None:
                return hint
    return None


def _tell_unknown(a, rule, rng):
    for target, card, k in _partner_cards(a.view):
        if k.untouched:
            return _hint_for(target, card, k)
    return None


def _discard_oldest(a, rule, rng):
    return Action.discard(0) if a.knowledge else None


def _discard_random(a, rule, rng):
    n = len(a.knowledge)
    return Action.discard(rng.below(n)) if n else None


def _discard_useless(a, rule, rng):
    for s, certain in enumerate(a.certain_dead):
        if certain:
            return Action.discard(s)
    return None


def _discard_probability_useless(a, rule, rng):
    if not a.p_dead:
        return None
    best = _argmax(a.p_dead)
    if a.p_dead[best] >= rule.param:
        return Action.discard(best)
    return None


def _discard_highest_rank(a, rule, rng):
    return Action.discard(_argmax(a.expected_rank)) if a.knowledge else None


def _discard_least_information(a, rule, rng):
    if not a.knowledge:
        return None
    return Action.discard(_argmin([k.pieces_known for k in a.knowledge]))


def _discard_oldest_no_info(a, rule, rng):
    for s, k in enumerate(a.knowledge):
        if k.untouched:
            return Action.discard(s)
    return None


def _discard_least_likely_critical(a, rule, rng):
    return Action.discard(_argmin(a.p_critical)) if a.knowledge else None


RULE_FUNCTIONS = {
    "PlayIfCertain": _play_if_certain,
    "PlayProbability": _play_probability,
    "PlayMostRecentlyHinted": _play_most_recently_hinted,
    "TellAboutPlayableCard": _tell_playable,
    "TellAboutUselessCard": _tell_useless,
    "TellMostInformation": _tell_most_information,
    "TellAboutOnes": _tell_rank(1),
    "TellAboutFives": _tell_rank(5),
    "TellRandomly": _tell_randomly,
    "TellToSetSingletonColor": _tell_singleton_color,
    "TellToSetSingletonRank": _tell_singleton_rank,
    "TellDangerCard": _tell_danger,
    "TellUnknownCard": _tell_unknown,
    "DiscardOldest": _discard_oldest,
    "DiscardRandom": _discard_random,
    "DiscardUseless": _discard_useless,
    "DiscardProbabilityUseless": _discard_probability_useless,
    "DiscardHighestRank": _discard_highest_rank,
    "DiscardLeastInformation": _discard_least_information,
    "DiscardOldestNoInfo": _discard_oldest_no_info,
    "DiscardLeastLikelyCritical": _discard_least_likely_critical,
}
assert set(RULE_FUNCTIONS) == set(BASE_NAMES)


def evaluate_rule(rule_id: int, view: PlayerView, rng: SplitMix64 | None = None,
                  analysis: HandAnalysis | None = None) -> Action | None:
    """Action of one rule on ``view``, or None if it abstains."""
    r = rule(rule_id)
    if not r.gate_open(view):
        return None
    if analysis is None:
        analysis = HandAnalysis(view)
    if rng is None:
        rng = SplitMix64(0)
    return RULE_FUNCTIONS[r.base](analysis, r, rng)


def fallback_action(view: PlayerView, analysis: HandAnalysis) -> Action:
    if view.hint_tokens < MAX_TOKENS:
        return Action.discard(0)
    return Action.play(_argmax(analysis.playability))


def agent_act(chromosome, view: PlayerView, rng: SplitMix64 | None = None) -> Action:
    analysis = HandAnalysis(view)
    if rng is None:
        rng = SplitMix64(0)
    for rule_id in chromosome:
        action = evaluate_rule(rule_id, view, rng, analysis)
        if action is not None:
            return action
    return fallback_action(view, analysis)


def validate_chromosome(genes, length: int = CHROMOSOME_LENGTH) -> tuple[int, ...]:
    genes = tuple(int(g) for g in genes)
    if len(genes) != length:
        raise ValueError(f"chromosome must have {length} genes, got {len(genes)}")
    for g in genes:
        rule(g)
    return genes


class ChromosomeAgent:
    def __init__(self, chromosome, name: str | None = None):
        self.chromosome = validate_chromosome(chromosome)
        self.name = name or "rules[" + ",".join(map(str, self.chromosome)) + "]"

    def act(self, view: PlayerView, rng: SplitMix64) -> Action:
        return agent_act(self.chromosome, view, rng)

    def __repr__(self):
        return f"ChromosomeAgent({list(self.chromosome)})"

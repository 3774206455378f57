import random
from collections import Counter

import pytest

from hanabi_qd.engine import (COLORS, Card, CardKnowledge, GameConfig, GameState, full_deck,
                              str_to_mask)
from hanabi_qd.map_elites import EvolutionConfig, run


class RandomLegalAgent:
    """Uniform over legal actions; its own RNG keeps the game stream untouched."""

    def __init__(self, seed=0):
        self.rng = random.Random(seed)
        self.name = "random"

    def act(self, view, rng):
        return self.rng.choice(view.legal_actions())


def cards(text):
    return [Card.parse(t) for t in text.split()]


def knowledge(colors="BRYWG", ranks="12345", **kw):
    return CardKnowledge(str_to_mask(colors, COLORS), str_to_mask(ranks, "12345"), **kw)


def make_state(hands, *, fireworks=(0, 0, 0, 0, 0), tokens=8, lives=3, player=0,
               know=None, discard=()):
    """Consistent 50-card state from explicit hands; the rest goes to the deck."""
    hands = [cards(h) if isinstance(h, str) else list(h) for h in hands]
    discard = cards(discard) if isinstance(discard, str) else list(discard)
    pool = [Card(c, r) for c in range(5) for r, n in zip(range(1, 6), (3, 2, 2, 2, 1))
            for _ in range(n)]
    used = [c for h in hands for c in h] + discard
    used += [Card(c, r) for c in range(5) for r in range(1, fireworks[c] + 1)]
    for card in used:
        pool.remove(card)
    know = know or [[CardKnowledge() for _ in h] for h in hands]
    return GameState(config=GameConfig(len(hands)), deck=pool, hands=hands, knowledge=know,
                     fireworks=list(fireworks), discard=discard, hint_tokens=tokens,
                     lives=lives, current_player=player)


def enumerate_playability(view, slot):
    """Independent oracle: count admitted unseen card copies that are playable."""
    unseen = Counter(full_deck())
    for p, hand in enumerate(view.hands):
        if p != view.viewer:
            unseen.subtract(hand)
    unseen.subtract(view.discard)
    for color, height in enumerate(view.fireworks):
        unseen.subtract(Card(color, r) for r in range(1, height + 1))
    k = view.knowledge[view.viewer][slot]
    admitted = {c: n for c, n in unseen.items() if n > 0 and k.admits(c)}
    total = sum(admitted.values())
    good = sum(n for c, n in admitted.items() if c.rank == view.fireworks[c.color] + 1)
    return good / total


@pytest.fixture(scope="session")
def small_archive():
    return run(EvolutionConfig(total_candidates=1500, random_phase=300, games_per_eval=20,
                               master_seed=11))


@pytest.fixture(scope="session")
def other_archive():
    return run(EvolutionConfig(total_candidates=1500, random_phase=300, games_per_eval=20,
                               master_seed=12))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

import pytest
from hypothesis import given, settings, strategies as st

from hanabi_qd.engine import (Action, Card, CardKnowledge, ConfigError, GameConfig, GameState,
                              IllegalActionError, TerminalStateError, apply, is_terminal,
                              legal_actions, max_turns, new_game, score)
from hanabi_qd.records import GameRecord, play_game, replay_views
from hanabi_qd.rules import ChromosomeAgent

from conftest import RandomLegalAgent, cards, make_state


def test_new_game_deals_two_hands_of_five():
    state = new_game(2, seed=5)
    assert [len(h) for h in state.hands] == [5, 5]
    assert len(state.deck) == 40
    assert (state.hint_tokens, state.lives, state.fireworks) == (8, 3, [0] * 5)
    state.check_invariants()


@pytest.mark.parametrize("players,hand", [(2, 5), (3, 5), (4, 4), (5, 4)])
def test_standard_hand_sizes(players, hand):
    state = new_game(players, seed=1)
    assert all(len(h) == hand for h in state.hands)
    assert len(state.deck) == 50 - players * hand


def test_new_game_is_deterministic():
    a, b = new_game(2, 99), new_game(2, 99)
    assert a.deck == b.deck and a.hands == b.hands and a.current_player == b.current_player
    assert new_game(2, 100).deck != a.deck


@pytest.mark.parametrize("players", [1, 6])
def test_invalid_player_count(players):
    with pytest.raises(ConfigError):
        GameConfig(players)


def test_legal_actions_at_full_tokens():
    # partner holds colors B,R,Y and ranks 1,2
    state = make_state(["W3 W4 G3 G4 W2", "B1 R1 Y2 B2 R1"])
    acts = legal_actions(state)
    assert len(acts) == 10
    assert [a.kind for a in acts[:5]] == ["play"] * 5
    assert not any(a.kind == "discard" for a in acts)
    assert acts[5:] == [Action.hint_color(1, 0), Action.hint_color(1, 1), Action.hint_color(1, 2),
                        Action.hint_rank(1, 1), Action.hint_rank(1, 2)]


def test_no_hints_without_tokens():
    state = make_state(["W3 W4 G3 G4 W2", "B1 R1 Y2 B2 R1"], tokens=0)
    acts = legal_actions(state)
    assert not any(a.is_hint for a in acts)
    assert len(acts) == 10  # plays and discards


def test_single_color_rank_one_partner_gives_two_hints():
    state = make_state(["W3 W4 G3 G4 W2", "R1 R1 R1"], tokens=1)
    hints = [a for a in legal_actions(state) if a.is_hint]
    assert hints == [Action.hint_color(1, 1), Action.hint_rank(1, 1)]


def test_play_next_card_advances_stack():
    state = make_state(["R2 W4 G3 G4 W2", "B1 B1 Y2 B2 R1"], fireworks=(0, 1, 0, 0, 0))
    nxt, events = apply(state, Action.play(0))
    assert nxt.fireworks[1] == 2 and nxt.lives == 3
    assert state.fireworks[1] == 1  # apply does not mutate its input
    nxt.check_invariants()


def test_misplay_costs_a_life():
    state = make_state(["R2 W4 G3 G4 W2", "B1 B1 Y2 B2 R1"], fireworks=(0, 2, 0, 0, 0))
    nxt, _ = apply(state, Action.play(0))
    assert nxt.fireworks[1] == 2 and nxt.lives == 2
    assert Card.parse("R2") in nxt.discard


def test_playing_a_five_restores_a_token():
    state = make_state(["G5 W4 G3 G4 W2", "B1 B1 Y2 B2 R1"], fireworks=(0, 0, 0, 0, 4), tokens=3)
    nxt, _ = apply(state, Action.play(0))
    assert nxt.fireworks[4] == 5 and nxt.hint_tokens == 4


def test_discard_gains_a_token():
    state = make_state(["G5 W4 G3 G4 W2", "B1 B1 Y2 B2 R1"], tokens=3)
    nxt, _ = apply(state, Action.discard(1))
    assert nxt.hint_tokens == 4
    assert nxt.hands[0][:4] == cards("G5 G3 G4 W2")  # left shift, draw goes to the newest slot
    assert len(nxt.hands[0]) == 5


def test_rank_hint_sets_singletons_and_negative_information():
    state = make_state(["W3 W4 G3 G4 W2", "B1 R1 Y2 R1 G4"])
    nxt, _ = apply(state, Action.hint_rank(1, 1))
    know = nxt.knowledge[1]
    for slot in (0, 1, 3):
        assert know[slot].possible_ranks == {1} and know[slot].rank_hinted
    for slot in (2, 4):
        assert 1 not in know[slot].possible_ranks and not know[slot].rank_hinted
        assert len(know[slot].possible_ranks) == 4
    assert nxt.hint_tokens == 7
    nxt.check_invariants()


def test_illegal_actions_are_rejected():
    state = make_state(["W3 W4 G3 G4 W2", "B1 R1 Y2 R1 G4"])
    for bad in (Action.discard(0), Action.hint_color(1, 3), Action.hint_rank(0, 3), Action.play(7)):
        with pytest.raises(IllegalActionError):
            apply(state, bad)


def test_terminal_conditions():
    fresh = new_game(2, 3)
    assert not is_terminal(fresh) and score(fresh) == 0
    won = make_state(["", ""], fireworks=(5, 5, 5, 5, 5))
    assert is_terminal(won) and score(won) == 25
    lost = make_state(["W3 W4", "B1 R1"], fireworks=(5, 3, 2, 2, 1), lives=0)
    assert is_terminal(lost) and score(lost) == 13
    with pytest.raises(TerminalStateError):
        legal_actions(lost)


def test_final_countdown_gives_everyone_one_more_turn():
    state = make_state(["W3 W4 G3 G4 W2", "B1 R1 Y2 R1 G4"], tokens=5)
    state.deck = state.deck[:1]
    state.discard += []  # the rest of the deck is gone
    removed = 50 - 10 - 1
    state.discard.extend(new_game(2, 0).deck[:0])
    # rebuild a consistent pile for the removed cards
    pile = make_state(["W3 W4 G3 G4 W2", "B1 R1 Y2 R1 G4"]).deck[1:]
    state.discard = pile
    assert len(pile) == removed
    state.check_invariants()
    state.step(Action.discard(0))  # draws the last card
    assert state.final_countdown == 2 and not state.is_terminal()
    state.step(Action.discard(0))
    assert state.final_countdown == 1
    state.step(Action.discard(0))
    assert state.final_countdown == 0 and state.is_terminal()


class DiscardFirstAgent:
    """Discards slot 0 whenever legal; at 8 tokens (discard illegal) gives a hint."""

    name = "discard-first"

    def act(self, view, rng):
        if view.hint_tokens < 8:
            return Action.discard(0)
        return next(a for a in view.legal_actions() if a.is_hint)


def test_degenerate_discarder_scores_zero_by_deck_exhaustion():
    for seed in range(20):
        rec = play_game([DiscardFirstAgent(), DiscardFirstAgent()], seed, check_invariants=True)
        assert rec.score == 0
        assert rec.turns[-1].events  # game ran to the end
        assert sum(t.action.kind == "discard" for t in rec.turns) >= 40


def test_play_game_is_deterministic_and_round_trips():
    agent = ChromosomeAgent(list(range(0, 135, 9)))
    a = play_game([agent, agent], 42)
    b = play_game([agent, agent], 42)
    assert a.to_jsonl() == b.to_jsonl()
    again = GameRecord.from_jsonl(a.to_jsonl())
    assert again.to_jsonl() == a.to_jsonl()
    assert again.score == a.score and again.stats == a.stats


def test_replay_reproduces_view_digests():
    agent = ChromosomeAgent(list(range(3, 138, 9)))
    rec = play_game([agent, RandomLegalAgent(4)], 17)
    steps = list(replay_views(rec))
    assert len(steps) == len(rec)
    for view, turn in steps:
        assert view.digest() == turn.view_digest


def test_illegal_agent_is_reported_with_seat_and_turn():
    class Bad:
        name = "bad"

        def act(self, view, rng):
            return Action.hint_rank(view.viewer, 1)

    with pytest.raises(IllegalActionError, match=r"'bad' in seat \d returned illegal action .* at turn 0"):
        play_game([Bad(), Bad()], 1)


def test_game_length_bound_is_reached_and_never_exceeded():
    config = GameConfig(2)
    bound = max_turns(config)
    assert bound == 2 * 40 + 7 + 2

    class HintDiscard:
        name = "hint-discard"

        def act(self, view, rng):
            hints = [a for a in view.legal_actions() if a.is_hint]
            return hints[0] if hints else Action.discard(0)

    rec = play_game([HintDiscard(), HintDiscard()], 3)
    assert len(rec) == bound
    for seed in range(50):
        assert len(play_game([RandomLegalAgent(seed), RandomLegalAgent(seed + 1)], seed)) <= bound


def test_view_masks_own_cards_and_deck_order():
    state = new_game(2, 8)
    other = state.copy()
    other.hands[0][0], other.deck[3] = other.deck[3], other.hands[0][0]
    other.deck.reverse()
    assert state.view(0).to_json() == other.view(0).to_json()
    assert state.view(1).to_json() != other.view(1).to_json()
    assert all(c is None for c in state.view(0).hands[0])


def test_game_state_json_round_trip():
    state = new_game(3, 21)
    rng_agent = RandomLegalAgent(2)
    for _ in range(15):
        if state.is_terminal():
            break
        state.step(rng_agent.act(state.view(state.current_player), None))
    again = GameState.from_json(state.to_json())
    assert again.to_json() == state.to_json()
    assert again.is_terminal() == state.is_terminal()
    if not state.is_terminal():
        assert again.legal_actions() == state.legal_actions()


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), players=st.integers(2, 5), agent_seed=st.integers(0, 10**6))
def test_random_games_keep_invariants(seed, players, agent_seed):
    agents = [RandomLegalAgent(agent_seed + k) for k in range(players)]
    rec = play_game(agents, seed, check_invariants=True)
    assert 0 <= rec.score <= 25
    assert len(rec) <= max_turns(GameConfig(players))
    heights = [0] * 5
    for turn in rec.turns:
        for e in turn.events:
            if e["type"] == "play" and e.get("success"):
                heights[Card.parse(e["card"]).color] += 1
    assert sum(heights) == rec.score


@settings(max_examples=200, deadline=None)
@given(colors=st.integers(1, 31), ranks=st.integers(1, 31))
def test_knowledge_json_round_trip(colors, ranks):
    k = CardKnowledge(colors, ranks)
    assert CardKnowledge.from_json(k.to_json()) == k

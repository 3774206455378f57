import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hanabi_qd import kernel
from hanabi_qd.engine import Action, GameConfig, new_game
from hanabi_qd.rng import SplitMix64
from hanabi_qd.records import play_game
from hanabi_qd.rules import N_RULES, ChromosomeAgent, agent_act

from conftest import RandomLegalAgent

chromosome = st.lists(st.integers(0, N_RULES - 1), min_size=15, max_size=15)


def python_game(chroms, seat_rows, seed, n_players):
    agents = [ChromosomeAgent(chroms[r]) for r in seat_rows]
    return play_game(agents, seed, GameConfig(n_players))


def test_action_codes_round_trip():
    actions = [Action.play(s) for s in range(5)] + [Action.discard(s) for s in range(5)]
    actions += [Action.hint_color(t, c) for t in range(5) for c in range(5)]
    actions += [Action.hint_rank(t, r) for t in range(5) for r in range(1, 6)]
    codes = [kernel.encode_action(a) for a in actions]
    assert len(set(codes)) == len(codes)
    assert [kernel.decode_action(c) for c in codes] == actions


@settings(max_examples=60, deadline=None)
@given(chroms=st.lists(chromosome, min_size=1, max_size=3), seed=st.integers(0, 2**64 - 1),
       n_players=st.integers(2, 5), data=st.data())
def test_kernel_matches_python_engine(chroms, seed, n_players, data):
    rows = data.draw(st.lists(st.integers(0, len(chroms) - 1), min_size=n_players,
                              max_size=n_players))
    rec = python_game(chroms, rows, seed, n_players)
    score, codes, stats = kernel.trace_game(chroms, seed, rows, n_players)
    assert codes == [kernel.encode_action(t.action) for t in rec.turns]
    assert score == rec.score
    assert [tuple(s) for s in stats.tolist()] == [s.as_tuple() for s in rec.stats]


def test_batch_agrees_with_single_games():
    rng = np.random.default_rng(3)
    chroms = rng.integers(0, N_RULES, size=(2, 15))
    seeds = [int(s) for s in rng.integers(0, 2**63, size=50)]
    rows = rng.integers(0, 2, size=(50, 2))
    scores, stats, turns = kernel.simulate(chroms, seeds, rows)
    for g in range(50):
        rec = python_game(chroms.tolist(), rows[g].tolist(), seeds[g], 2)
        assert scores[g] == rec.score and turns[g] == len(rec)
        assert [tuple(s) for s in stats[g].tolist()] == [s.as_tuple() for s in rec.stats]


def test_parallel_batch_is_bit_identical():
    rng = np.random.default_rng(4)
    chroms = rng.integers(0, N_RULES, size=(3, 15))
    seeds = rng.integers(0, 2**63, size=200).astype(np.uint64)
    rows = rng.integers(0, 3, size=(200, 2))
    single = kernel.simulate(chroms, seeds, rows, threads=1)
    multi = kernel.simulate(chroms, seeds, rows, threads=4)
    for a, b in zip(single, multi):
        assert np.array_equal(a, b)


def test_simulate_validates_inputs():
    with pytest.raises(ValueError):
        kernel.simulate([[0] * 14], [1])
    with pytest.raises(ValueError):
        kernel.simulate([[N_RULES] * 15], [1])
    with pytest.raises(ValueError):
        kernel.simulate([[0] * 15], [1], n_players=6)


@settings(max_examples=40, deadline=None)
@given(genes=chromosome, seed=st.integers(0, 2**32), steps=st.integers(0, 60),
       players=st.integers(2, 5), rule_seed=st.integers(0, 2**64 - 1))
def test_actions_on_loaded_states_match_python(genes, seed, steps, players, rule_seed):
    state = new_game(players, seed)
    agent = RandomLegalAgent(seed)
    for _ in range(steps):
        if state.is_terminal():
            break
        state.step(agent.act(state.view(state.current_player), None))
    if state.is_terminal():
        return
    expected = agent_act(genes, state.view(state.current_player), SplitMix64(rule_seed))
    got = kernel.act_on_states([genes], kernel.state_array(state)[None, :], players,
                               np.array([[rule_seed]], dtype=np.uint64))
    assert kernel.decode_action(int(got[0, 0])) == expected

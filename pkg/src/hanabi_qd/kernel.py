"""Compiled game simulator for bulk evaluation.

Mirrors ``engine`` + ``rules`` on flat integer arrays so that millions of
chromosome-agent games can be played during evolution. Given the same seed and
chromosomes it produces exactly the same game as ``records.play_game`` (same
SplitMix64 draws, same tie-breaking, same float comparisons); the test-suite
checks this action-by-action.

All per-game state lives in one int64 array ``S`` (layout below) plus a small
float scratch array ``F`` for the acting player's card probabilities. Keeping
the number of array arguments low matters: every array passed to a compiled
helper costs a reference-count round trip.

Action codes: play ``slot``, discard ``1000 + slot``, color hint
``2000 + 10 * target + color``, rank hint ``3000 + 10 * target + rank``; -1 means
the rule abstained.
"""
from __future__ import annotations

import numpy as np
from numba import njit, prange

from .engine import COPIES, DECK_SIZE, HINT_COLOR, HINT_RANK, PLAY, Action
from .rng import GOLDEN_GAMMA, MIX1, MIX2, RULE_STREAM
from .rules import BASE_NAMES, CATALOG, CHROMOSOME_LENGTH

_GAMMA = np.uint64(GOLDEN_GAMMA)
_MIX1 = np.uint64(MIX1)
_MIX2 = np.uint64(MIX2)
_RULE_STREAM = np.uint64(RULE_STREAM)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)

_COPIES = np.array(COPIES, dtype=np.int64)
_POP = np.array([bin(m).count("1") for m in range(32)], dtype=np.int64)

MAX_PLAYERS = 5
# layout of the state array; hands are indexed p * 5 + slot
O_DECK = 0
O_HAND = O_DECK + DECK_SIZE
O_HN = O_HAND + 25
O_KC = O_HN + MAX_PLAYERS
O_KR = O_KC + 25
O_HT = O_KR + 25
O_FW = O_HT + 25
O_DISC = O_FW + 5
TOKENS = O_DISC + 25
LIVES = TOKENS + 1
CUR = TOKENS + 2
COUNTDOWN = TOKENS + 3
TURN = TOKENS + 4
DECK_N = TOKENS + 5
O_PLAYABLE = TOKENS + 6
O_DEAD = O_PLAYABLE + 25
O_CRIT = O_DEAD + 25
O_UNSEEN = O_CRIT + 25
O_CERT_PLAY = O_UNSEEN + 25
O_CERT_DEAD = O_CERT_PLAY + 5
O_HINT_MASKS = O_CERT_DEAD + 5  # per player: colors present, ranks present
STATE_SIZE = O_HINT_MASKS + 2 * MAX_PLAYERS
# float scratch: own-hand probabilities of the acting player
F_PLAY, F_DEAD, F_CRIT, F_RANK = 0, 5, 10, 15
F_SIZE = 20

# stats columns, same order as PlayStats
PIECES, PLAYED, HINTS, TOKEN_TURNS = range(4)

FAMILY_CODES = {"play": 0, "tell": 1, "discard": 2}
# rows of the integer catalog table
C_FAMILY, C_BASE, C_GATE = range(3)

_b = BASE_NAMES.index
B_PLAY_CERTAIN = _b("PlayIfCertain")
B_PLAY_PROB = _b("PlayProbability")
B_PLAY_RECENT = _b("PlayMostRecentlyHinted")
B_TELL_PLAYABLE = _b("TellAboutPlayableCard")
B_TELL_USELESS = _b("TellAboutUselessCard")
B_TELL_MOST_INFO = _b("TellMostInformation")
B_TELL_ONES = _b("TellAboutOnes")
B_TELL_FIVES = _b("TellAboutFives")
B_TELL_RANDOM = _b("TellRandomly")
B_TELL_SET_COLOR = _b("TellToSetSingletonColor")
B_TELL_SET_RANK = _b("TellToSetSingletonRank")
B_TELL_DANGER = _b("TellDangerCard")
B_TELL_UNKNOWN = _b("TellUnknownCard")
B_DISC_OLDEST = _b("DiscardOldest")
B_DISC_RANDOM = _b("DiscardRandom")
B_DISC_USELESS = _b("DiscardUseless")
B_DISC_PROB = _b("DiscardProbabilityUseless")
B_DISC_HIGHEST = _b("DiscardHighestRank")
B_DISC_LEAST_INFO = _b("DiscardLeastInformation")
B_DISC_NO_INFO = _b("DiscardOldestNoInfo")
B_DISC_CRITICAL = _b("DiscardLeastLikelyCritical")
del _b
assert B_TELL_PLAYABLE < B_DISC_OLDEST and B_TELL_UNKNOWN < B_DISC_OLDEST

_EDGE_TOL = 1e-9


def catalog_arrays(catalog=CATALOG):
    """(int table with rows family/base/gate, float params) for the kernel."""
    table = np.array([[FAMILY_CODES[r.family] for r in catalog],
                      [r.base_code for r in catalog],
                      [r.gate for r in catalog]], dtype=np.int64)
    param = np.array([-1.0 if r.param is None else r.param for r in catalog], dtype=np.float64)
    return table, param


CAT = catalog_arrays()


def encode_action(action: Action) -> int:
    if action.kind == PLAY:
        return action.slot
    if action.kind == HINT_COLOR:
        return 2000 + 10 * action.target + action.value
    if action.kind == HINT_RANK:
        return 3000 + 10 * action.target + action.value
    return 1000 + action.slot


def decode_action(code: int) -> Action:
    kind, rest = divmod(int(code), 1000)
    if kind == 0:
        return Action.play(rest)
    if kind == 1:
        return Action.discard(rest)
    target, value = divmod(rest, 10)
    if kind == 2:
        return Action.hint_color(target, value)
    return Action.hint_rank(target, value)


# --------------------------------------------------------------------------- rng

@njit(cache=True)
def _next(rng, k):
    rng[k] += _GAMMA
    z = rng[k]
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(cache=True)
def _below(rng, k, n):
    return np.int64(_next(rng, k) % np.uint64(n))


# --------------------------------------------------------------------------- state

@njit(cache=True)
def _deal(seed, n_players, hand_size, S, rng):
    S[:] = 0
    rng[0] = seed
    rng[1] = seed ^ _RULE_STREAM
    k = 0
    for c in range(5):
        for r in range(5):
            for _ in range(_COPIES[r]):
                S[O_DECK + k] = c * 5 + r
                k += 1
    for i in range(DECK_SIZE - 1, 0, -1):
        j = _below(rng, 0, i + 1)
        t = S[O_DECK + i]
        S[O_DECK + i] = S[O_DECK + j]
        S[O_DECK + j] = t
    n = DECK_SIZE
    for p in range(n_players):
        for s in range(hand_size):
            n -= 1
            h = p * 5 + s
            S[O_HAND + h] = S[O_DECK + n]
            S[O_KC + h] = 31
            S[O_KR + h] = 31
            S[O_HT + h] = -1
        S[O_HN + p] = hand_size
    S[TOKENS] = 8
    S[LIVES] = 3
    S[COUNTDOWN] = -1
    S[DECK_N] = n
    S[CUR] = _below(rng, 0, n_players)


@njit(cache=True)
def _terminal(S):
    if S[LIVES] == 0 or S[COUNTDOWN] == 0:
        return True
    for c in range(5):
        if S[O_FW + c] != 5:
            return False
    return True


@njit(cache=True)
def _score(S):
    total = 0
    for c in range(5):
        total += S[O_FW + c]
    return total


@njit(cache=True)
def _remove(S, p, slot):
    for h in range(p * 5 + slot, p * 5 + S[O_HN + p] - 1):
        S[O_HAND + h] = S[O_HAND + h + 1]
        S[O_KC + h] = S[O_KC + h + 1]
        S[O_KR + h] = S[O_KR + h + 1]
        S[O_HT + h] = S[O_HT + h + 1]
    S[O_HN + p] -= 1


@njit(cache=True)
def _draw(S, p):
    if S[DECK_N] > 0:
        S[DECK_N] -= 1
        h = p * 5 + S[O_HN + p]
        S[O_HAND + h] = S[O_DECK + S[DECK_N]]
        S[O_KC + h] = 31
        S[O_KR + h] = 31
        S[O_HT + h] = -1
        S[O_HN + p] += 1


@njit(cache=True)
def _step(code, n_players, S, stats):
    """Apply a (legal) action for the current player and update its stats."""
    p = S[CUR]
    kind = code // 1000
    running = S[COUNTDOWN] >= 0
    if S[TOKENS] >= 1:
        stats[p, TOKEN_TURNS] += 1
        if kind >= 2:
            stats[p, HINTS] += 1
    if kind == 0:
        h = p * 5 + code
        card = S[O_HAND + h]
        stats[p, PLAYED] += 1
        stats[p, PIECES] += (_POP[S[O_KC + h]] == 1) + (_POP[S[O_KR + h]] == 1)
        _remove(S, p, code)
        c = card // 5
        r = card % 5 + 1
        if r == S[O_FW + c] + 1:
            S[O_FW + c] += 1
            if r == 5 and S[TOKENS] < 8:
                S[TOKENS] += 1
        else:
            S[O_DISC + card] += 1
            S[LIVES] -= 1
        _draw(S, p)
    elif kind == 1:
        card = S[O_HAND + p * 5 + code - 1000]
        _remove(S, p, code - 1000)
        S[O_DISC + card] += 1
        if S[TOKENS] < 8:
            S[TOKENS] += 1
        _draw(S, p)
    else:
        S[TOKENS] -= 1
        rest = code % 1000
        target = rest // 10
        value = rest % 10
        for h in range(target * 5, target * 5 + S[O_HN + target]):
            card = S[O_HAND + h]
            if kind == 2:
                bit = 1 << value
                if card // 5 == value:
                    S[O_KC + h] = bit
                    S[O_HT + h] = S[TURN]
                else:
                    S[O_KC + h] &= ~bit
            else:
                bit = 1 << (value - 1)
                if card % 5 + 1 == value:
                    S[O_KR + h] = bit
                    S[O_HT + h] = S[TURN]
                else:
                    S[O_KR + h] &= ~bit
    if running:
        S[COUNTDOWN] -= 1
    elif S[DECK_N] == 0:
        S[COUNTDOWN] = n_players
    S[CUR] = (p + 1) % n_players
    S[TURN] += 1


@njit(cache=True)
def _legal(code, n_players, S):
    p = S[CUR]
    if code < 0:
        return False
    kind = code // 1000
    if kind == 0:
        return code < S[O_HN + p]
    if kind == 1:
        return S[TOKENS] < 8 and code - 1000 < S[O_HN + p]
    if kind > 3 or S[TOKENS] < 1:
        return False
    rest = code % 1000
    target = rest // 10
    value = rest % 10
    if target == p or target >= n_players:
        return False
    for h in range(target * 5, target * 5 + S[O_HN + target]):
        card = S[O_HAND + h]
        if kind == 2 and card // 5 == value:
            return True
        if kind == 3 and card % 5 + 1 == value:
            return True
    return False


# --------------------------------------------------------------------------- analysis

@njit(cache=True)
def _analyse(p, n_players, S, F):
    """Fill card tables (playable/dead/critical) and own-hand probabilities."""
    for c in range(5):
        blocked = False
        height = S[O_FW + c]
        for r in range(1, 6):
            i = c * 5 + r - 1
            dead = r <= height or blocked
            S[O_PLAYABLE + i] = r == height + 1
            S[O_DEAD + i] = dead
            S[O_CRIT + i] = (not dead) and _COPIES[r - 1] - S[O_DISC + i] == 1
            if r > height and S[O_DISC + i] == _COPIES[r - 1]:
                blocked = True
            S[O_UNSEEN + i] = _COPIES[r - 1] - S[O_DISC + i] - (1 if r <= height else 0)
    for q in range(n_players):
        if q != p:
            for h in range(q * 5, q * 5 + S[O_HN + q]):
                S[O_UNSEEN + S[O_HAND + h]] -= 1
    for s in range(S[O_HN + p]):
        h = p * 5 + s
        kcm = S[O_KC + h]
        krm = S[O_KR + h]
        total = 0
        play = 0
        dead = 0
        crit = 0
        rank_sum = 0
        all_play = 1
        all_dead = 1
        for c in range(5):
            if (kcm >> c) & 1:
                for r in range(5):
                    if (krm >> r) & 1:
                        i = c * 5 + r
                        w = S[O_UNSEEN + i]
                        total += w
                        if S[O_PLAYABLE + i]:
                            play += w
                        else:
                            all_play = 0
                        if S[O_DEAD + i]:
                            dead += w
                        else:
                            all_dead = 0
                        if S[O_CRIT + i]:
                            crit += w
                        rank_sum += w * (r + 1)
        if total == 0:
            total = 1
        F[F_PLAY + s] = play / total
        F[F_DEAD + s] = dead / total
        F[F_CRIT + s] = crit / total
        F[F_RANK + s] = rank_sum / total
        S[O_CERT_PLAY + s] = all_play
        S[O_CERT_DEAD + s] = all_dead


@njit(cache=True)
def _argmax(F, off, n):
    best = 0
    for s in range(1, n):
        if F[off + s] > F[off + best]:
            best = s
    return best


@njit(cache=True)
def _argmin(F, off, n):
    best = 0
    for s in range(1, n):
        if F[off + s] < F[off + best]:
            best = s
    return best


@njit(cache=True)
def _hint_for(target, card, kcm, krm):
    if _POP[krm] != 1:
        return 3000 + 10 * target + card % 5 + 1
    if _POP[kcm] != 1:
        return 2000 + 10 * target + card // 5
    return -1


@njit(cache=True)
def _hint_info(kind, t, v, S):
    gained = 0
    for h in range(t * 5, t * 5 + S[O_HN + t]):
        card = S[O_HAND + h]
        if kind == 2:
            if card // 5 == v:
                gained += _POP[S[O_KC + h]] - 1
            else:
                gained += (S[O_KC + h] >> v) & 1
        else:
            if card % 5 + 1 == v:
                gained += _POP[S[O_KR + h]] - 1
            else:
                gained += (S[O_KR + h] >> (v - 1)) & 1
    return gained


@njit(cache=True)
def _scan_hints(p, n_players, S, rng, random_pick):
    """Walk legal hints in canonical order. With ``random_pick`` return a
    uniformly drawn one; otherwise the first hint with the most information."""
    n_hints = 0
    for t in range(n_players):
        if t == p:
            continue
        cm = 0
        rm = 0
        for h in range(t * 5, t * 5 + S[O_HN + t]):
            cm |= 1 << (S[O_HAND + h] // 5)
            rm |= 1 << (S[O_HAND + h] % 5)
        S[O_HINT_MASKS + 2 * t] = cm
        S[O_HINT_MASKS + 2 * t + 1] = rm
        n_hints += _POP[cm] + _POP[rm]
    if n_hints == 0:
        return -1
    pick = _below(rng, 1, n_hints) if random_pick else -1
    k = 0
    best = -1
    best_info = 0
    for t in range(n_players):
        if t == p:
            continue
        for kind in range(2, 4):
            m = S[O_HINT_MASKS + 2 * t + kind - 2]
            for v in range(5):
                if (m >> v) & 1:
                    value = v if kind == 2 else v + 1
                    code = kind * 1000 + 10 * t + value
                    if random_pick:
                        if k == pick:
                            return code
                    else:
                        info = _hint_info(kind, t, value, S)
                        if info > best_info:
                            best = code
                            best_info = info
                    k += 1
    return best


@njit(cache=True)
def _all_dead(kcm, krm, S):
    for c in range(5):
        if (kcm >> c) & 1:
            for r in range(5):
                if (krm >> r) & 1 and S[O_DEAD + c * 5 + r] == 0:
                    return False
    return True


@njit(cache=True)
def _gate_open(family, gate, S):
    if family == 0:
        return S[LIVES] > gate
    if family == 1:
        return S[TOKENS] > gate
    return S[TOKENS] < gate


@njit(cache=True)
def _tell(base, p, n_players, S):
    """Card-scanning tell rules: partners from the next player on, oldest card first."""
    for k in range(1, n_players):
        t = (p + k) % n_players
        for h in range(t * 5, t * 5 + S[O_HN + t]):
            card = S[O_HAND + h]
            kcm = S[O_KC + h]
            krm = S[O_KR + h]
            if base == B_TELL_PLAYABLE:
                if S[O_PLAYABLE + card]:
                    code = _hint_for(t, card, kcm, krm)
                    if code >= 0:
                        return code
            elif base == B_TELL_USELESS:
                if S[O_DEAD + card] and not _all_dead(kcm, krm, S):
                    code = _hint_for(t, card, kcm, krm)
                    if code >= 0:
                        return code
            elif base == B_TELL_ONES:
                if card % 5 == 0 and _POP[krm] != 1:
                    return 3000 + 10 * t + 1
            elif base == B_TELL_FIVES:
                if card % 5 == 4 and _POP[krm] != 1:
                    return 3000 + 10 * t + 5
            elif base == B_TELL_SET_COLOR:
                if S[O_DEAD + card] == 0 and _POP[krm] == 1 and _POP[kcm] != 1:
                    return 2000 + 10 * t + card // 5
            elif base == B_TELL_SET_RANK:
                if S[O_DEAD + card] == 0 and _POP[kcm] == 1 and _POP[krm] != 1:
                    return 3000 + 10 * t + card % 5 + 1
            elif base == B_TELL_DANGER:
                if S[O_CRIT + card]:
                    code = _hint_for(t, card, kcm, krm)
                    if code >= 0:
                        return code
            elif base == B_TELL_UNKNOWN:
                if kcm == 31 and krm == 31:
                    return _hint_for(t, card, kcm, krm)
    return -1


@njit(cache=True)
def _eval_rule(base, param, p, n_players, S, F, rng):
    """Action of an open rule for player ``p`` (tables already analysed)."""
    n = S[O_HN + p]
    if base == B_PLAY_CERTAIN:
        for s in range(n):
            if S[O_CERT_PLAY + s]:
                return s
        return -1
    if base == B_PLAY_PROB:
        if n == 0:
            return -1
        best = _argmax(F, F_PLAY, n)
        return best if F[F_PLAY + best] > param else -1
    if base == B_PLAY_RECENT:
        latest = -1
        for s in range(n):
            if S[O_HT + p * 5 + s] > latest:
                latest = S[O_HT + p * 5 + s]
        if latest < 0:
            return -1
        for s in range(n):
            if S[O_HT + p * 5 + s] == latest and F[F_PLAY + s] > 0:
                return s
        return -1
    if base == B_TELL_MOST_INFO:
        return _scan_hints(p, n_players, S, rng, False)
    if base == B_TELL_RANDOM:
        return _scan_hints(p, n_players, S, rng, True)
    if base < B_DISC_OLDEST:
        return _tell(base, p, n_players, S)
    if n == 0:
        return -1
    if base == B_DISC_OLDEST:
        return 1000
    if base == B_DISC_RANDOM:
        return 1000 + _below(rng, 1, n)
    if base == B_DISC_USELESS:
        for s in range(n):
            if S[O_CERT_DEAD + s]:
                return 1000 + s
        return -1
    if base == B_DISC_PROB:
        best = _argmax(F, F_DEAD, n)
        return 1000 + best if F[F_DEAD + best] >= param else -1
    if base == B_DISC_HIGHEST:
        return 1000 + _argmax(F, F_RANK, n)
    if base == B_DISC_LEAST_INFO:
        best = 0
        best_k = 3
        for s in range(n):
            h = p * 5 + s
            k = (_POP[S[O_KC + h]] == 1) + (_POP[S[O_KR + h]] == 1)
            if k < best_k:
                best = s
                best_k = k
        return 1000 + best
    if base == B_DISC_NO_INFO:
        for s in range(n):
            if S[O_KC + p * 5 + s] == 31 and S[O_KR + p * 5 + s] == 31:
                return 1000 + s
        return -1
    if base == B_DISC_CRITICAL:
        return 1000 + _argmin(F, F_CRIT, n)
    return -1


@njit(cache=True)
def _act(chrom, p, n_players, S, F, rng, cat, cat_param):
    _analyse(p, n_players, S, F)
    for g in range(chrom.shape[0]):
        rid = chrom[g]
        if not _gate_open(cat[C_FAMILY, rid], cat[C_GATE, rid], S):
            continue
        code = _eval_rule(cat[C_BASE, rid], cat_param[rid], p, n_players, S, F, rng)
        if code >= 0:
            return code
    if S[TOKENS] < 8:
        return 1000
    return _argmax(F, F_PLAY, S[O_HN + p])


# --------------------------------------------------------------------------- games

@njit(cache=True)
def _play(chroms, seat_rows, seed, n_players, hand_size, cat, cat_param, stats, trace):
    """One game; seat ``q`` is driven by ``chroms[seat_rows[q]]``.

    Adds per-seat stats into ``stats`` and writes action codes into ``trace``
    (if it has room). Returns (score, turns); a score of -1 flags an illegal
    action, which would mean the kernel disagrees with the rule contract.
    """
    S = np.empty(STATE_SIZE, np.int64)
    F = np.zeros(F_SIZE, np.float64)
    rng = np.zeros(2, np.uint64)
    _deal(seed, n_players, hand_size, S, rng)
    while not _terminal(S):
        p = S[CUR]
        code = _act(chroms[seat_rows[p]], p, n_players, S, F, rng, cat, cat_param)
        if not _legal(code, n_players, S):
            return -1, S[TURN]
        if S[TURN] < trace.shape[0]:
            trace[S[TURN]] = code
        _step(code, n_players, S, stats)
    return _score(S), S[TURN]


@njit(cache=True)
def _batch(chroms, seat_rows, seeds, n_players, hand_size, cat, cat_param, scores, stats, turns):
    trace = np.empty(0, np.int64)
    for g in range(seeds.shape[0]):
        scores[g], turns[g] = _play(chroms, seat_rows[g], seeds[g], n_players, hand_size,
                                    cat, cat_param, stats[g], trace)


@njit(parallel=True, cache=True)
def _batch_parallel(chroms, seat_rows, seeds, n_players, hand_size, cat, cat_param, scores,
                    stats, turns):
    trace = np.empty(0, np.int64)
    for g in prange(seeds.shape[0]):
        scores[g], turns[g] = _play(chroms, seat_rows[g], seeds[g], n_players, hand_size,
                                    cat, cat_param, stats[g], trace)


@njit(cache=True)
def _niche_of(model, bins):
    ipp = model[PIECES] / (2 * model[PLAYED])
    comm = model[HINTS] / model[TOKEN_TURNS]
    i = min(bins - 1, np.int64(np.floor(ipp * bins + _EDGE_TOL)))
    j = min(bins - 1, np.int64(np.floor(comm * bins + _EDGE_TOL)))
    return i, j


@njit(cache=True)
def _meta_batch(chroms, partner_row, generalist_row, lookup, threshold, persist, meta_seat,
                seeds, cat, cat_param, scores, model, used_specialist):
    """Adaptive meta-agent in ``meta_seat`` of two-player games against
    ``chroms[partner_row]``.

    Before each of its turns the meta-agent estimates the partner's niche from
    the partner stats observed so far (``model[:4]``, partner turn count in
    ``model[4]``; pooled across games when ``persist``) and plays
    ``chroms[lookup[i, j]]`` once more than ``threshold`` partner turns have
    been seen, else the generalist. ``threshold < 0`` means never switch.
    """
    bins = lookup.shape[0]
    partner = 1 - meta_seat
    S = np.empty(STATE_SIZE, np.int64)
    F = np.zeros(F_SIZE, np.float64)
    rng = np.zeros(2, np.uint64)
    stats = np.zeros((2, 4), np.int64)
    for g in range(seeds.shape[0]):
        if not persist:
            model[:] = 0
        stats[:] = 0
        _deal(seeds[g], 2, 5, S, rng)
        legal = True
        while legal and not _terminal(S):
            p = S[CUR]
            row = partner_row
            if p == meta_seat:
                row = generalist_row
                if (threshold >= 0 and model[4] > threshold and model[PLAYED] > 0
                        and model[TOKEN_TURNS] > 0):
                    i, j = _niche_of(model, bins)
                    row = lookup[i, j]
                    used_specialist[g] += 1
            code = _act(chroms[row], p, 2, S, F, rng, cat, cat_param)
            legal = _legal(code, 2, S)
            if legal:
                if p == partner:
                    for k in range(4):
                        model[k] -= stats[partner, k]
                _step(code, 2, S, stats)
                if p == partner:
                    for k in range(4):
                        model[k] += stats[partner, k]
                    model[4] += 1
        scores[g] = _score(S) if legal else -1


# --------------------------------------------------------------------------- python API

class KernelError(RuntimeError):
    pass


def _as_chroms(chromosomes) -> np.ndarray:
    arr = np.asarray(chromosomes, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[1] != CHROMOSOME_LENGTH:
        raise ValueError(f"chromosomes must have {CHROMOSOME_LENGTH} genes")
    if arr.min() < 0 or arr.max() >= len(CATALOG):
        raise ValueError("chromosome contains an unknown rule id")
    return np.ascontiguousarray(arr)


def _as_seeds(seeds) -> np.ndarray:
    if isinstance(seeds, np.ndarray) and seeds.dtype == np.uint64:
        return seeds
    return np.array([int(s) & ((1 << 64) - 1) for s in seeds], dtype=np.uint64)


def _hand_size(n_players):
    return 5 if n_players <= 3 else 4


def _default_rows(n_chroms, n_players):
    if n_chroms >= n_players:
        return np.arange(n_players, dtype=np.int64)
    return np.zeros(n_players, np.int64)


def simulate(chromosomes, seeds, seat_rows=None, n_players: int = 2, threads: int = 1):
    """Play one game per seed. ``seat_rows[g][q]`` selects the chromosome for
    seat ``q`` of game ``g`` (default: ``chromosomes[q]``, or the single
    chromosome in every seat).

    Returns ``(scores[n], stats[n, n_players, 4], turns[n])``.
    """
    if not 2 <= n_players <= MAX_PLAYERS:
        raise ValueError(f"player count must be in 2..{MAX_PLAYERS}")
    chroms = _as_chroms(chromosomes)
    seeds_arr = _as_seeds(seeds)
    n = seeds_arr.shape[0]
    if seat_rows is None:
        seat_rows = np.tile(_default_rows(chroms.shape[0], n_players), (n, 1))
    seat_rows = np.ascontiguousarray(seat_rows, dtype=np.int64)
    if seat_rows.shape != (n, n_players):
        raise ValueError("seat_rows must hold one row of seat assignments per seed")
    scores = np.zeros(n, np.int64)
    stats = np.zeros((n, n_players, 4), np.int64)
    turns = np.zeros(n, np.int64)
    fn = _batch_parallel if threads > 1 else _batch
    fn(chroms, seat_rows, seeds_arr, n_players, _hand_size(n_players), *CAT, scores, stats, turns)
    if (scores < 0).any():
        bad = int(seeds_arr[np.argmin(scores)])
        raise KernelError(f"kernel produced an illegal action (seed {bad})")
    return scores, stats, turns


def trace_game(chromosomes, seed, seat_rows=None, n_players: int = 2):
    """Score, action codes and per-seat stats of one game, for cross-checking
    against the Python engine."""
    chroms = _as_chroms(chromosomes)
    if seat_rows is None:
        seat_rows = _default_rows(chroms.shape[0], n_players)
    seat_rows = np.asarray(seat_rows, dtype=np.int64)
    stats = np.zeros((n_players, 4), np.int64)
    trace = np.full(512, -1, np.int64)
    score, turns = _play(chroms, seat_rows, _as_seeds([seed])[0], n_players,
                         _hand_size(n_players), *CAT, stats, trace)
    return int(score), [int(c) for c in trace[:turns]], stats


def simulate_meta(chromosomes, partner_row, generalist_row, lookup, threshold, persist, seeds,
                  meta_seat: int = 0, model=None):
    """Run the adaptive meta-agent over ``seeds`` in order (two players).

    Returns ``(scores, model, specialist_turns)``: ``model`` holds the final
    partner stats followed by the partner-turn count (pass it back in to
    continue); ``specialist_turns[g]`` counts meta turns that used a response
    policy rather than the generalist.
    """
    chroms = _as_chroms(chromosomes)
    seeds_arr = _as_seeds(seeds)
    n = seeds_arr.shape[0]
    scores = np.zeros(n, np.int64)
    model = np.zeros(5, np.int64) if model is None else np.array(model, dtype=np.int64)
    used = np.zeros(n, np.int64)
    thr = -1 if threshold is None or threshold == float("inf") else int(threshold)
    _meta_batch(chroms, int(partner_row), int(generalist_row),
                np.ascontiguousarray(lookup, dtype=np.int64), thr, bool(persist), int(meta_seat),
                seeds_arr, *CAT, scores, model, used)
    if (scores < 0).any():
        raise KernelError("kernel produced an illegal action in a meta-agent game")
    return scores, model, used


# --------------------------------------------------------------------------- loaded states

def state_array(state) -> np.ndarray:
    """Pack an ``engine.GameState`` into the kernel layout."""
    if state.n_players > MAX_PLAYERS:
        raise ValueError("too many players for the kernel")
    S = np.zeros(STATE_SIZE, np.int64)
    for k, card in enumerate(state.deck):
        S[O_DECK + k] = card.index
    S[DECK_N] = len(state.deck)
    for p, (hand, know) in enumerate(zip(state.hands, state.knowledge)):
        S[O_HN + p] = len(hand)
        for s, (card, kn) in enumerate(zip(hand, know)):
            h = p * 5 + s
            S[O_HAND + h] = card.index
            S[O_KC + h] = kn.colors
            S[O_KR + h] = kn.ranks
            S[O_HT + h] = kn.hinted_turn
    for c, height in enumerate(state.fireworks):
        S[O_FW + c] = height
    for card in state.discard:
        S[O_DISC + card.index] += 1
    S[TOKENS] = state.hint_tokens
    S[LIVES] = state.lives
    S[CUR] = state.current_player
    S[COUNTDOWN] = -1 if state.final_countdown is None else state.final_countdown
    S[TURN] = state.turn
    return S


@njit(cache=True)
def _act_on_states(chroms, states, n_players, rule_seeds, cat, cat_param, out):
    F = np.zeros(F_SIZE, np.float64)
    rng = np.zeros(2, np.uint64)
    S = np.empty(STATE_SIZE, np.int64)
    for a in range(chroms.shape[0]):
        for k in range(states.shape[0]):
            S[:] = states[k]
            rng[1] = rule_seeds[a, k]
            out[a, k] = _act(chroms[a], S[CUR], n_players[k], S, F, rng, cat, cat_param)


def act_on_states(chromosomes, states: np.ndarray, n_players, rule_seeds) -> np.ndarray:
    """Action code of every chromosome on every packed state.

    ``rule_seeds[a, k]`` seeds the rule stream of chromosome ``a`` on state ``k``
    (only rules with internal randomness draw from it).
    """
    chroms = _as_chroms(chromosomes)
    states = np.ascontiguousarray(states, dtype=np.int64).reshape(-1, STATE_SIZE)
    n_players = np.broadcast_to(np.asarray(n_players, dtype=np.int64), (states.shape[0],)).copy()
    rule_seeds = np.ascontiguousarray(rule_seeds, dtype=np.uint64).reshape(chroms.shape[0], -1)
    out = np.zeros((chroms.shape[0], states.shape[0]), np.int64)
    _act_on_states(chroms, states, n_players, rule_seeds, *CAT, out)
    return out

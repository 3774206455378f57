"""Seed plumbing.

Games use a SplitMix64 stream so that the pure-Python engine and the compiled
kernel draw bit-identical numbers. Everything above the game level (evolution,
evaluation seed lists) uses numpy generators keyed by named substreams of one
master seed.
"""
from __future__ import annotations

import hashlib
import json

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
# xor-ed into the game seed to get the rule stream, kept apart from the deck stream
RULE_STREAM = 0xD1B54A32D192ED03


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * MIX1) & MASK64
        z = ((z ^ (z >> 27)) * MIX2) & MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        return self.next_u64() % n

    def __repr__(self):
        return f"SplitMix64(state={self.state:#x})"


def rule_rng(game_seed: int) -> SplitMix64:
    return SplitMix64(int(game_seed) ^ RULE_STREAM)


def derive_seed(master: int, *labels) -> int:
    """64-bit seed for the substream named by ``labels`` under ``master``."""
    payload = json.dumps([int(master), *labels], separators=(",", ":")).encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def seed_list(master: int, n: int, *labels) -> list[int]:
    """``n`` game seeds for one named substream, e.g. ("evaluation", generation)."""
    gen = np.random.default_rng(derive_seed(master, *labels))
    return [int(s) for s in gen.integers(0, 1 << 63, size=n, dtype=np.uint64)]

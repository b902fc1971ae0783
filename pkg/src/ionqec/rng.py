"""Counter-based per-trial random streams.

Every trial owns a 64-bit splitmix state derived from (master seed, trial
index).  Results therefore depend only on the trial index, never on how the
trials are split across chunks or worker processes.
"""
from __future__ import annotations

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def next_u64(state):
    """Advance ``state[0]`` and return the next 64-bit output."""
    s = state[0] + _GOLDEN
    state[0] = s
    return mix64(s)


@njit(cache=True)
def uniform(state):
    return float(next_u64(state) >> np.uint64(11)) * _INV53


@njit(cache=True)
def trial_key(master, index):
    return mix64(mix64(np.uint64(master) ^ _GOLDEN) + np.uint64(index) * _M1)


@njit(cache=True)
def init_streams(master, first, count):
    out = np.empty(count, dtype=np.uint64)
    for i in range(count):
        out[i] = trial_key(master, first + i)
    return out


def seed_from_generator(rng: np.random.Generator) -> int:
    """Draw a master seed from a numpy generator."""
    return int(rng.integers(0, 2**63 - 1))


def streams(master_seed: int, first: int, count: int) -> np.ndarray:
    return init_streams(np.uint64(master_seed % 2**64), np.uint64(first), count)

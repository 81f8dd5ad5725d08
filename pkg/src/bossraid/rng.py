"""Counter-based random streams.

A stream is a 64-bit key plus a draw counter; draw ``c`` is a pure function of
``(key, c)``. Streams for different episodes never share state, so episodes can
run in any order or on any worker and still reproduce bit-for-bit.

The mixer is the SplitMix64 finalizer. The same jitted functions are used from
Python and from inside compiled kernels.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0
_MASK64 = (1 << 64) - 1


@njit(cache=True)
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def next_u64(state):
    """Advance ``state = [key, counter]`` and return the next 64-bit output."""
    c = state[1]
    state[1] = c + _ONE
    return mix64(state[0] ^ mix64((c + _ONE) * _GOLDEN))


@njit(cache=True)
def next_uniform(state):
    return np.float64(next_u64(state) >> np.uint64(11)) * _INV53


@njit(cache=True)
def next_below(state, n):
    """Integer in [0, n)."""
    k = np.int64(next_uniform(state) * n)
    return k if k < n else n - 1


@njit(cache=True)
def _fold(parts):
    h = mix64(_GOLDEN)
    for i in range(parts.shape[0]):
        h = mix64(h ^ (parts[i] + _GOLDEN))
    return h


def derive_key(*parts: int) -> int:
    """Hash any number of integers (seed, arena, episode, ...) into a stream key."""
    arr = np.array([p & _MASK64 for p in parts], dtype=np.uint64)
    return int(_fold(arr))


class CounterRNG:
    """Python handle on a ``[key, counter]`` stream.

    ``state`` is the live uint64 array, shared with whoever else holds it (an
    episode's combat state hands its stream to the policies this way).
    """

    __slots__ = ("state",)

    def __init__(self, key: int = 0, counter: int = 0, *, state: np.ndarray | None = None):
        if state is None:
            state = np.array([key & _MASK64, counter & _MASK64], dtype=np.uint64)
        self.state = state

    @classmethod
    def from_seed(cls, *parts: int) -> "CounterRNG":
        return cls(derive_key(*parts))

    @property
    def key(self) -> int:
        return int(self.state[0])

    @property
    def counter(self) -> int:
        return int(self.state[1])

    def uniform(self) -> float:
        return float(next_uniform(self.state))

    def integers(self, n: int) -> int:
        if n < 1:
            raise ValueError("n must be >= 1")
        return int(next_below(self.state, n))

    def choice(self, seq):
        return seq[self.integers(len(seq))]

    def copy(self) -> "CounterRNG":
        return CounterRNG(state=self.state.copy())

    def __repr__(self) -> str:
        return f"CounterRNG(key={self.key:#018x}, counter={self.counter})"

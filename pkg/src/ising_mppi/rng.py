"""Project-wide deterministic randomness.

Everything stochastic in this package is keyed off SplitMix64, a tiny
counter-based 64-bit generator (Steele, Lea & Flood 2014).  It has a single
64-bit state that advances by a fixed odd increment, so the n-th output is a
pure function of (seed, n) and is bit-identical on every platform.  The Gibbs
kernel re-implements the same update inline (see sampler.py); this module is
the reference implementation and the seed-derivation utilities built on it.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mask64(value: int) -> int:
    """Reduce an arbitrary Python int to its low 64 bits."""
    return value & _MASK64


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a SplitMix64 state once.

    Returns (next_state, output).  With state 0 the first outputs are
    0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F (the published
    reference vectors), which the tests pin.
    """
    state = (state + _GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return state, z ^ (z >> 31)


def uniform_from_bits(word: int) -> float:
    """Map a 64-bit word to a double in [0, 1) using its top 53 bits."""
    return (word >> 11) * (1.0 / 9007199254740992.0)


def mix64(*parts: int) -> int:
    """Hash an ordered tuple of integers into one 64-bit seed.

    Each part is folded into the state with XOR and one SplitMix64 step, so
    distinct tuples give unrelated seeds and appending new parts never
    perturbs seeds derived from shorter tuples elsewhere.
    """
    acc = 0
    for p in parts:
        acc, out = splitmix64((acc ^ (p & _MASK64)) & _MASK64)
        acc = out
    return acc


class SeedStream:
    """Stateful stream of 64-bit seeds for staged pipelines.

    A controller step draws one seed per sampling call, so replaying a trial
    with the same root seed replays every random decision in order.
    """

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state, out = splitmix64(self._state)
        return out

    def next_uniform(self) -> float:
        return uniform_from_bits(self.next_u64())

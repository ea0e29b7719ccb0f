"""Deterministic RNG backbone: splitmix64 plus the shuffles built on it.

Every randomized operation in the toolkit draws from this one generator so
that results are reproducible bit-for-bit across platforms and languages.
Bounded draws use plain modulo; the bias is negligible at the scales the
toolkit targets and keeps the stream trivially replayable.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1


def rng_next(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (new_state, output), all mod 2**64."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, (z ^ (z >> 31)) & _MASK64


class SplitMix64:
    """Stateful wrapper over :func:`rng_next`."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next(self) -> int:
        self.state, out = rng_next(self.state)
        return out

    def below(self, bound: int) -> int:
        """Uniform-ish draw in [0, bound) via modulo."""
        return self.next() % bound


def shuffle_in_place(items, seed: int):
    """Fisher-Yates from the last index down to 1, driven by one seeded stream.

    Accepts any mutable indexable (list, numpy array); returns it for chaining.
    """
    rng = SplitMix64(seed)
    for i in range(len(items) - 1, 0, -1):
        j = rng.below(i + 1)
        items[i], items[j] = items[j], items[i]
    return items


def draw_without_replacement(population_size: int, k: int, seed: int) -> list[int]:
    """First k entries of a partial Fisher-Yates over [0, population_size).

    Returned in draw order. k past the population returns everything once.
    The virtual array is kept as a sparse dict of displaced entries, so the
    cost is O(k) regardless of population size, with output identical to
    shuffling a dense [0, n) array and taking its first k entries.
    """
    n = population_size
    k = min(k, n)
    rng = SplitMix64(seed)
    displaced: dict[int, int] = {}
    out: list[int] = []
    for i in range(k):
        j = i + rng.below(n - i)
        vi = displaced.get(i, i)
        vj = displaced.get(j, j)
        displaced[i], displaced[j] = vj, vi
        out.append(vj)
    return out


def weighted_pick(values: list[int], counts: list[int], rng: SplitMix64) -> int:
    """Pick one value proportional to counts, walking in the given order."""
    total = sum(counts)
    r = rng.below(total)
    acc = 0
    for value, count in zip(values, counts):
        acc += count
        if r < acc:
            return value
    return values[-1]

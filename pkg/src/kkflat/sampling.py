"""Deterministic sample points from a splitmix64 stream.

The generator is chosen so that point sets can be reproduced in any language:

    state += 0x9E3779B97F4A7C15            (mod 2^64)
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z = z ^ (z >> 31)
    u = (z >> 11) / 2^53                   (uniform in [0, 1))

Coordinates of one point consume consecutive draws in coordinate order,
``x_i = lo_i + (hi_i - lo_i) * u``.  Candidates rejected by an acceptance
predicate are skipped without resetting the stream.
"""

from __future__ import annotations

from typing import Callable, Iterator, Sequence

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


class SplitMix64:
    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * _M1) & _MASK
        z = ((z ^ (z >> 27)) * _M2) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def __iter__(self) -> Iterator[float]:
        while True:
            yield self.uniform()


class SamplingError(RuntimeError):
    pass


def sample_box(box: Sequence[tuple[float, float]], count: int, seed: int = 0,
               accept: Callable[[np.ndarray], bool] | None = None,
               max_tries: int = 10_000) -> np.ndarray:
    """``count`` points inside ``box`` (one ``(lo, hi)`` pair per coordinate)."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = SplitMix64(seed)
    out = []
    tries = 0
    while len(out) < count:
        tries += 1
        if tries > max_tries:
            raise SamplingError(f"only {len(out)} of {count} points accepted after {max_tries} candidates")
        p = np.array([lo + (hi - lo) * rng.uniform() for lo, hi in box])
        if accept is None or accept(p):
            out.append(p)
    return np.array(out)

"""Counter-based random streams.

A stream is identified by ``(seed, index)``. Both are folded into a 64-bit key
with the SplitMix64 finaliser, and draw ``c`` of the stream is
``mix64(key + (c + 1) * GAMMA)``. Any draw can therefore be computed without
touching the ones before it, which is what lets tour ``i`` of a parallel run
use ``derive_stream(seed, i)`` regardless of which worker simulates it.

For a fixed seed the map ``index -> key`` is a bijection (``GAMMA`` is odd and
``mix64`` is invertible), so distinct tours never share a key.

Three bit-identical implementations of the same primitives exist: Python ints
here (``RngStream``), numpy ``uint64`` arrays here (``uniform_array``), and
numba scalars in ``kernels._scalar``.
"""

from __future__ import annotations

import math

import numpy as np

MASK = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 1.0 / (1 << 53)
TWO_PI = 2.0 * math.pi


def mix64(z: int) -> int:
    """SplitMix64 finaliser (a 64-bit avalanche bijection)."""
    z &= MASK
    z = ((z ^ (z >> 30)) * _M1) & MASK
    z = ((z ^ (z >> 27)) * _M2) & MASK
    return z ^ (z >> 31)


def stream_key(seed: int, index: int) -> int:
    return mix64(mix64(seed & MASK) ^ ((index * GAMMA) & MASK))


def draw_bits(key: int, counter: int) -> int:
    return mix64((key + (counter + 1) * GAMMA) & MASK)


def bits_to_unit(bits: int) -> float:
    return (bits >> 11) * _INV53


# -- vectorised numpy versions ------------------------------------------------

_G = np.uint64(GAMMA)
_U1 = np.uint64(_M1)
_U2 = np.uint64(_M2)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))


_WRAP = {"over": "ignore"}  # uint64 arithmetic is meant to wrap


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(**_WRAP):
        z = (z ^ (z >> _S30)) * _U1
        z = (z ^ (z >> _S27)) * _U2
    return z ^ (z >> _S31)


def uniform_array(keys, counters) -> np.ndarray:
    """Uniform draws in [0, 1) at the given ``(key, counter)`` positions."""
    keys = np.asarray(keys, dtype=np.uint64)
    ctr = np.asarray(counters, dtype=np.uint64) + np.uint64(1)
    with np.errstate(**_WRAP):
        bits = mix64_array(keys + ctr * _G)
    return (bits >> _S11).astype(np.float64) * _INV53


def normal_array(keys, counters) -> np.ndarray:
    """Box-Muller normals; each consumes draws ``counter`` and ``counter + 1``."""
    counters = np.asarray(counters, dtype=np.uint64)
    u1 = uniform_array(keys, counters)
    u2 = uniform_array(keys, counters + np.uint64(1))
    return np.sqrt(-2.0 * np.log(1.0 - u1)) * np.cos(TWO_PI * u2)


def stream_keys(seed: int, indices) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.uint64)
    s = mix64_array(np.uint64(seed & MASK))
    with np.errstate(**_WRAP):
        return mix64_array(s ^ (idx * _G))


class RngStream:
    """Single-owner random stream; output is a pure function of (seed, index, draws)."""

    __slots__ = ("seed", "index", "key", "counter")

    def __init__(self, seed: int, index: int = 0, counter: int = 0):
        self.seed = int(seed) & MASK
        self.index = int(index) & MASK
        self.key = stream_key(self.seed, self.index)
        self.counter = int(counter)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, index={self.index}, counter={self.counter})"

    def uniform(self) -> float:
        u = bits_to_unit(draw_bits(self.key, self.counter))
        self.counter += 1
        return u

    def uniforms(self, n: int) -> np.ndarray:
        out = uniform_array(np.uint64(self.key), np.arange(self.counter, self.counter + n, dtype=np.uint64))
        self.counter += n
        return out

    def normal(self) -> float:
        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(TWO_PI * u2)

    def normals(self, n: int) -> np.ndarray:
        return np.array([self.normal() for _ in range(n)], dtype=np.float64)

    def exponential(self, rate: float = 1.0) -> float:
        """Exp(rate) by inversion; one draw is consumed even at rate 0 or inf."""
        u = self.uniform()
        if rate == math.inf:
            return 0.0
        if rate <= 0.0:
            return math.inf
        return -math.log(1.0 - u) / rate

    def spawn_state(self):
        """(key, counter) for handing the stream to a compiled kernel."""
        return np.uint64(self.key), self.counter


def derive_stream(seed: int, index: int) -> RngStream:
    return RngStream(seed, index)

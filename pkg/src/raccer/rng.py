"""Reproducible random streams.

A stream is identified by a 64-bit master seed plus any number of tags
(query ids, purpose strings, simulation counters). Tags are folded into the
seed with a splitmix64-style mixer, and the result is mapped onto the state
of the combined LCG that the kernels consume. Identical (seed, tags) always
reproduce identical draw sequences, in both the compiled and interpreted
kernel modes.
"""

from __future__ import annotations

import hashlib

import numpy as np

from . import kernels

_MASK = (1 << 64) - 1
_M1 = 2147483563
_M2 = 2147483399


def _tag_to_int(tag) -> int:
    if isinstance(tag, str):
        return int.from_bytes(hashlib.blake2b(tag.encode(), digest_size=8).digest(), "little")
    return int(tag) & _MASK


def _mix(a: int, b: int) -> int:
    """Fold b into a; splitmix64 finalizer keeps the result well spread."""
    a = (a ^ (b * 0x9E3779B97F4A7C15 + 0x2545F4914F6CDD1D)) & _MASK
    a = ((a ^ (a >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    a = ((a ^ (a >> 27)) * 0x94D049BB133111EB) & _MASK
    return a ^ (a >> 31)


def derive_seed(master: int, *tags) -> int:
    """Deterministic 64-bit seed for a sub-stream named by ``tags``."""
    h = _mix(int(master) & _MASK, 0x6A09E667F3BCC908)
    for tag in tags:
        h = _mix(h, _tag_to_int(tag))
    return h


def lcg_state(seed: int, stream: int = 0) -> np.ndarray:
    """Initial kernel RNG state for (seed, stream), as an int64 pair."""
    h1 = _mix(int(seed) & _MASK, (int(stream) & _MASK) * 2 + 1)
    h2 = _mix(h1, 0x9216D5D98979FB1B)
    return np.array([1 + h1 % (_M1 - 1), 1 + h2 % (_M2 - 1)], dtype=np.int64)


class RngStream:
    """Stateful draw source backed by the kernel LCG.

    The underlying int64 state pair (``.state``) can be handed directly to
    kernels, which advance it in place; draws made through this object and
    through kernels interleave consistently.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK
        self.stream = int(stream) & _MASK
        self.state = lcg_state(self.seed, self.stream)

    def uniform(self) -> float:
        return float(kernels.rng_uniform(self.state))

    def randint(self, n: int) -> int:
        return int(kernels.rng_randint(self.state, n))

    def spawn(self, *tags) -> "RngStream":
        """Independent child stream; does not consume draws from this one."""
        return RngStream(derive_seed(self.seed, self.stream, *tags))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream={self.stream})"

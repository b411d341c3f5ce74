"""Turning propensities into determined digits.

Randomness comes from a :class:`RandomnessSource`, a seeded stream of fair
bits.  :func:`sample_digit` compares a lazily drawn uniform number against
the binary expansion of an exact rational propensity, so a digit is 1 with
probability exactly ``q``.  Two engines drive actualization: a spontaneous
rate per time step and an on-demand measurement of the leading ``k`` digits.
"""

from __future__ import annotations

import math
import secrets
from dataclasses import dataclass
from fractions import Fraction
from typing import Protocol

import numpy as np

from .fiq import HALF, Fiq

__all__ = [
    "BitSource",
    "RandomnessSource",
    "SystemRandomnessSource",
    "SpontaneousEngine",
    "MeasurementEngine",
    "sample_digit",
    "actualize_next",
    "actualize_to",
    "step_spontaneous",
    "measure",
]

_BLOCK = 64


class BitSource(Protocol):
    counter: int

    def bit(self) -> int: ...

    def bits(self, m: int) -> list: ...


class RandomnessSource:
    """Reproducible stream of fair bits addressed by ``(seed, stream_id)``.

    Each stream is a PCG64 generator seeded from
    ``SeedSequence(seed, spawn_key=(stream_id,))``, so distinct stream ids are
    independent.  Bits are read least-significant first from successive
    64-bit outputs; ``counter`` is the number of bits consumed, and a source
    built with ``counter=c`` resumes exactly at bit ``c``.
    """

    def __init__(self, seed: int, stream_id: int = 0, counter: int = 0):
        if not 0 <= seed < 1 << 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if stream_id < 0 or counter < 0:
            raise ValueError("stream_id and counter must be nonnegative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._bitgen = np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,)))
        self._block: list = []
        self._pos = 0
        self._word = 0
        self._left = 0
        self.counter = 0
        if counter:
            words, rest = divmod(counter, 64)
            self._bitgen.advance(words)
            self.counter = words * 64
            for _ in range(rest):
                self.bit()

    def _next_word(self) -> int:
        if self._pos == len(self._block):
            self._block = self._bitgen.random_raw(_BLOCK).tolist()
            self._pos = 0
        word = self._block[self._pos]
        self._pos += 1
        return word

    def bit(self) -> int:
        if not self._left:
            self._word = self._next_word()
            self._left = 64
        self._left -= 1
        self.counter += 1
        b = self._word & 1
        self._word >>= 1
        return b

    def bits(self, m: int) -> list:
        """The next ``m`` bits, identical to ``m`` calls of :meth:`bit`."""
        out = []
        while m > 0:
            if not self._left:
                self._word = self._next_word()
                self._left = 64
            take = min(m, self._left)
            word = self._word
            out.extend([(word >> i) & 1 for i in range(take)])
            self._word = word >> take
            self._left -= take
            self.counter += take
            m -= take
        return out

    def lineage(self) -> dict:
        return {"seed": self.seed, "stream_id": self.stream_id, "counter": self.counter}

    def __repr__(self) -> str:
        return f"RandomnessSource(seed={self.seed}, stream_id={self.stream_id}, counter={self.counter})"


class SystemRandomnessSource:
    """Fair bits from the operating system; not reproducible."""

    seed = None
    stream_id = None

    def __init__(self):
        self.counter = 0

    def bit(self) -> int:
        self.counter += 1
        return secrets.randbits(1)

    def bits(self, m: int) -> list:
        return [self.bit() for _ in range(m)]

    def lineage(self) -> dict:
        return {"seed": None, "stream_id": None, "counter": self.counter, "source": "os-entropy"}


def sample_digit(q: Fraction, rng: BitSource) -> int:
    """Return 1 with probability exactly ``q``.

    Draws uniform bits ``u1 u2 ...`` and compares ``0.u1u2...`` with the
    binary expansion of ``q``, stopping at the first differing position.
    Certain propensities consume no randomness.
    """
    if q <= 0:
        return 0
    if q >= 1:
        return 1
    p, d = q.numerator, q.denominator
    while True:
        p <<= 1
        if p >= d:
            p -= d
            if not rng.bit():
                return 1
        elif rng.bit():
            return 0
        if not p:
            return 0


def _draw(q: Fraction, rng: BitSource) -> int:
    # a fair digit is decided by exactly one uniform bit: 1 iff that bit is 0
    if q is HALF or q == HALF:
        return 1 - rng.bit()
    return sample_digit(q, rng)


def actualize_next(f: Fiq, rng: BitSource) -> Fiq:
    """Determine digit ``N + 1`` from its propensity and append it to the prefix."""
    if f.window:
        bit = _draw(f.window[0], rng)
        return Fiq(f.prefix + (bit,), f.window[1:], f.clock)
    return Fiq(f.prefix + (_draw(HALF, rng),), (), f.clock)


def actualize_to(f: Fiq, depth: int, rng: BitSource) -> Fiq:
    """Actualize front to back until at least ``depth`` digits are determined.

    Equivalent to calling :func:`actualize_next` repeatedly, without building
    the intermediate snapshots.
    """
    need = depth - len(f.prefix)
    if need <= 0:
        return f
    window = f.window
    fresh = [_draw(q, rng) for q in window[:need]]
    if need > len(window):
        fresh.extend([1 - b for b in rng.bits(need - len(window))])
    return Fiq(f.prefix + tuple(fresh), window[need:], f.clock)


@dataclass
class SpontaneousEngine:
    """Actualizes ``rate`` digits per time step on average.

    The integer part of ``rate + carry`` is applied each step and the
    fractional remainder carried forward, so over ``T`` steps exactly
    ``floor(rate * T)`` digits are actualized (starting from zero carry).
    With ``stochastic=True`` the fractional part is instead resolved by an
    exact Bernoulli draw each step and no carry is kept.
    """

    rate: Fraction
    carry: Fraction = Fraction(0)
    stochastic: bool = False

    def __post_init__(self):
        if isinstance(self.rate, float):
            raise TypeError("rate must be an exact rational")
        self.rate = Fraction(self.rate)
        self.carry = Fraction(self.carry)
        if self.rate < 0:
            raise ValueError("rate must be nonnegative")
        if not 0 <= self.carry < 1:
            raise ValueError("carry must lie in [0, 1)")

    def digits_this_step(self, rng: BitSource) -> int:
        if self.stochastic:
            whole = math.floor(self.rate)
            return whole + sample_digit(self.rate - whole, rng)
        total = self.rate + self.carry
        whole = math.floor(total)
        self.carry = total - whole
        return whole


@dataclass(frozen=True)
class MeasurementEngine:
    resolution: int

    def __post_init__(self):
        if self.resolution < 1:
            raise ValueError("measurement resolution must be at least 1")


def step_spontaneous(f: Fiq, eng: SpontaneousEngine, rng: BitSource) -> Fiq:
    """Advance one time step, actualizing digits at the engine's rate."""
    count = eng.digits_this_step(rng)
    out = actualize_to(f, len(f.prefix) + count, rng) if count else f
    return Fiq(out.prefix, out.window, f.clock + 1)


def measure(f: Fiq, eng: MeasurementEngine | int, rng: BitSource) -> tuple[str, Fiq]:
    """Read the leading ``k`` digits, actualizing any that are still open.

    Repeating a measurement at the same or a coarser resolution returns the
    same digits and leaves the quantity untouched.
    """
    k = eng.resolution if isinstance(eng, MeasurementEngine) else int(eng)
    if k < 1:
        raise ValueError("measurement resolution must be at least 1")
    out = actualize_to(f, k, rng)
    return "".join(map(str, out.prefix[:k])), out

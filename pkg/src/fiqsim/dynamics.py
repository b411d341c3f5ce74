"""Shift and rotation dynamics on exact values and on finite-information quantities.

The shift map ``x -> 2**s * x mod 1`` moves every binary digit ``s`` places
toward the most significant position and emits the ``s`` digits that fall
off the front as the observable output of the step.  The rotation map
``x -> x + alpha mod 1`` is the non-chaotic comparison.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Union

from .actualization import BitSource, actualize_to
from .domains import PrecisionExceededError, RationalQuantity, TruncatedReal
from .fiq import Fiq, Propensity, information_content

__all__ = [
    "ShiftMap",
    "RotationMap",
    "ExactEvolution",
    "TrajectoryStep",
    "evolve_exact",
    "evolve_fiq",
    "iter_evolve_fiq",
    "evolve_fiq_rotation",
    "rotate_fiq",
    "parse_map",
    "trajectory_csv",
    "dyadic_bits",
]


@dataclass(frozen=True)
class ShiftMap:
    s: int = 1

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("shift must be a positive number of digits")

    def __str__(self) -> str:
        return f"shift:{self.s}"


@dataclass(frozen=True)
class RotationMap:
    alpha: Fraction

    def __post_init__(self):
        if isinstance(self.alpha, float):
            raise TypeError("rotation increment must be an exact rational")
        alpha = Fraction(self.alpha)
        if not 0 <= alpha < 1:
            raise ValueError("rotation increment must lie in [0, 1)")
        object.__setattr__(self, "alpha", alpha)

    def __str__(self) -> str:
        return f"rotation:{self.alpha.numerator}/{self.alpha.denominator}"


Map = Union[ShiftMap, RotationMap]


def parse_map(spec: str) -> Map:
    kind, _, arg = spec.partition(":")
    if kind == "shift":
        return ShiftMap(int(arg) if arg else 1)
    if kind == "rotation":
        return RotationMap(Fraction(arg))
    raise ValueError(f"unknown map {spec!r}; expected shift:s or rotation:p/q")


def dyadic_bits(alpha: Fraction) -> int | None:
    """Number of binary digits of a dyadic rational, ``None`` if not dyadic."""
    d = alpha.denominator
    if d & (d - 1):
        return None
    return d.bit_length() - 1


@dataclass
class ExactEvolution:
    value: Union[RationalQuantity, TruncatedReal]
    emitted: str = ""
    values: list = field(default_factory=list)


def _bits_of(value: int, width: int) -> str:
    return format(value, f"0{width}b") if width else ""


def _str_bits(bits) -> list[str]:
    return [str(b) for b in bits]


def evolve_exact(x, map: Map, steps: int) -> ExactEvolution:
    """Deterministic reference trajectory of an exact value.

    For the shift map the emitted log is the binary expansion of ``x`` read
    ``s`` digits at a time.  Rotation emits nothing.  ``values`` holds the
    state after every step.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if isinstance(x, TruncatedReal):
        return _evolve_truncated(x, map, steps)
    if not isinstance(x, RationalQuantity):
        x = RationalQuantity(Fraction(x))
    value = x.value
    out = []
    values = []
    for _ in range(steps):
        if isinstance(map, ShiftMap):
            scaled = value * (1 << map.s)
            lead = scaled.numerator // scaled.denominator
            out.append(_bits_of(lead, map.s))
            value = scaled - lead
        else:
            value = (value + map.alpha) % 1
        values.append(RationalQuantity(value))
    return ExactEvolution(RationalQuantity(value), "".join(out), values)


def _evolve_truncated(x: TruncatedReal, map: Map, steps: int) -> ExactEvolution:
    bits = list(x.bits) + [0] * (x.n - len(x.bits))
    n = x.n
    out = []
    values = []
    if isinstance(map, ShiftMap):
        if map.s * steps > n:
            raise PrecisionExceededError(
                f"{steps} shifts of {map.s} digits need {map.s * steps} digits; cutoff is {n}"
            )
        for _ in range(steps):
            out.append("".join(_str_bits(bits[: map.s])))
            bits = bits[map.s:]
            n -= map.s
            values.append(TruncatedReal(tuple(bits), n))
    else:
        width = dyadic_bits(map.alpha)
        if width is None or width > n:
            raise PrecisionExceededError(
                f"rotation by {map.alpha} is not representable within cutoff {n}"
            )
        modulus = 1 << n
        inc = map.alpha.numerator << (n - width)
        word = int("".join(_str_bits(bits)), 2) if n else 0
        for _ in range(steps):
            word = (word + inc) % modulus
            bits = [int(c) for c in _bits_of(word, n)]
            values.append(TruncatedReal(tuple(bits), n))
    final = values[-1] if values else TruncatedReal(tuple(bits), n)
    return ExactEvolution(final, "".join(out), values)


@dataclass(frozen=True)
class TrajectoryStep:
    step: int
    emitted: str
    fiq: Fiq

    def row(self) -> dict:
        return {
            "step": self.step,
            "emitted_bits": self.emitted,
            "N": self.fiq.n_determined,
            "M": self.fiq.m_threshold,
            "information_content": information_content(self.fiq),
        }


def iter_evolve_fiq(f: Fiq, map: ShiftMap, steps: int, rng: BitSource) -> Iterator[TrajectoryStep]:
    """Yield the state after each shift step.

    Digits reaching the most significant positions are actualized first, then
    emitted; the window slides down with the prefix, propensities unchanged.
    """
    s = map.s
    for t in range(1, steps + 1):
        if len(f.prefix) < s:
            f = actualize_to(f, s, rng)
        emitted = "".join(_str_bits(f.prefix[:s]))
        f = Fiq(f.prefix[s:], f.window, f.clock + 1)
        yield TrajectoryStep(t, emitted, f)


def evolve_fiq(f: Fiq, map: ShiftMap, steps: int, rng: BitSource) -> tuple[Fiq, str]:
    """Apply ``steps`` shift steps; return the final quantity and all emitted digits."""
    if not isinstance(map, ShiftMap):
        raise TypeError("evolve_fiq takes a ShiftMap; use evolve_fiq_rotation for rotations")
    emitted = []
    for record in iter_evolve_fiq(f, map, steps, rng):
        emitted.append(record.emitted)
        f = record.fiq
    return f, "".join(emitted)


def _carry_propagation(f: Fiq, inc_bits: list[int], start: int) -> tuple[list[Propensity], Fraction]:
    """Marginal propensities after adding ``inc_bits`` to undetermined digits.

    ``inc_bits[i]`` is added at digit ``start + i``.  Digits are independent,
    no carry enters from below the increment, and the returned fraction is the
    probability that a carry leaves the top of the block.
    """
    carry = Fraction(0)
    marginals = []
    for i in range(len(inc_bits) - 1, -1, -1):
        q = f.propensity(start + i)
        a = inc_bits[i]
        if a:
            # x + 1 + c: output x xor 1 xor c, carry when x or c
            out = q * carry + (1 - q) * (1 - carry)
            carry = q + carry - q * carry
        else:
            out = q * (1 - carry) + (1 - q) * carry
            carry = q * carry
        marginals.append(Propensity(out))
    marginals.reverse()
    return marginals, carry


def rotate_fiq(f: Fiq, map: RotationMap) -> Fiq:
    """One rotation step with carry-uncertainty tracking.

    With ``N >= bits(alpha)`` the addition touches only determined digits and
    is exact.  Otherwise the low part of ``alpha`` lands on undetermined
    digits: those digits get the exact marginal propensity of the sum, and
    determined digits whose value now depends on an uncertain carry are
    moved back into the window.  Correlations between digits introduced by
    the carry are not represented.
    """
    width = dyadic_bits(map.alpha)
    if width is None:
        raise ValueError(f"rotation by non-dyadic {map.alpha} is not supported on Fiqs")
    n = len(f.prefix)
    inc = map.alpha.numerator
    if width <= n:
        if not n:
            return Fiq(f.prefix, f.window, f.clock + 1)
        word = (int(f.prefix_bits(), 2) + (inc << (n - width))) % (1 << n)
        return Fiq(tuple(int(c) for c in _bits_of(word, n)), f.window, f.clock + 1)

    inc_all = [int(c) for c in _bits_of(inc, width)]
    high, low = inc_all[:n], inc_all[n:]
    marginals, carry = _carry_propagation(f, low, n + 1)
    tail = list(f.window[width - n:])

    word = int(f.prefix_bits(), 2) + int("".join(_str_bits(high)), 2) if n else 0
    if carry == 1:
        word += 1
    head = [int(c) for c in _bits_of(word % (1 << n), n)]

    if 0 < carry < 1 and n:
        # a carry flips the trailing run of ones and the first zero above it
        split = n - 1
        while split >= 0 and head[split] == 1:
            split -= 1
        split = max(split, 0)
        ambiguous = [Propensity(carry) if b == 0 else Propensity(1 - carry) for b in head[split:]]
        head = head[:split]
        window = ambiguous + marginals + tail
    else:
        window = marginals + tail
    return Fiq.normalized(head, window, f.clock + 1)


def evolve_fiq_rotation(f: Fiq, map: RotationMap, steps: int, rng: BitSource | None = None) -> Fiq:
    """Apply ``steps`` rotation steps.  Rotation never actualizes, so ``rng`` is unused."""
    for _ in range(steps):
        f = rotate_fiq(f, map)
    return f


def trajectory_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(
        buf, fieldnames=["step", "emitted_bits", "N", "M", "information_content"], lineterminator="\n"
    )
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()

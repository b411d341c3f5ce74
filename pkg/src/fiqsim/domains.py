"""Rival number domains behind a common digit-source interface.

Three exact representations of a quantity in [0, 1):

* :class:`TruncatedReal` - a finite bit string with a hard cutoff ``n``;
* :class:`RationalQuantity` - an exact fraction, eventually periodic in binary;
* :class:`ComputableReal` - a vetted digit-generating program with a memo.

All of them expose ``digit_at(j)`` for 1-based binary digits after the
radix point, and ``known_precision()`` (``None`` when unbounded).
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Protocol, runtime_checkable

from .fiq import Fiq

__all__ = [
    "DigitSource",
    "PrecisionExceededError",
    "TruncatedReal",
    "RationalQuantity",
    "ComputableReal",
    "GENERATORS",
    "digit_at",
    "digits",
    "to_fiq",
    "non_closure_demo",
    "parse_source",
    "multiplicative_order",
]


class PrecisionExceededError(IndexError):
    """A digit beyond the representation's cutoff was requested."""


@runtime_checkable
class DigitSource(Protocol):
    def digit_at(self, j: int) -> int: ...

    def known_precision(self) -> int | None: ...


def _check_position(j: int) -> None:
    if j < 1:
        raise IndexError(f"digit positions start at 1, got {j}")


@dataclass(frozen=True)
class TruncatedReal:
    """Binary expansion cut off after ``n`` digits.

    ``bits`` may be shorter than ``n``; missing digits up to the cutoff are
    zeros.  Digits beyond ``n`` do not exist.  A cutoff of zero only arises
    as the remainder of a shift that consumed every digit.
    """

    bits: tuple
    n: int

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError("bits must be 0 or 1")
        if self.n < 0:
            raise ValueError("cutoff must be nonnegative")
        if len(bits) > self.n:
            raise ValueError(f"{len(bits)} bits exceed the cutoff n={self.n}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_string(cls, bits: str, n: int | None = None) -> "TruncatedReal":
        return cls(tuple(int(b) for b in bits), len(bits) if n is None else n)

    def digit_at(self, j: int) -> int:
        _check_position(j)
        if j > self.n:
            raise PrecisionExceededError(f"digit {j} is beyond the cutoff n={self.n}")
        return self.bits[j - 1] if j <= len(self.bits) else 0

    def known_precision(self) -> int:
        return self.n

    @property
    def value(self) -> Fraction:
        if not self.bits:
            return Fraction(0)
        return Fraction(int("".join(map(str, self.bits)), 2), 1 << len(self.bits))

    def __str__(self) -> str:
        return f"truncated:{''.join(map(str, self.bits))}:{self.n}"


def multiplicative_order(base: int, modulus: int) -> int:
    """Smallest ``k >= 1`` with ``base**k == 1 (mod modulus)``; 1 for modulus 1."""
    if modulus == 1:
        return 1
    if math.gcd(base, modulus) != 1:
        raise ValueError(f"{base} is not invertible modulo {modulus}")
    k, acc = 1, base % modulus
    while acc != 1:
        acc = acc * base % modulus
        k += 1
    return k


@dataclass(frozen=True)
class RationalQuantity:
    value: Fraction

    def __post_init__(self):
        if isinstance(self.value, float):
            raise TypeError("rational quantities must be exact")
        value = Fraction(self.value)
        if not 0 <= value < 1:
            raise ValueError(f"{value} is outside [0, 1)")
        object.__setattr__(self, "value", value)

    def digit_at(self, j: int) -> int:
        _check_position(j)
        return (self.value.numerator << j) // self.value.denominator & 1

    def known_precision(self) -> None:
        return None

    def expansion_period(self) -> tuple[int, int]:
        """``(preperiod, period)`` of the binary expansion.

        The preperiod is the power of two in the denominator; the period is the
        multiplicative order of 2 modulo the odd part.  Terminating expansions
        report period 1 (the repeating zero).
        """
        d = self.value.denominator
        pre = (d & -d).bit_length() - 1
        return pre, multiplicative_order(2, d >> pre)

    def __str__(self) -> str:
        return f"rational:{self.value.numerator}/{self.value.denominator}"


def _sqrt2_minus_1(n: int) -> int:
    # floor(sqrt(2) * 2**n); the leading 1 sits above the fractional bits
    return math.isqrt(2 << (2 * n)) - (1 << n)


def _atan_inv(x: int, one: int) -> tuple[int, int]:
    """Fixed-point ``atan(1/x) * one`` and a bound on its absolute error in ulps."""
    total = term = one // x
    x2 = x * x
    k, sign, steps = 3, -1, 1
    while term:
        term //= x2
        total += sign * (term // k)
        sign = -sign
        k += 2
        steps += 1
    return total, 2 * steps


def _pi_minus_3(n: int) -> int:
    # Machin: pi = 16 atan(1/5) - 4 atan(1/239), evaluated with guard bits
    guard = 32
    while True:
        one = 1 << (n + guard)
        a, ea = _atan_inv(5, one)
        b, eb = _atan_inv(239, one)
        approx = 16 * a - 4 * b
        err = 16 * ea + 4 * eb
        lo = (approx - err) >> guard
        hi = (approx + err) >> guard
        if lo == hi:
            return lo - (3 << n)
        guard += 32


def _e_minus_2(n: int) -> int:
    guard = 32
    while True:
        one = 1 << (n + guard)
        total, term, k = 0, one, 1
        while term:
            total += term
            term //= k
            k += 1
        err = 2 * k
        lo = (total - err) >> guard
        hi = (total + err) >> guard
        if lo == hi:
            return lo - (2 << n)
        guard += 32


# name -> function returning floor(x * 2**n) for the quantity x in [0, 1)
GENERATORS: dict[str, Callable[[int], int]] = {
    "sqrt2_minus_1": _sqrt2_minus_1,
    "pi_minus_3": _pi_minus_3,
    "e_minus_2": _e_minus_2,
}


@dataclass(eq=False)
class ComputableReal:
    """A computable quantity in [0, 1) produced by a registered generator.

    Digits are computed in doubling chunks and memoized.  The memo is
    write-once per index: a digit, once returned, is never recomputed.
    """

    name: str
    _program: Callable[[int], int] = field(init=False, repr=False)
    _memo: list = field(init=False, repr=False, default_factory=list)
    _lock: threading.Lock = field(init=False, repr=False, default_factory=threading.Lock)

    def __post_init__(self):
        if self.name.startswith("rational:"):
            q = RationalQuantity(Fraction(self.name.split(":", 1)[1]))
            self._program = lambda n, v=q.value: (v.numerator << n) // v.denominator
        else:
            try:
                self._program = GENERATORS[self.name]
            except KeyError:
                known = ", ".join(sorted(GENERATORS))
                raise KeyError(f"unknown generator {self.name!r}; known: {known}") from None

    @classmethod
    def from_rational(cls, value: Fraction) -> "ComputableReal":
        value = Fraction(value)
        return cls(f"rational:{value.numerator}/{value.denominator}")

    def digit_at(self, j: int) -> int:
        _check_position(j)
        memo = self._memo
        if j > len(memo):
            with self._lock:
                if j > len(memo):
                    depth = max(j, 2 * len(memo), 64)
                    word = self._program(depth)
                    fresh = format(word, f"0{depth}b")
                    memo.extend(int(c) for c in fresh[len(memo):])
        return memo[j - 1]

    def known_precision(self) -> None:
        return None

    def __str__(self) -> str:
        if self.name.startswith("rational:"):
            return self.name
        return f"computable:{self.name}"


def digit_at(src: DigitSource, j: int) -> int:
    return src.digit_at(j)


def digits(src: DigitSource, count: int, start: int = 1) -> list[int]:
    return [src.digit_at(j) for j in range(start, start + count)]


def to_fiq(src: DigitSource, take: int) -> Fiq:
    """Determine the first ``take`` digits of ``src``; the rest is a random tail."""
    if take < 0:
        raise ValueError("take must be nonnegative")
    bound = src.known_precision()
    if bound is not None and take > bound:
        raise PrecisionExceededError(f"cannot take {take} digits from a source with cutoff {bound}")
    return Fiq(tuple(digits(src, take)))


# (operation, formula, rational-valued function or None when the result is
# irrational for every nonzero input)
_NON_CLOSURE_CATALOG = (
    ("square", "x^2", lambda x: x * x),
    ("square diagonal", "x*sqrt(2)", None),
    ("circle circumference", "x*pi", None),
    ("square root", "sqrt(x)", "sqrt"),
)


def _rational_sqrt(x: Fraction) -> Fraction | None:
    p, q = x.numerator, x.denominator
    rp, rq = math.isqrt(p), math.isqrt(q)
    if rp * rp == p and rq * rq == q:
        return Fraction(rp, rq)
    return None


def non_closure_demo(ic) -> list[dict]:
    """Apply simple geometric evolutions to a rational and flag rationality.

    ``ic`` may be a :class:`RationalQuantity` or anything ``Fraction`` accepts
    (the classic examples use the value 1).  Irrationality of ``sqrt(2)`` and
    ``pi`` is taken as known, not proven here.
    """
    x = ic.value if isinstance(ic, RationalQuantity) else Fraction(ic)
    rows = []
    for name, formula, fn in _NON_CLOSURE_CATALOG:
        if fn is None:
            constant = "sqrt(2)" if "sqrt(2)" in formula else "pi"
            if x == 0:
                result, rational = Fraction(0), True
                reason = "zero times anything is zero"
            else:
                result, rational = None, False
                reason = f"nonzero rational times {constant}, which is irrational"
            shown = str(result) if rational else (constant if x == 1 else f"{x}*{constant}")
        elif fn == "sqrt":
            result = _rational_sqrt(x)
            rational = result is not None
            reason = "numerator and denominator are perfect squares" if rational else (
                "reduced numerator or denominator is not a perfect square"
            )
            shown = str(result) if rational else f"sqrt({x})"
        else:
            result = fn(x)
            rational, reason = True, "rationals are closed under multiplication"
            shown = str(result)
        rows.append(
            {
                "operation": name,
                "formula": formula,
                "input": str(x),
                "result": shown,
                "rational": rational,
                "reason": reason,
            }
        )
    return rows


def parse_source(spec: str) -> DigitSource:
    """Build a digit source from ``rational:p/q``, ``truncated:bits:n`` or ``computable:name``."""
    kind, _, rest = spec.partition(":")
    if kind == "rational":
        return RationalQuantity(Fraction(rest))
    if kind == "truncated":
        bits, _, n = rest.partition(":")
        if set(bits) - {"0", "1"}:
            raise ValueError(f"bad bit string {bits!r}")
        return TruncatedReal.from_string(bits, int(n) if n else None)
    if kind == "computable":
        return ComputableReal(rest)
    raise ValueError(f"unknown domain {kind!r} in {spec!r}")

"""Finite-information quantities.

A quantity in [0, 1) is written in binary as ``0.g1 g2 g3 ...``.  The first
N digits are determined (the *prefix*), the next M - N digits carry a stored
propensity strictly between 0 and 1 (the *window*), and every digit beyond M
has propensity exactly 1/2.  The tail is never stored.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence, Union

__all__ = [
    "Propensity",
    "HALF",
    "Fiq",
    "FiqError",
    "Determined",
    "Windowed",
    "RandomTail",
    "Check",
    "ValidityReport",
    "binary_entropy",
    "information_content",
    "validate",
    "digit_status",
    "is_prefix_extension",
]


class FiqError(ValueError):
    """Raised when a quantity cannot be constructed from the given parts."""


RationalLike = Union[int, str, Fraction, "Propensity"]


class Propensity(Fraction):
    """Exact rational tendency of a binary digit to take the value 1.

    Accepts anything :class:`fractions.Fraction` accepts except floats,
    which are rejected so that no binary rounding sneaks in.  ``"3/10"``,
    ``Fraction(3, 10)`` and ``(3, 10)`` as two arguments are all fine.
    """

    __slots__ = ()

    def __new__(cls, numerator: Any = 0, denominator: Any = None):
        if isinstance(numerator, float) or isinstance(denominator, float):
            raise TypeError("propensities must be exact rationals, not floats")
        if isinstance(numerator, str):
            numerator = numerator.strip()
        self = super().__new__(cls, numerator, denominator)
        if not 0 <= self <= 1:
            raise FiqError(f"propensity {self} outside [0, 1]")
        return self

    def __repr__(self) -> str:
        return f"Propensity({self.numerator}, {self.denominator})"

    def __str__(self) -> str:
        return f"{self.numerator}/{self.denominator}"


HALF = Propensity(1, 2)
_BITS = frozenset((0, 1))


def _as_propensity(value: Any) -> Propensity:
    if isinstance(value, Propensity):
        return value
    if isinstance(value, (tuple, list)) and len(value) == 2:
        return Propensity(int(value[0]), int(value[1]))
    return Propensity(value)


def binary_entropy(q: RationalLike) -> float:
    """Shannon entropy in bits of a digit with propensity ``q``.

    Evaluated in double precision with the convention ``0 * log2(0) = 0``.
    """
    q = _as_propensity(q)
    a = float(q)
    b = float(1 - q)
    h = 0.0
    if a > 0.0:
        h -= a * math.log2(a)
    if b > 0.0:
        h -= b * math.log2(b)
    return h


@dataclass(frozen=True)
class Fiq:
    """Immutable snapshot of a finite-information quantity.

    ``prefix`` holds the determined bits, ``window`` the propensities of the
    digits right after the prefix.  Operations that actualize or evolve a
    quantity return a new ``Fiq``; share snapshots freely.
    """

    prefix: tuple = ()
    window: tuple = ()
    clock: int = 0

    def __post_init__(self):
        prefix = tuple(self.prefix)
        if not _BITS.issuperset(prefix):
            bad = next(b for b in prefix if b not in _BITS)
            raise FiqError(f"prefix digits must be 0 or 1, got {bad!r}")
        window = self.window
        if not hasattr(window, "__len__"):
            raise FiqError("window must be a finite sequence; digits past it are fair by construction")
        if not (type(window) is tuple and all(type(q) is Propensity for q in window)):
            window = tuple(_as_propensity(q) for q in window)
        for q in window:
            if q == 0 or q == 1:
                raise FiqError(
                    "window must exclude certain propensities; "
                    "a certain digit belongs in the prefix"
                )
        if not isinstance(self.clock, numbers.Integral) or self.clock < 0:
            raise FiqError(f"clock must be a nonnegative integer, got {self.clock!r}")
        object.__setattr__(self, "prefix", tuple(map(int, prefix)))
        object.__setattr__(self, "window", window)
        object.__setattr__(self, "clock", int(self.clock))

    @classmethod
    def normalized(cls, prefix: Iterable[int], propensities: Iterable[Any], clock: int = 0) -> "Fiq":
        """Build a Fiq, promoting leading certain propensities into the prefix.

        Certain propensities that are not contiguous with the prefix cannot be
        represented and raise :class:`FiqError`.
        """
        prefix = list(prefix)
        window = [_as_propensity(q) for q in propensities]
        while window and window[0] in (0, 1):
            prefix.append(int(window.pop(0)))
        return cls(tuple(prefix), tuple(window), clock)

    @property
    def n_determined(self) -> int:
        return len(self.prefix)

    @property
    def m_threshold(self) -> int:
        return len(self.prefix) + len(self.window)

    def propensity(self, j: int) -> Propensity:
        """Propensity of digit ``j`` (1-based); determined digits give 0 or 1."""
        if j < 1:
            raise IndexError("digit positions start at 1")
        n = len(self.prefix)
        if j <= n:
            return Propensity(self.prefix[j - 1])
        if j <= n + len(self.window):
            return self.window[j - n - 1]
        return HALF

    def prefix_bits(self) -> str:
        return "".join(map(str, self.prefix))

    def prefix_value(self) -> Fraction:
        """Exact value of the determined digits, ``0.g1..gN`` in binary."""
        if not self.prefix:
            return Fraction(0)
        return Fraction(int(self.prefix_bits(), 2), 1 << len(self.prefix))

    def to_dict(self) -> dict:
        return {
            "prefix": self.prefix_bits(),
            "window": [[str(q.numerator), str(q.denominator)] for q in self.window],
            "clock": self.clock,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Fiq":
        try:
            bits = data["prefix"]
            window = data["window"]
            clock = data["clock"]
        except KeyError as exc:
            raise FiqError(f"missing field {exc.args[0]!r}") from None
        if not isinstance(bits, str) or set(bits) - {"0", "1"}:
            raise FiqError(f"prefix must be a bit string, got {bits!r}")
        return cls(tuple(int(b) for b in bits), tuple(_as_propensity(w) for w in window), clock)


def information_content(f: Fiq) -> float:
    """Total information in bits: one per determined digit plus ``1 - H(q)`` per window digit."""
    return len(f.prefix) + math.fsum(1.0 - binary_entropy(q) for q in f.window)


@dataclass(frozen=True)
class Determined:
    bit: int

    @property
    def propensity(self) -> Propensity:
        return Propensity(self.bit)


@dataclass(frozen=True)
class Windowed:
    propensity: Propensity


@dataclass(frozen=True)
class RandomTail:
    @property
    def propensity(self) -> Propensity:
        return HALF


def digit_status(f: Fiq, j: int):
    """Classify digit ``j`` (1-based) as Determined, Windowed or RandomTail."""
    if j < 1:
        raise IndexError("digit positions start at 1")
    n = len(f.prefix)
    if j <= n:
        return Determined(f.prefix[j - 1])
    if j <= n + len(f.window):
        return Windowed(f.window[j - n - 1])
    return RandomTail()


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ValidityReport:
    checks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def violations(self) -> list:
        return [c for c in self.checks if not c.passed]

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(Check(name, bool(passed), detail))

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
            "violations": [{"name": c.name, "detail": c.detail} for c in self.violations],
        }


def _raw_parts(candidate: Any):
    if isinstance(candidate, Fiq):
        return list(candidate.prefix), list(candidate.window), candidate.clock
    if isinstance(candidate, Mapping):
        bits = candidate.get("prefix", "")
        if isinstance(bits, str):
            prefix = [int(b) if b in ("0", "1") else b for b in bits]
        elif isinstance(bits, (list, tuple)):
            prefix = list(bits)
        else:
            prefix = [bits]
        return prefix, list(candidate.get("window", [])), candidate.get("clock", 0)
    raise TypeError(f"cannot validate object of type {type(candidate).__name__}")


def validate(candidate: Any, history: Sequence[Any] | None = None) -> ValidityReport:
    """Check every Fiq invariant on a Fiq or a raw JSON-like mapping.

    Never raises on malformed content; each violated invariant is listed in the
    returned report.  When ``history`` (earlier snapshots, oldest first) is
    given, clocks must be nondecreasing and snapshots sharing a clock value
    must have prefix-ordered determined digits.
    """
    report = ValidityReport()
    prefix, window, clock = _raw_parts(candidate)

    bad_bits = [b for b in prefix if b not in (0, 1) or isinstance(b, bool)]
    report.add("prefix digits are bits", not bad_bits, f"offending: {bad_bits!r}" if bad_bits else "")

    parsed = []
    in_range = True
    for raw in window:
        try:
            q = _as_propensity(raw)
        except (TypeError, ValueError, ZeroDivisionError):
            in_range = False
            continue
        parsed.append(q)
    report.add("propensities are exact rationals in [0, 1]", in_range)

    certain = [str(q) for q in parsed if q in (0, 1)]
    report.add(
        "window must exclude certain propensities",
        not certain,
        f"found {', '.join(certain)}" if certain else "",
    )

    finite = in_range and not certain
    info = None
    if finite:
        info = len(prefix) + math.fsum(1.0 - binary_entropy(q) for q in parsed)
        finite = math.isfinite(info)
    report.add("information content is finite", finite, f"{info!r}" if info is not None else "")

    clock_ok = isinstance(clock, numbers.Integral) and not isinstance(clock, bool) and clock >= 0
    report.add("clock is a nonnegative integer", clock_ok, "" if clock_ok else f"{clock!r}")

    if history is not None:
        snapshots = [_raw_parts(h) for h in history] + [(prefix, window, clock)]
        monotone = True
        detail = ""
        for i, ((p0, _, c0), (p1, _, c1)) in enumerate(zip(snapshots, snapshots[1:])):
            if c1 < c0:
                monotone, detail = False, f"clock decreased at snapshot {i + 1}"
                break
            if c1 == c0 and not is_prefix_extension(p0, p1):
                monotone, detail = False, f"determined digits changed at snapshot {i + 1}"
                break
        report.add("history is monotone", monotone, detail)

    return report


def is_prefix_extension(earlier: Sequence[int], later: Sequence[int]) -> bool:
    """True when ``later`` starts with every digit of ``earlier``."""
    return len(later) >= len(earlier) and tuple(later[: len(earlier)]) == tuple(earlier)

"""Mini-grammar for quantities and engines, and their JSON documents.

::

    quantity   := rational | truncated | computable | fiq
    rational   := "rational:" INT "/" INT
    truncated  := "truncated:" BITS [ ":" INT ]
    computable := "computable:" NAME
    fiq        := "fiq:" [ field ( "," field )* ]
    field      := "prefix=" BITS | "window=" RAT ( ";" RAT )* | "clock=" INT
    engine     := "none" | "spontaneous:" RAT | "spontaneous-stochastic:" RAT
                | "measurement:" INT
    map        := "shift:" INT | "rotation:" RAT
    RAT        := INT [ "/" INT ]
    BITS       := ( "0" | "1" )*
    NAME       := "sqrt2_minus_1" | "pi_minus_3" | "e_minus_2"
"""

from __future__ import annotations

from fractions import Fraction
from typing import Any, Union

from .actualization import MeasurementEngine, SpontaneousEngine
from .domains import ComputableReal, RationalQuantity, TruncatedReal, digits, parse_source
from .fiq import Fiq, FiqError, Propensity

__all__ = [
    "SpecError",
    "parse_quantity",
    "parse_fiq",
    "parse_engine",
    "quantity_to_doc",
    "quantity_from_doc",
    "Quantity",
]

Quantity = Union[Fiq, RationalQuantity, TruncatedReal, ComputableReal]

PREVIEW_DIGITS = 32


class SpecError(ValueError):
    """A spec string or document does not follow the grammar."""


def _bits(text: str) -> tuple:
    if set(text) - {"0", "1"}:
        raise SpecError(f"not a bit string: {text!r}")
    return tuple(int(b) for b in text)


def parse_fiq(body: str) -> Fiq:
    prefix: tuple = ()
    window: list = []
    clock = 0
    for part in filter(None, body.split(",")):
        key, eq, value = part.partition("=")
        if not eq:
            raise SpecError(f"expected key=value in {part!r}")
        if key == "prefix":
            prefix = _bits(value)
        elif key == "window":
            try:
                window = [Propensity(v) for v in filter(None, value.split(";"))]
            except FiqError:
                raise
            except (ValueError, ZeroDivisionError) as exc:
                raise SpecError(f"bad propensity list {value!r}: {exc}") from None
        elif key == "clock":
            clock = int(value)
        else:
            raise SpecError(f"unknown fiq field {key!r}")
    return Fiq(prefix, tuple(window), clock)


def parse_quantity(spec: str) -> Quantity:
    kind, _, body = spec.partition(":")
    try:
        if kind == "fiq":
            return parse_fiq(body)
        return parse_source(spec)
    except (SpecError, FiqError):
        raise
    except (ValueError, KeyError, ZeroDivisionError) as exc:
        raise SpecError(f"cannot parse quantity {spec!r}: {exc}") from None


def parse_engine(spec: str):
    """``None`` for ``none``, else a SpontaneousEngine or MeasurementEngine."""
    kind, _, arg = spec.partition(":")
    try:
        if kind == "none":
            return None
        if kind == "spontaneous":
            return SpontaneousEngine(Fraction(arg))
        if kind == "spontaneous-stochastic":
            return SpontaneousEngine(Fraction(arg), stochastic=True)
        if kind == "measurement":
            return MeasurementEngine(int(arg))
    except (ValueError, ZeroDivisionError) as exc:
        raise SpecError(f"bad engine {spec!r}: {exc}") from None
    raise SpecError(f"unknown engine {spec!r}")


def engine_spec(engine) -> str:
    if engine is None:
        return "none"
    if isinstance(engine, MeasurementEngine):
        return f"measurement:{engine.resolution}"
    kind = "spontaneous-stochastic" if engine.stochastic else "spontaneous"
    return f"{kind}:{engine.rate}"


def quantity_to_doc(q: Quantity) -> dict:
    if isinstance(q, Fiq):
        return {"kind": "fiq", **q.to_dict()}
    if isinstance(q, RationalQuantity):
        pre, period = q.expansion_period()
        return {
            "kind": "rational",
            "value": [str(q.value.numerator), str(q.value.denominator)],
            "preperiod": pre,
            "period": period,
            "digits": "".join(map(str, digits(q, PREVIEW_DIGITS))),
        }
    if isinstance(q, TruncatedReal):
        return {"kind": "truncated", "bits": "".join(map(str, q.bits)), "n": q.n}
    if isinstance(q, ComputableReal):
        return {"kind": "computable", "name": q.name, "digits": "".join(map(str, digits(q, PREVIEW_DIGITS)))}
    raise TypeError(f"not a quantity: {q!r}")


def quantity_from_doc(doc: dict[str, Any]) -> Quantity:
    kind = doc.get("kind", "fiq")
    try:
        if kind == "fiq":
            return Fiq.from_dict(doc)
        if kind == "rational":
            num, den = doc["value"]
            return RationalQuantity(Fraction(int(num), int(den)))
        if kind == "truncated":
            return TruncatedReal.from_string(doc["bits"], int(doc["n"]))
        if kind == "computable":
            return ComputableReal(doc["name"])
    except FiqError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"malformed {kind} document: {exc}") from None
    raise SpecError(f"unknown quantity kind {kind!r}")

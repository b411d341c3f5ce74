from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import mpmath
import pytest

from fiqsim.domains import (
    ComputableReal,
    DigitSource,
    PrecisionExceededError,
    RationalQuantity,
    TruncatedReal,
    digit_at,
    digits,
    non_closure_demo,
    parse_source,
    to_fiq,
)
from fiqsim.fiq import information_content


def mp_digits(expr, count):
    with mpmath.workdps(count // 3 + 30):
        x = expr()
        return [int(mpmath.floor(x * mpmath.mpf(2) ** j)) % 2 for j in range(1, count + 1)]


def expansion_by_long_division(p, q):
    """(preperiod, period) from the first repeated remainder of binary long division."""
    seen = {}
    r, j = p, 0
    while r not in seen:
        seen[r] = j
        r = (2 * r) % q
        j += 1
    return seen[r], j - seen[r]


def test_interface():
    for src in (RationalQuantity(Fraction(1, 3)), TruncatedReal.from_string("101"), ComputableReal("pi_minus_3")):
        assert isinstance(src, DigitSource)


def test_one_third():
    assert digits(RationalQuantity(Fraction(1, 3)), 4) == [0, 1, 0, 1]


def test_sqrt2_minus_1_first_digits():
    assert digits(ComputableReal("sqrt2_minus_1"), 4) == [0, 1, 1, 0]


@pytest.mark.parametrize(
    "name, expr",
    [
        ("sqrt2_minus_1", lambda: mpmath.sqrt(2) - 1),
        ("pi_minus_3", lambda: mpmath.pi - 3),
        ("e_minus_2", lambda: mpmath.e - 2),
    ],
)
def test_computable_against_mpmath(name, expr):
    assert digits(ComputableReal(name), 600) == mp_digits(expr, 600)


def test_truncated_cutoff_is_an_error():
    t = TruncatedReal.from_string("101", 3)
    assert digits(t, 3) == [1, 0, 1]
    with pytest.raises(PrecisionExceededError):
        digit_at(t, 4)


def test_truncated_pads_with_zeros_inside_cutoff():
    t = TruncatedReal.from_string("1", 3)
    assert digits(t, 3) == [1, 0, 0]


def test_truncated_bits_cannot_exceed_cutoff():
    with pytest.raises(ValueError):
        TruncatedReal((1, 0, 1), 2)


def test_rational_must_be_in_unit_interval():
    with pytest.raises(ValueError):
        RationalQuantity(Fraction(1))


def test_unknown_generator():
    with pytest.raises(KeyError):
        ComputableReal("chaitin_omega")


class TestToFiq:
    def test_half(self):
        f = to_fiq(RationalQuantity(Fraction(1, 2)), 1)
        assert f.prefix == (1,) and f.window == ()

    def test_take_zero(self):
        f = to_fiq(ComputableReal("pi_minus_3"), 0)
        assert f.prefix == () and information_content(f) == 0.0

    def test_pi_minus_3(self):
        assert to_fiq(ComputableReal("pi_minus_3"), 8).prefix == (0, 0, 1, 0, 0, 1, 0, 0)

    def test_information_equals_take(self):
        assert information_content(to_fiq(ComputableReal("e_minus_2"), 37)) == 37.0

    def test_respects_cutoff(self):
        with pytest.raises(PrecisionExceededError):
            to_fiq(TruncatedReal.from_string("101"), 4)

    @pytest.mark.parametrize("spec", ["rational:5/7", "truncated:1101001:9", "computable:sqrt2_minus_1"])
    def test_prefix_reproduces_digits(self, spec):
        src = parse_source(spec)
        take = 9
        assert list(to_fiq(src, take).prefix) == [digit_at(src, j) for j in range(1, take + 1)]


def test_periodicity_for_small_denominators():
    for q in range(2, 1000):
        for p in (1, q // 2, q - 1):
            x = RationalQuantity(Fraction(p, q))
            pre, period = expansion_by_long_division(x.value.numerator, x.value.denominator)
            assert x.expansion_period() == (pre, period)
            # the digit stream itself repeats with that period after the preperiod
            ds = digits(x, pre + 2 * period)
            assert ds[pre:pre + period] == ds[pre + period:pre + 2 * period]


def test_memo_is_write_once_under_concurrency():
    src = ComputableReal("pi_minus_3")
    first = [src.digit_at(j) for j in range(1, 50)]
    positions = list(range(1, 3000))
    with ThreadPoolExecutor(8) as pool:
        results = list(pool.map(src.digit_at, positions * 2))
    assert results[: len(positions)] == results[len(positions):]
    assert [src.digit_at(j) for j in range(1, 50)] == first
    assert results[:49] == first


class TestNonClosure:
    def by_op(self, value):
        return {row["operation"]: row for row in non_closure_demo(value)}

    def test_unit_square_diagonal(self):
        row = self.by_op(1)["square diagonal"]
        assert row["result"] == "sqrt(2)" and row["rational"] is False

    def test_unit_circle(self):
        row = self.by_op(1)["circle circumference"]
        assert row["result"] == "pi" and row["rational"] is False

    def test_squaring_quarter(self):
        row = self.by_op(RationalQuantity(Fraction(1, 4)))["square"]
        assert row["result"] == "1/16" and row["rational"] is True

    def test_square_root(self):
        assert self.by_op(Fraction(1, 4))["square root"]["result"] == "1/2"
        assert self.by_op(Fraction(1, 2))["square root"]["rational"] is False

    def test_zero_stays_rational(self):
        assert all(row["rational"] for row in non_closure_demo(0))


def test_parse_source():
    assert parse_source("rational:1/3") == RationalQuantity(Fraction(1, 3))
    assert parse_source("truncated:101:5") == TruncatedReal((1, 0, 1), 5)
    assert str(parse_source("computable:pi_minus_3")) == "computable:pi_minus_3"
    with pytest.raises(ValueError):
        parse_source("decimal:0.3")

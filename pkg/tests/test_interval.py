import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrbound.interval import (
    BoundDomainError,
    BoundOverflowError,
    BoundValue,
    add_down,
    add_up,
    div_down,
    div_up,
    iv_add,
    iv_div,
    iv_log2,
    iv_mul,
    iv_sqrt,
    iv_sub,
    log2_down,
    log2_up,
    mul_down,
    mul_up,
    sqrt_down,
    sqrt_up,
    sub_down,
    sub_up,
)
from oracle import ref

finite = st.floats(min_value=-1e12, max_value=1e12, allow_nan=False, allow_infinity=False)
positive = st.floats(min_value=1e-12, max_value=1e12)


def test_add_of_exact_integers():
    v = iv_add(BoundValue.point(1.0), BoundValue.point(1.0))
    assert 2 <= v.hi <= 2 + math.ulp(2.0)


def test_add_of_four_thirds():
    v = iv_add(BoundValue.from_fraction(Fraction(4, 3)), BoundValue.from_fraction(Fraction(4, 3)))
    assert v.exact == Fraction(8, 3)
    assert Fraction(v.hi) >= Fraction(8, 3)


def test_inexact_add_rounds_above_nearest():
    # 1 + 2**-60 rounds to 1.0 under round-to-nearest
    a, b = 1.0, 2.0**-60
    assert a + b == 1.0
    assert add_up(a, b) > 1.0
    assert mpmath.mpf(add_up(a, b)) >= ref("add", a, b)
    assert add_down(a, b) == 1.0


def test_sqrt_up_perfect_square():
    assert 2 <= sqrt_up(4.0) <= 2 + 2 * math.ulp(2.0)


def test_log2_down_power_of_two():
    assert 3 - 2 * math.ulp(3.0) <= log2_down(8) <= 3


def test_log2_up_six():
    # reference log2(6) = 2.58496250072115618145373894394781650875980...
    assert log2_up(6) >= 2.5849625007211561
    assert mpmath.mpf(log2_up(6)) >= ref("log2", 6)
    assert mpmath.mpf(log2_down(6)) <= ref("log2", 6)
    assert log2_up(6) - log2_down(6) <= 2 * math.ulp(2.6)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 7, 137, 1000, 2**40 + 1])
def test_log2_enclosure_tight(n):
    lo, hi = log2_down(n), log2_up(n)
    r = ref("log2", n)
    assert mpmath.mpf(lo) <= r <= mpmath.mpf(hi)
    assert hi - lo <= 2 * math.ulp(max(hi, 1.0))


@settings(max_examples=300)
@given(finite, finite)
def test_add_sub_sandwich(a, b):
    assert mpmath.mpf(add_up(a, b)) >= ref("add", a, b) >= mpmath.mpf(add_down(a, b))
    assert mpmath.mpf(sub_up(a, b)) >= ref("sub", a, b) >= mpmath.mpf(sub_down(a, b))
    assert add_up(a, b) - add_down(a, b) <= math.ulp(abs(a + b)) * 2


@settings(max_examples=300)
@given(finite, finite)
def test_mul_sandwich(a, b):
    assert mpmath.mpf(mul_up(a, b)) >= ref("mul", a, b) >= mpmath.mpf(mul_down(a, b))


@settings(max_examples=300)
@given(finite, positive)
def test_div_sandwich(a, b):
    assert mpmath.mpf(div_up(a, b)) >= ref("div", a, b) >= mpmath.mpf(div_down(a, b))


@settings(max_examples=300)
@given(st.floats(min_value=0, max_value=1e300))
def test_sqrt_sandwich_within_two_ulp(x):
    r = ref("sqrt", x)
    up, down = sqrt_up(x), sqrt_down(x)
    assert mpmath.mpf(up) >= r >= mpmath.mpf(down)
    assert up - down <= 2 * math.ulp(math.sqrt(x)) or x == 0


def test_mul_outside_fast_path_range():
    tiny = 2.0**-1000
    assert mpmath.mpf(mul_up(tiny, 3.0)) >= ref("mul", tiny, 3.0)
    assert mul_down(tiny, tiny) <= float(ref("mul", tiny, tiny))


@settings(max_examples=200)
@given(positive, positive, positive)
def test_up_ops_monotone(a, b, c):
    lo, hi = sorted((a, b))
    assert add_up(lo, c) <= add_up(hi, c)
    assert mul_up(lo, c) <= mul_up(hi, c)
    assert sqrt_up(lo) <= sqrt_up(hi)
    assert div_up(c, hi) <= div_up(c, lo)


def test_overflow_is_reported():
    with pytest.raises(BoundOverflowError, match="bound overflow"):
        add_up(1.7e308, 1.7e308)
    with pytest.raises(BoundOverflowError):
        mul_up(1e200, 1e200)


def test_negative_sqrt_is_domain_error():
    with pytest.raises(BoundDomainError):
        sqrt_up(-1.0)
    with pytest.raises(BoundDomainError):
        iv_sqrt(BoundValue(-1.0, 2.0))


def test_exact_fast_path():
    four_thirds = BoundValue.from_fraction(Fraction(4, 3))
    v = four_thirds
    for k in range(2, 6):
        v = iv_mul(four_thirds, v)
        assert v.exact == Fraction(4, 3) ** k
    assert iv_sqrt(BoundValue.from_fraction(Fraction(9, 4))).exact == Fraction(3, 2)
    assert iv_sqrt(BoundValue.from_fraction(2)).exact is None
    assert iv_log2(8).exact == 3
    assert iv_log2(6).exact is None


def test_enclosure_invariants():
    with pytest.raises(ValueError):
        BoundValue(2.0, 1.0)
    with pytest.raises(BoundOverflowError):
        BoundValue(1.0, math.inf)
    v = iv_sub(iv_log2(12), iv_log2(2))
    w = iv_div(v, iv_log2(6))
    assert w.lo <= 1 <= w.hi

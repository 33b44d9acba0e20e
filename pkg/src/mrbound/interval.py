"""Certified real arithmetic for bound chains.

Every operation is evaluated exactly over the rationals and then rounded
outward to the neighbouring binary64 value, so an upper endpoint is never
below the exact result and never more than one ulp above it.  Logarithms
are taken from a 200-bit mpmath evaluation with a relative safety margin,
which keeps results identical across platforms (libm is never consulted).

Values that are exactly rational (4/3, (4/3)**k, 3/4, ...) carry their
``exact`` fraction alongside the float enclosure; operations on two exact
operands stay exact wherever the result is rational.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import mpmath

ROUNDING_SCHEME = "exact-rational-outward/binary64"

_INF = math.inf


class BoundOverflowError(ArithmeticError):
    """Raised when a certified value leaves the finite binary64 range."""

    def __init__(self) -> None:
        super().__init__("bound overflow")


class BoundDomainError(ValueError):
    pass


def _check_finite(x: float) -> float:
    if math.isnan(x):
        raise BoundDomainError("NaN operand")
    if math.isinf(x):
        raise BoundOverflowError()
    return x


def round_up(q: Fraction) -> float:
    """Smallest binary64 value >= q."""
    try:
        f = float(q)
    except OverflowError:
        raise BoundOverflowError() from None
    if Fraction(f) < q:
        f = math.nextafter(f, _INF)
    return _check_finite(f)


def round_down(q: Fraction) -> float:
    """Largest binary64 value <= q."""
    try:
        f = float(q)
    except OverflowError:
        raise BoundOverflowError() from None
    if Fraction(f) > q:
        f = math.nextafter(f, -_INF)
    return _check_finite(f)


def _two_sum(a: float, b: float) -> tuple[float, float]:
    # Knuth: s + e == a + b exactly, barring overflow
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


_SPLITTER = 134217729.0  # 2**27 + 1
_SAFE_LO, _SAFE_HI = 2.0**-900, 2.0**900


def _two_prod(a: float, b: float) -> tuple[float, float] | None:
    # Dekker/Veltkamp: p + e == a * b exactly inside the safe exponent range
    p = a * b
    if p == 0 or not (_SAFE_LO < abs(p) < _SAFE_HI) or abs(a) > _SAFE_HI or abs(b) > _SAFE_HI:
        return None
    c = _SPLITTER * a
    ah = c - (c - a)
    al = a - ah
    c = _SPLITTER * b
    bh = c - (c - b)
    bl = b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def add_up(a: float, b: float) -> float:
    s, e = _two_sum(_check_finite(a), _check_finite(b))
    _check_finite(s)
    return math.nextafter(s, _INF) if e > 0 else s


def add_down(a: float, b: float) -> float:
    s, e = _two_sum(_check_finite(a), _check_finite(b))
    _check_finite(s)
    return math.nextafter(s, -_INF) if e < 0 else s


def sub_up(a: float, b: float) -> float:
    return add_up(a, -b)


def sub_down(a: float, b: float) -> float:
    return add_down(a, -b)


def mul_up(a: float, b: float) -> float:
    pe = _two_prod(_check_finite(a), _check_finite(b))
    if pe is None:
        return round_up(Fraction(a) * Fraction(b))
    p, e = pe
    return math.nextafter(p, _INF) if e > 0 else p


def mul_down(a: float, b: float) -> float:
    pe = _two_prod(_check_finite(a), _check_finite(b))
    if pe is None:
        return round_down(Fraction(a) * Fraction(b))
    p, e = pe
    return math.nextafter(p, -_INF) if e < 0 else p


def div_up(a: float, b: float) -> float:
    if b == 0:
        raise BoundDomainError("division by zero")
    return round_up(Fraction(a) / Fraction(b))


def div_down(a: float, b: float) -> float:
    if b == 0:
        raise BoundDomainError("division by zero")
    return round_down(Fraction(a) / Fraction(b))


def sqrt_up(x: float) -> float:
    if x < 0:
        raise BoundDomainError(f"square root of negative value {x!r}")
    _check_finite(x)
    r = math.sqrt(x)
    if Fraction(r) ** 2 < Fraction(x):
        r = math.nextafter(r, _INF)
    return r


def sqrt_down(x: float) -> float:
    if x < 0:
        raise BoundDomainError(f"square root of negative value {x!r}")
    _check_finite(x)
    r = math.sqrt(x)
    if Fraction(r) ** 2 > Fraction(x):
        r = math.nextafter(r, -_INF)
    return r


_LOG_MARGIN = Fraction(1, 2**150)


@lru_cache(maxsize=None)
def _log2_enclosure(n: int) -> tuple[float, float]:
    if n < 1:
        raise BoundDomainError(f"log2 needs a positive integer, got {n}")
    if n & (n - 1) == 0:
        e = float(n.bit_length() - 1)
        return e, e
    with mpmath.workprec(200):
        man, exp = mpmath.log(n, 2).man_exp
    q = Fraction(int(man)) * (Fraction(2) ** int(exp))
    return round_down(q * (1 - _LOG_MARGIN)), round_up(q * (1 + _LOG_MARGIN))


def log2_up(n: int) -> float:
    """Upper binary64 bound on log2(n) for a positive integer n."""
    return _log2_enclosure(n)[1]


def log2_down(n: int) -> float:
    """Lower binary64 bound on log2(n) for a positive integer n."""
    return _log2_enclosure(n)[0]


def _perfect_square_root(q: Fraction) -> Fraction | None:
    if q < 0:
        return None
    rn, rd = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if rn * rn == q.numerator and rd * rd == q.denominator:
        return Fraction(rn, rd)
    return None


@dataclass(frozen=True)
class BoundValue:
    """Outward-rounded enclosure ``[lo, hi]``; ``hi`` is the certified bound.

    ``exact`` is set only when the enclosed quantity is a known rational, in
    which case ``lo``/``hi`` are its downward/upward roundings.
    """

    lo: float
    hi: float
    exact: Fraction | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise BoundOverflowError()
        if self.lo > self.hi:
            raise ValueError(f"empty enclosure [{self.lo!r}, {self.hi!r}]")

    @classmethod
    def from_fraction(cls, q: Fraction | int) -> BoundValue:
        q = Fraction(q)
        return cls(round_down(q), round_up(q), q)

    @classmethod
    def point(cls, x: float) -> BoundValue:
        """Degenerate enclosure of a float, without the exact tag."""
        return cls(x, x)

    def __str__(self) -> str:
        if self.exact is not None:
            return f"{self.exact} (<= {self.hi!r})"
        return f"[{self.lo!r}, {self.hi!r}]"


def _make(lo: float, hi: float, exact: Fraction | None) -> BoundValue:
    if exact is not None:
        return BoundValue.from_fraction(exact)
    return BoundValue(lo, hi)


def _both_exact(a: BoundValue, b: BoundValue) -> bool:
    return a.exact is not None and b.exact is not None


def iv_add(a: BoundValue, b: BoundValue) -> BoundValue:
    exact = a.exact + b.exact if _both_exact(a, b) else None
    return _make(add_down(a.lo, b.lo), add_up(a.hi, b.hi), exact)


def iv_sub(a: BoundValue, b: BoundValue) -> BoundValue:
    exact = a.exact - b.exact if _both_exact(a, b) else None
    return _make(sub_down(a.lo, b.hi), sub_up(a.hi, b.lo), exact)


def iv_mul(a: BoundValue, b: BoundValue) -> BoundValue:
    if _both_exact(a, b):
        return BoundValue.from_fraction(a.exact * b.exact)
    if a.lo >= 0 and b.lo >= 0:
        return BoundValue(mul_down(a.lo, b.lo), mul_up(a.hi, b.hi))
    pairs = [(x, y) for x in (a.lo, a.hi) for y in (b.lo, b.hi)]
    return BoundValue(min(mul_down(x, y) for x, y in pairs), max(mul_up(x, y) for x, y in pairs))


def iv_div(a: BoundValue, b: BoundValue) -> BoundValue:
    if b.lo <= 0 <= b.hi:
        raise BoundDomainError("divisor enclosure contains zero")
    if _both_exact(a, b):
        return BoundValue.from_fraction(a.exact / b.exact)
    pairs = [(x, y) for x in (a.lo, a.hi) for y in (b.lo, b.hi)]
    return BoundValue(min(div_down(x, y) for x, y in pairs), max(div_up(x, y) for x, y in pairs))


def iv_square(a: BoundValue) -> BoundValue:
    if a.lo < 0:
        raise BoundDomainError("iv_square expects a non-negative enclosure")
    return iv_mul(a, a)


def iv_sqrt(a: BoundValue) -> BoundValue:
    if a.lo < 0:
        raise BoundDomainError(f"square root of enclosure reaching {a.lo!r}")
    if a.exact is not None:
        root = _perfect_square_root(a.exact)
        if root is not None:
            return BoundValue.from_fraction(root)
    return BoundValue(sqrt_down(a.lo), sqrt_up(a.hi))


def iv_log2(n: int) -> BoundValue:
    lo, hi = _log2_enclosure(n)
    if lo == hi:
        return BoundValue.from_fraction(Fraction(lo))
    return BoundValue(lo, hi)


def iv_max(a: BoundValue, b: BoundValue) -> BoundValue:
    if _both_exact(a, b):
        return BoundValue.from_fraction(max(a.exact, b.exact))
    return BoundValue(max(a.lo, b.lo), max(a.hi, b.hi))


ONE = BoundValue.from_fraction(1)
TWO = BoundValue.from_fraction(2)
HALF = BoundValue.from_fraction(Fraction(1, 2))
THREE_QUARTERS = BoundValue.from_fraction(Fraction(3, 4))
FOUR_THIRDS = BoundValue.from_fraction(Fraction(4, 3))

"""Bound formulas for D_n as pure functions on certified values.

Each rule takes certified upper bounds for smaller indices and returns a
certified upper bound for a larger (or, for ``rule_monotone``, smaller)
index.  Rule preconditions that fail raise ``RuleNotApplicable``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .certificate import CBound, RuleId, RuleTag
from .interval import (
    FOUR_THIRDS,
    HALF,
    ONE,
    THREE_QUARTERS,
    TWO,
    BoundDomainError,
    BoundValue,
    iv_add,
    iv_div,
    iv_log2,
    iv_max,
    iv_mul,
    iv_sqrt,
    iv_square,
    iv_sub,
)

D2 = BoundValue.from_fraction(Fraction(4, 3))

# Threshold of the doubling recursion: below it the linear branch applies.
CLS_THRESHOLD = 3.0


class RuleNotApplicable(ValueError):
    pass


@dataclass(frozen=True)
class RuleEval:
    rule: RuleId
    applicable: bool
    output: BoundValue | None = None
    output_index: int | None = None


def rule_base(n: int) -> BoundValue:
    if n == 1:
        return ONE
    if n == 2:
        return D2
    raise RuleNotApplicable(f"no base value for n={n}")


def rule_doob(n: int) -> BoundValue:
    if n < 2:
        raise RuleNotApplicable("Doob bound needs n >= 2")
    return iv_square(iv_add(TWO, iv_log2(n)))


def rule_kounias(n: int) -> BoundValue:
    if n < 2:
        raise RuleNotApplicable("Kounias bound needs n >= 2")
    return iv_square(iv_add(iv_div(iv_log2(n), iv_log2(3)), TWO))


def rule_cls_double(d_n: BoundValue) -> BoundValue:
    """Bound for D_{2n} from a bound on D_n.

    Piecewise: ``4/3 * d`` while ``d <= 3``, ``(sqrt(d - 3/4) + 1/2)**2``
    beyond.  The two pieces touch (with equal slope) at d = 3.  The root
    piece alone is not valid below 3: at d = 1 it would give D_2 <= 1.
    """
    if d_n.hi < 1:
        raise BoundDomainError(f"D_n bound {d_n.hi!r} is below 1; corrupt input")
    if d_n.hi <= CLS_THRESHOLD:
        return iv_mul(FOUR_THIRDS, d_n)
    return iv_square(iv_add(iv_sqrt(iv_sub(d_n, THREE_QUARTERS)), HALF))


def rule_bednorz_compose(
    d_n: BoundValue,
    n: int,
    d_m: BoundValue,
    m: int,
    d_lminus1: BoundValue | None,
    l: int,
) -> tuple[int, BoundValue]:
    """Block composition: bound for D_{n(2m+l)}.

    ``(sqrt(D_n) + sqrt(D_m))**2`` for l = 2, otherwise
    ``(sqrt(D_n) + sqrt(max(D_m, 2 D_{l-1})))**2``.
    """
    if n < 1 or m < 1:
        raise RuleNotApplicable("composition needs n >= 1 and m >= 1")
    if l < 2:
        raise RuleNotApplicable("composition needs l >= 2")
    if l == 2:
        inner = d_m
    else:
        if d_lminus1 is None:
            raise TypeError(f"a bound on D_{l - 1} is required when l = {l} > 2")
        inner = iv_max(d_m, iv_mul(TWO, d_lminus1))
    value = iv_square(iv_add(iv_sqrt(d_n), iv_sqrt(inner)))
    return n * (2 * m + l), value


def rule_corollary1(d_m: BoundValue, m: int, n: int) -> BoundValue:
    if m < 1 or n < m:
        raise RuleNotApplicable(f"log-ratio form needs n >= m >= 1, got m={m}, n={n}")
    ratio = iv_div(iv_sub(iv_log2(n), iv_log2(m)), iv_log2(2 * m + 2))
    return iv_mul(d_m, iv_square(iv_add(TWO, ratio)))


def rule_monotone(d_n: BoundValue, n: int, target: int) -> BoundValue:
    # padding with zero variables: D_target <= D_n for target <= n
    if not 1 <= target <= n:
        raise RuleNotApplicable(f"cannot lift D_{n} to D_{target}")
    return d_n


def cbound_from_corollary2(d_m: BoundValue, m: int, d_lminus1: BoundValue | None, l: int) -> CBound:
    """Bound on C from ``max(D_m, 2 D_{l-1}) / log2(2m+l)**2`` (``D_m`` alone for l = 2)."""
    if m < 1 or l < 2:
        raise RuleNotApplicable(f"need m >= 1 and l >= 2, got m={m}, l={l}")
    if l == 2:
        numerator = d_m
        d_lminus1 = ONE
    else:
        if d_lminus1 is None:
            raise TypeError(f"a bound on D_{l - 1} is required when l = {l} > 2")
        numerator = iv_max(d_m, iv_mul(TWO, d_lminus1))
    value = iv_div(numerator, iv_square(iv_log2(2 * m + l)))
    return CBound(value, m, l, (d_m, d_lminus1))


def apply_rule(rule: RuleId, inputs: Sequence[tuple[int, BoundValue]]) -> tuple[int, BoundValue]:
    """Evaluate ``rule`` on indexed inputs; returns ``(output_index, value)``.

    Checks that the input indices are the ones the rule parameters demand.
    """
    tag = rule.tag
    p = dict(rule.params)
    idx = [n for n, _ in inputs]
    vals = [v for _, v in inputs]

    def expect(*want: int) -> None:
        if tuple(idx) != want:
            raise RuleNotApplicable(f"{rule} expects inputs at {want}, got {tuple(idx)}")

    if tag in (RuleTag.BASE1, RuleTag.BASE2):
        expect()
        n = 1 if tag is RuleTag.BASE1 else 2
        return n, rule_base(n)
    if tag is RuleTag.DOOB:
        expect()
        return p["n"], rule_doob(p["n"])
    if tag is RuleTag.KOUNIAS:
        expect()
        return p["n"], rule_kounias(p["n"])
    if tag is RuleTag.CLS_DOUBLE:
        if len(idx) != 1:
            raise RuleNotApplicable("ClsDouble takes one input")
        return 2 * idx[0], rule_cls_double(vals[0])
    if tag is RuleTag.BEDNORZ_L2:
        expect(p["n"], p["m"])
        return rule_bednorz_compose(vals[0], p["n"], vals[1], p["m"], None, 2)
    if tag is RuleTag.BEDNORZ_GENERAL:
        expect(p["n"], p["m"], p["l"] - 1)
        return rule_bednorz_compose(vals[0], p["n"], vals[1], p["m"], vals[2], p["l"])
    if tag is RuleTag.COROLLARY1:
        expect(p["m"])
        return p["n"], rule_corollary1(vals[0], p["m"], p["n"])
    if tag is RuleTag.MONOTONE:
        if len(idx) != 1:
            raise RuleNotApplicable("Monotone takes one input")
        return p["target"], rule_monotone(vals[0], idx[0], p["target"])
    raise RuleNotApplicable(f"unknown rule {rule}")


def evaluate(rule: RuleId, inputs: Sequence[tuple[int, BoundValue]]) -> RuleEval:
    try:
        index, value = apply_rule(rule, inputs)
    except RuleNotApplicable:
        return RuleEval(rule, False)
    return RuleEval(rule, True, value, index)

"""High-precision reference evaluations, independent of the package arithmetic."""
from fractions import Fraction

import mpmath

DPS = 100


def mp(x) -> mpmath.mpf:
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def ref(op: str, *args):
    with mpmath.workdps(DPS):
        a = [mp(x) for x in args]
        if op == "add":
            return a[0] + a[1]
        if op == "sub":
            return a[0] - a[1]
        if op == "mul":
            return a[0] * a[1]
        if op == "div":
            return a[0] / a[1]
        if op == "sqrt":
            return mpmath.sqrt(a[0])
        if op == "log2":
            return mpmath.log(a[0], 2)
    raise ValueError(op)


def ulp(x: float) -> float:
    import math

    return math.ulp(x)

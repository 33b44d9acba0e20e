"""Rows comparing computed bounds against published reference values."""
from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_CEILING, ROUND_FLOOR, Decimal
from fractions import Fraction

import mpmath

from .certifier import SearchBudget, best_bound, best_cbound
from .interval import BoundValue, iv_div, iv_log2, iv_square
from .rules import cbound_from_corollary2, rule_base

EXACT = 0.0
FOUR_DIGITS = 1e-4
FIVE_DIGITS = 1e-5
CLOSED_FORM = 1e-12


def format_up(x: float, digits: int = 6) -> str:
    """Decimal rendering rounded toward +inf, so a printed bound never understates."""
    return str(Decimal(x).quantize(Decimal(1).scaleb(-digits), rounding=ROUND_CEILING))


def format_down(x: float, digits: int = 6) -> str:
    return str(Decimal(x).quantize(Decimal(1).scaleb(-digits), rounding=ROUND_FLOOR))


def parse_decimal(text: str) -> Decimal:
    # published values use a decimal comma
    return Decimal(text.replace(",", "."))


@dataclass(frozen=True)
class ReportRow:
    label: str
    index: str
    reference: str | None
    reference_value: float | None
    computed: float
    tolerance: float
    note: str = ""
    kind: str = "upper"
    reference_exact: Fraction | None = None
    computed_exact: Fraction | None = None

    @property
    def status(self) -> str:
        if self.reference_exact is not None and self.computed_exact is not None:
            if self.computed_exact == self.reference_exact:
                return "match"
            return "tighter" if self.computed_exact < self.reference_exact else "MISMATCH"
        if self.reference_value is None:
            return "match"
        diff = self.computed - self.reference_value
        if abs(diff) <= self.tolerance:
            return "match"
        if diff < -self.tolerance and self.kind == "upper":
            return "tighter"
        return "MISMATCH"

    def display_value(self) -> str:
        return format_up(self.computed) if self.kind == "upper" else format_down(self.computed)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "index": self.index,
            "reference": self.reference,
            "reference_value": self.reference_value,
            "computed": self.computed,
            "computed_display": self.display_value(),
            "computed_exact": None if self.computed_exact is None else str(self.computed_exact),
            "tolerance": self.tolerance,
            "status": self.status,
            "note": self.note,
        }


def kounias_constant() -> BoundValue:
    """Upper enclosure of (1 / log2 3)^2."""
    return iv_div(BoundValue.from_fraction(1), iv_square(iv_log2(3)))


def lower_constant() -> float:
    """1 / (pi^2 log2(e)^2) = (ln 2 / pi)^2, rounded down."""
    with mpmath.workprec(200):
        v = (mpmath.log(2) / mpmath.pi) ** 2
    return math.nextafter(float(v), 0.0)


def _mp(expr) -> float:
    with mpmath.workdps(50):
        return float(expr())


def reference_rows() -> list[ReportRow]:
    rows: list[ReportRow] = []
    d = {n: best_bound(n).final_bound for n in (2, 4, 8, 16, 32, 64)}

    rows.append(ReportRow("Doob C", "-", "1", 1.0, 1.0, EXACT, "leading coefficient of (2 + log2 n)^2"))
    rows.append(
        ReportRow(
            "Kounias C",
            "-",
            "(log2 2/log2 3)^2",
            _mp(lambda: (1 / mpmath.log(3, 2)) ** 2),
            kounias_constant().hi,
            FIVE_DIGITS,
        )
    )
    rows.append(
        ReportRow(
            "doubling-recursion C",
            "m=1,l=2",
            "1/4",
            0.25,
            best_cbound(SearchBudget(max_m=1, max_l=2)).value.hi,
            EXACT,
        )
    )
    rows.append(ReportRow("lower bound C", "-", "0,04868", 0.04868, lower_constant(), FIVE_DIGITS, kind="lower"))
    for n, ref, exact in ((2, "4/3", Fraction(4, 3)), (4, "(4/3)^2", Fraction(16, 9)), (8, "(4/3)^3", Fraction(64, 27)), (16, "(4/3)^4", Fraction(256, 81))):
        v = d[n]
        rows.append(
            ReportRow(f"D_{n}", f"n={n}", ref, float(exact), v.hi, EXACT, "exact rational", reference_exact=exact, computed_exact=v.exact)
        )
    rows.append(ReportRow("D_8", "n=8", "2,3704", 2.3704, d[8].hi, FOUR_DIGITS))
    d32_ref = _mp(lambda: (mpmath.sqrt(mpmath.mpf(256) / 81 - mpmath.mpf(3) / 4) + mpmath.mpf(1) / 2) ** 2)
    rows.append(ReportRow("D_32", "n=32", "((4/3)^4-3/4)^(1/2)+1/2)^2", d32_ref, d[32].hi, CLOSED_FORM))
    rows.append(ReportRow("D_64", "n=64", "5,5741", 5.5741, d[64].hi, FOUR_DIGITS))

    c22 = cbound_from_corollary2(rule_base(2), 2, None, 2).value.hi
    rows.append(
        ReportRow("C (m=2, l=2)", "m=2,l=2", "4/(3 log2^2 6)", _mp(lambda: mpmath.mpf(4) / (3 * mpmath.log(6, 2) ** 2)), c22, CLOSED_FORM)
    )
    rows.append(ReportRow("C (m=2, l=2) < 1/5", "m=2,l=2", "1/5", 0.2, c22, EXACT, "strict inequality"))
    best = best_cbound(SearchBudget(max_m=64, max_l=16))
    witness = f"m={best.witness_m},l={best.witness_l}"
    rows.append(ReportRow("C optimized", witness, "0,1107", 0.1107, best.value.hi, FOUR_DIGITS))
    rows.append(ReportRow("C optimized < 1/9", witness, "1/9", 1 / 9, best.value.hi, EXACT, "strict inequality"))
    return rows

"""Search for the tightest certified D_n bound and replay certificates.

The search is value iteration over a table of bounds for indices
``1..max_index``.  Each sweep walks upward applying every forward rule
(closed forms, doubling, block composition, the log-ratio form), then a
downward pass lifts each entry to the best bound found at any larger
index.  All rules are monotone in their inputs, so entries only decrease
and the iteration reaches a fixed point.

Candidates are ranked with plain floats and only the near-best are
re-evaluated with certified arithmetic, so the float path never decides
a bound, only which rule gets certified.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

from .certificate import (
    ENGINE_VERSION,
    CBound,
    Certificate,
    CertificateError,
    DerivationStep,
    ForgedStep,
    MalformedCertificate,
    RuleId,
    RuleTag,
    UnsupportedRule,
)
from .interval import ROUNDING_SCHEME, BoundDomainError, BoundValue
from .rules import RuleNotApplicable, apply_rule, cbound_from_corollary2, rule_base

log = logging.getLogger(__name__)

_PREFILTER_SLACK = 1e-9


@dataclass(frozen=True)
class SearchBudget:
    """Limits on the composition search.

    ``max_index`` caps intermediate indices (``None`` means ``4 * target``),
    ``max_m``/``max_l`` cap the block parameters, and ``max_steps`` caps the
    number of value-iteration sweeps.
    """

    max_index: int | None = None
    max_m: int = 64
    max_l: int = 16
    max_steps: int = 64

    def __post_init__(self) -> None:
        if self.max_index is not None and self.max_index < 1:
            raise ValueError("max_index must be positive")
        if self.max_m < 1 or self.max_l < 2 or self.max_steps < 1:
            raise ValueError("need max_m >= 1, max_l >= 2, max_steps >= 1")

    def index_cap(self, target_n: int) -> int:
        cap = 4 * target_n if self.max_index is None else self.max_index
        if cap < target_n:
            raise ValueError(f"max_index {cap} is below the target {target_n}")
        return cap


def _candidate_key(step: DerivationStep) -> tuple:
    return (step.hi, step.rule.tag, step.rule.params)


class BoundTable:
    """Monotone-closed table ``n -> best certified step`` for ``n <= max_index``."""

    def __init__(self, max_index: int, max_m: int = 64, max_l: int = 16) -> None:
        if max_index < 1:
            raise ValueError("max_index must be positive")
        self.max_index = max_index
        self.max_m = max_m
        self.max_l = max_l
        self.entries: list[DerivationStep | None] = [None] * (max_index + 1)
        self._hif = [math.inf] * (max_index + 1)
        self._memo: dict[tuple, DerivationStep] = {}
        self.sweeps = 0
        self.converged = False
        self._lg = [0.0, 0.0] + [math.log2(k) for k in range(2, 2 * max_index + 3)]
        # block sizes p = 2m + l that fit the parameter caps, grouped by multiple
        pmax = min(max_index, 2 * max_m + max_l)
        self._blocks: list[list[int]] = [[] for _ in range(max_index + 1)]
        for p in range(4, pmax + 1):
            for mult in range(p, max_index + 1, p):
                self._blocks[mult].append(p)

    # -- queries ---------------------------------------------------------
    def step(self, n: int) -> DerivationStep:
        if not 1 <= n <= self.max_index:
            raise IndexError(f"index {n} outside table range 1..{self.max_index}")
        entry = self.entries[n]
        assert entry is not None
        return entry

    def value(self, n: int) -> BoundValue:
        return self.step(n).output_value

    def certificate(self, n: int) -> Certificate:
        return Certificate.from_final_step(n, self.step(n), budget_limited=not self.converged)

    # -- search ----------------------------------------------------------
    def _hi(self, n: int) -> float:
        e = self.entries[n]
        return math.inf if e is None else e.hi

    def _candidates(self, N: int) -> list[tuple[float, RuleTag, tuple, tuple[int, ...]]]:
        """Float-ranked ``(approx, tag, params, input indices)`` for index N."""
        hi = self._hif
        lg = self._lg
        if N == 1:
            return [(1.0, RuleTag.BASE1, (), ())]
        out: list[tuple[float, RuleTag, tuple, tuple[int, ...]]] = []
        if N == 2:
            out.append((4 / 3, RuleTag.BASE2, (), ()))
        out.append(((2 + lg[N]) ** 2, RuleTag.DOOB, (("n", N),), ()))
        out.append(((lg[N] / lg[3] + 2) ** 2, RuleTag.KOUNIAS, (("n", N),), ()))
        if N % 2 == 0:
            d = hi[N // 2]
            approx = 4 * d / 3 if d <= 3 else (math.sqrt(d - 0.75) + 0.5) ** 2
            out.append((approx, RuleTag.CLS_DOUBLE, (), (N // 2,)))
        sqrt = math.sqrt
        for p in self._blocks[N]:
            a = N // p
            ra = sqrt(hi[a])
            for l in range(2 + p % 2, min(self.max_l, p - 2) + 1, 2):
                m = (p - l) // 2
                if m > self.max_m:
                    continue
                if l == 2:
                    out.append(((ra + sqrt(hi[m])) ** 2, RuleTag.BEDNORZ_L2, (("m", m), ("n", a)), (a, m)))
                else:
                    inner = max(hi[m], 2 * hi[l - 1])
                    out.append(
                        ((ra + sqrt(inner)) ** 2, RuleTag.BEDNORZ_GENERAL, (("l", l), ("m", m), ("n", a)), (a, m, l - 1))
                    )
        lgN = lg[N]
        for m in range(1, min(N - 1, self.max_m) + 1):
            factor = 2 + (lgN - lg[m]) / lg[2 * m + 2]
            out.append((hi[m] * factor * factor, RuleTag.COROLLARY1, (("m", m), ("n", N)), (m,)))
        return out

    def _certify(self, tag: RuleTag, params: tuple, idx: tuple[int, ...]) -> DerivationStep:
        sources = tuple(self.step(i) for i in idx)
        key = (tag, params, sources)
        step = self._memo.get(key)
        if step is None:
            rule = RuleId(tag, params)
            inputs = tuple((i, s.output_value) for i, s in zip(idx, sources))
            out_n, value = apply_rule(rule, inputs)
            step = self._memo[key] = DerivationStep(rule, inputs, out_n, value, sources)
        return step

    def _improve(self, N: int) -> bool:
        cands = self._candidates(N)
        best_approx = min(c[0] for c in cands)
        current = self._hi(N)
        if best_approx > current * (1 + _PREFILTER_SLACK):
            return False
        cutoff = best_approx * (1 + _PREFILTER_SLACK)
        steps = [self._certify(tag, params, idx) for approx, tag, params, idx in cands if approx <= cutoff]
        best = min(steps, key=_candidate_key)
        if best.hi < current:
            self._set(N, best)
            return True
        return False

    def _set(self, N: int, step: DerivationStep) -> None:
        self.entries[N] = step
        self._hif[N] = step.hi

    def _lift(self) -> bool:
        changed = False
        best_src: DerivationStep | None = None
        for N in range(self.max_index, 0, -1):
            entry = self.entries[N]
            assert entry is not None
            if best_src is not None and best_src.hi < entry.hi:
                rule = RuleId.make(RuleTag.MONOTONE, target=N)
                inputs = ((best_src.output_index, best_src.output_value),)
                _, value = apply_rule(rule, inputs)
                self._set(N, DerivationStep(rule, inputs, N, value, (best_src,)))
                changed = True
            elif entry.rule.tag is not RuleTag.MONOTONE and (best_src is None or entry.hi < best_src.hi):
                best_src = entry
        return changed

    def solve(self, max_steps: int = 64) -> BoundTable:
        while self.sweeps < max_steps:
            self.sweeps += 1
            changed = False
            for N in range(1, self.max_index + 1):
                changed |= self._improve(N)
            changed |= self._lift()
            if not changed:
                self.converged = True
                break
        self._memo.clear()
        if not self.converged:
            log.warning("bound table stopped after %d sweeps without reaching a fixed point", self.sweeps)
        return self


@lru_cache(maxsize=32)
def solve_table(max_index: int, max_m: int = 64, max_l: int = 16, max_steps: int = 64) -> BoundTable:
    return BoundTable(max_index, max_m, max_l).solve(max_steps)


def best_bound(target_n: int, budget: SearchBudget | None = None) -> Certificate:
    if target_n < 1:
        raise ValueError("target_n must be >= 1")
    budget = budget or SearchBudget()
    if target_n <= 2 and budget.max_index is None:
        # nothing in the search can beat the base values
        rule = RuleId.make(RuleTag.BASE1 if target_n == 1 else RuleTag.BASE2)
        step = DerivationStep(rule, (), target_n, rule_base(target_n))
        return Certificate.from_final_step(target_n, step)
    table = solve_table(budget.index_cap(target_n), budget.max_m, budget.max_l, budget.max_steps)
    return table.certificate(target_n)


@dataclass(frozen=True)
class CBoundResult:
    cbound: CBound
    table: BoundTable

    def certificates(self) -> tuple[Certificate, Certificate | None]:
        m, l = self.cbound.witness_m, self.cbound.witness_l
        return self.table.certificate(m), (self.table.certificate(l - 1) if l > 2 else None)


def search_cbound(budget: SearchBudget | None = None) -> CBoundResult:
    budget = budget or SearchBudget()
    reach = max(budget.max_m, budget.max_l - 1)
    table = solve_table(budget.index_cap(reach), budget.max_m, budget.max_l, budget.max_steps)
    ranked = []
    for m in range(1, budget.max_m + 1):
        dm = table.value(m).hi
        for l in range(2, budget.max_l + 1):
            num = dm if l == 2 else max(dm, 2 * table.value(l - 1).hi)
            ranked.append((num / math.log2(2 * m + l) ** 2, m, l))
    cutoff = min(r[0] for r in ranked) * (1 + _PREFILTER_SLACK)
    best: CBound | None = None
    for _, m, l in sorted(r for r in ranked if r[0] <= cutoff):
        cb = cbound_from_corollary2(table.value(m), m, table.value(l - 1) if l > 2 else None, l)
        if best is None or (cb.value.hi, m, l) < (best.value.hi, best.witness_m, best.witness_l):
            best = cb
    assert best is not None
    return CBoundResult(best, table)


def best_cbound(budget: SearchBudget | None = None) -> CBound:
    return search_cbound(budget).cbound


class Verdict(str, enum.Enum):
    VALID = "valid"
    FORGED = "forged"
    MALFORMED = "malformed"
    UNSUPPORTED = "unsupported"


def _as_recorded(v: BoundValue) -> BoundValue:
    # what a serialized certificate carries: hi and, if present, the exact value
    if v.exact is not None:
        return BoundValue.from_fraction(v.exact)
    return BoundValue(v.hi, v.hi)


def _same(a: BoundValue, b: BoundValue) -> bool:
    return a.hi.hex() == b.hi.hex() and a.exact == b.exact


def replay(cert: Certificate) -> BoundValue:
    """Re-execute every step and return the certified final bound.

    Raises ``MalformedCertificate``, ``ForgedStep`` or ``UnsupportedRule``.
    """
    if not cert.engine_version.endswith("+" + ROUNDING_SCHEME):
        raise UnsupportedRule(f"unsupported rounding scheme in engine version {cert.engine_version!r}")
    if not cert.steps:
        raise MalformedCertificate("certificate has no steps")
    position: dict[int, int] = {}
    outputs: list[BoundValue] = []
    for k, step in enumerate(cert.steps):
        if len(step.sources) != len(step.inputs):
            raise MalformedCertificate(f"step {k} lists {len(step.inputs)} inputs but {len(step.sources)} sources")
        inputs = []
        for (n, recorded), src in zip(step.inputs, step.sources):
            j = position.get(id(src))
            if j is None:
                raise MalformedCertificate(f"dangling input reference in step {k}")
            if cert.steps[j].output_index != n or not _same(outputs[j], recorded):
                raise ForgedStep(k, f"input D_{n} does not match the output of step {j}")
            inputs.append((n, outputs[j]))
        try:
            out_n, value = apply_rule(step.rule, inputs)
        except (RuleNotApplicable, BoundDomainError) as exc:
            raise ForgedStep(k, str(exc)) from None
        if out_n != step.output_index or not _same(value, step.output_value):
            raise ForgedStep(
                k, f"recomputed D_{out_n} <= {value.hi!r}, recorded D_{step.output_index} <= {step.output_value.hi!r}"
            )
        position[id(step)] = k
        outputs.append(_as_recorded(value))
    last = cert.steps[-1]
    if last.output_index != cert.target_n:
        raise MalformedCertificate(f"last step bounds D_{last.output_index}, not the target D_{cert.target_n}")
    if not _same(outputs[-1], cert.final_bound):
        raise ForgedStep(len(cert.steps) - 1, "final bound differs from the last step")
    return outputs[-1]


def verify(cert: Certificate) -> tuple[Verdict, str]:
    try:
        value = replay(cert)
    except CertificateError as exc:
        return Verdict(exc.verdict), str(exc)
    return Verdict.VALID, f"D_{cert.target_n} <= {value.hi!r}"


__all__ = [
    "ENGINE_VERSION",
    "BoundTable",
    "CBoundResult",
    "SearchBudget",
    "Verdict",
    "best_bound",
    "best_cbound",
    "replay",
    "search_cbound",
    "solve_table",
    "verify",
]

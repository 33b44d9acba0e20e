"""Rule vocabulary, derivation steps and replayable certificates."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from .interval import ROUNDING_SCHEME, BoundValue

__version__ = "0.1.0"
ENGINE_VERSION = f"mrbound-{__version__}+{ROUNDING_SCHEME}"


class CertificateError(Exception):
    verdict = "invalid"


class MalformedCertificate(CertificateError):
    verdict = "malformed"


class UnsupportedRule(CertificateError):
    verdict = "unsupported"


class ForgedStep(CertificateError):
    verdict = "forged"

    def __init__(self, step: int, detail: str = "") -> None:
        self.step = step
        msg = f"forged step {step}"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class RuleTag(enum.IntEnum):
    # declaration order is the tie-break order used by the search
    BASE1 = 0
    BASE2 = 1
    DOOB = 2
    KOUNIAS = 3
    CLS_DOUBLE = 4
    BEDNORZ_L2 = 5
    BEDNORZ_GENERAL = 6
    COROLLARY1 = 7
    MONOTONE = 8

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> RuleTag:
        try:
            return _BY_LABEL[label]
        except KeyError:
            raise KeyError(label) from None


_LABELS = {
    RuleTag.BASE1: "Base1",
    RuleTag.BASE2: "Base2",
    RuleTag.DOOB: "Doob",
    RuleTag.KOUNIAS: "Kounias",
    RuleTag.CLS_DOUBLE: "ClsDouble",
    RuleTag.BEDNORZ_L2: "BednorzL2",
    RuleTag.BEDNORZ_GENERAL: "BednorzGeneral",
    RuleTag.COROLLARY1: "Corollary1",
    RuleTag.MONOTONE: "Monotone",
}
_BY_LABEL = {v: k for k, v in _LABELS.items()}


@dataclass(frozen=True, order=True)
class RuleId:
    tag: RuleTag
    params: tuple[tuple[str, int], ...] = ()

    @classmethod
    def make(cls, tag: RuleTag, **params: int) -> RuleId:
        return cls(tag, tuple(sorted(params.items())))

    def param(self, name: str) -> int:
        return dict(self.params)[name]

    def __post_init__(self) -> None:
        p = dict(self.params)
        if self.tag is RuleTag.BEDNORZ_GENERAL and p.get("l", 0) <= 2:
            raise ValueError("BednorzGeneral requires l > 2")
        if self.tag is RuleTag.CLS_DOUBLE and p:
            raise ValueError("ClsDouble takes no parameters")

    def __str__(self) -> str:
        inner = ", ".join(f"{k}={v}" for k, v in self.params)
        return f"{self.tag.label}({inner})"


@dataclass(frozen=True, eq=False)
class DerivationStep:
    """One application of a rule.

    ``sources`` holds the steps that produced each input (same order as
    ``inputs``); it is what makes a certificate a DAG of immutable steps.
    """

    rule: RuleId
    inputs: tuple[tuple[int, BoundValue], ...]
    output_index: int
    output_value: BoundValue
    sources: tuple[DerivationStep, ...] = field(default=(), repr=False)

    @property
    def hi(self) -> float:
        return self.output_value.hi


def _value_json(n: int, v: BoundValue) -> dict[str, Any]:
    d: dict[str, Any] = {"n": n, "hi": repr(v.hi), "hi_hex": v.hi.hex()}
    if v.exact is not None:
        d["exact"] = str(v.exact)
    return d


def _value_from_json(d: dict[str, Any]) -> tuple[int, BoundValue]:
    n = int(d["n"])
    hi = float.fromhex(d["hi_hex"])
    # kept verbatim even if hi and exact disagree; replay reports the forgery
    exact = Fraction(d["exact"]) if "exact" in d else None
    return n, BoundValue(hi, hi, exact)


def topological_steps(final: DerivationStep) -> list[DerivationStep]:
    """Post-order listing of every step reachable from ``final``."""
    order: list[DerivationStep] = []
    seen: set[int] = set()
    stack: list[tuple[DerivationStep, bool]] = [(final, False)]
    while stack:
        step, expanded = stack.pop()
        if expanded:
            order.append(step)
            continue
        if id(step) in seen:
            continue
        seen.add(id(step))
        stack.append((step, True))
        for src in reversed(step.sources):
            if id(src) not in seen:
                stack.append((src, False))
    return order


@dataclass
class Certificate:
    target_n: int
    steps: list[DerivationStep]
    final_bound: BoundValue
    engine_version: str = ENGINE_VERSION
    budget_limited: bool = False

    @classmethod
    def from_final_step(cls, target_n: int, final: DerivationStep, budget_limited: bool = False) -> Certificate:
        return cls(target_n, topological_steps(final), final.output_value, budget_limited=budget_limited)

    def to_dict(self) -> dict[str, Any]:
        position = {id(s): k for k, s in enumerate(self.steps)}
        steps = []
        for s in self.steps:
            inputs = []
            for (n, v), src in zip(s.inputs, s.sources):
                d = _value_json(n, v)
                d["from"] = position[id(src)]
                inputs.append(d)
            steps.append(
                {
                    "rule": s.rule.tag.label,
                    "params": dict(s.rule.params),
                    "inputs": inputs,
                    "output": _value_json(s.output_index, s.output_value),
                }
            )
        final = {"hi": repr(self.final_bound.hi), "hi_hex": self.final_bound.hi.hex()}
        if self.final_bound.exact is not None:
            final["exact"] = str(self.final_bound.exact)
        out = {
            "target_n": self.target_n,
            "engine_version": self.engine_version,
            "steps": steps,
            "final": final,
        }
        if self.budget_limited:
            out["budget_limited"] = True
        return out

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Certificate:
        """Rebuild a certificate; structural problems raise ``MalformedCertificate``.

        Unknown rule labels are kept as ``None`` rules so that ``replay`` can
        report them as unsupported rather than malformed.
        """
        try:
            target = int(data["target_n"])
            raw_steps = data["steps"]
            steps: list[DerivationStep] = []
            for k, raw in enumerate(raw_steps):
                try:
                    tag = RuleTag.from_label(raw["rule"])
                except KeyError:
                    raise UnsupportedRule(f"unsupported rule {raw['rule']!r} at step {k}") from None
                rule = RuleId.make(tag, **{p: int(v) for p, v in raw.get("params", {}).items()})
                inputs = []
                sources = []
                for inp in raw["inputs"]:
                    ref = int(inp["from"])
                    if not 0 <= ref < k:
                        raise MalformedCertificate(f"dangling input reference {ref} in step {k}")
                    inputs.append(_value_from_json(inp))
                    sources.append(steps[ref])
                out_n, out_v = _value_from_json(raw["output"])
                steps.append(DerivationStep(rule, tuple(inputs), out_n, out_v, tuple(sources)))
            fin = data["final"]
            final_hi = float.fromhex(fin["hi_hex"])
            final = BoundValue(final_hi, final_hi, Fraction(fin["exact"]) if "exact" in fin else None)
            return cls(
                target,
                steps,
                final,
                engine_version=str(data["engine_version"]),
                budget_limited=bool(data.get("budget_limited", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedCertificate(f"malformed certificate: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> Certificate:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedCertificate(f"malformed certificate: {exc}") from exc
        if not isinstance(data, dict):
            raise MalformedCertificate("malformed certificate: top level is not an object")
        return cls.from_dict(data)


@dataclass(frozen=True)
class CBound:
    """Certified upper bound on the asymptotic constant C."""

    value: BoundValue
    witness_m: int
    witness_l: int
    components: tuple[BoundValue, BoundValue]

    @property
    def bound_on_dm(self) -> BoundValue:
        return self.components[0]

    @property
    def bound_on_dl_minus_1(self) -> BoundValue:
        return self.components[1]


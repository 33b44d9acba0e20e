"""Acceptance gate: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (the lines are repeated in the
terminal summary) or directly with ``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import math
import random
import time
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from mrbound import interval as iv
from mrbound.certificate import Certificate
from mrbound.certifier import SearchBudget, best_bound, best_cbound, replay, solve_table, verify, Verdict
from mrbound.orthosim import (
    adversarial_lower_bound,
    expected_running_max,
    make_random_system,
    pointwise_lemma_gap,
    verify_decomposition,
)
from mrbound.report import kounias_constant, lower_constant
from mrbound.rules import cbound_from_corollary2, rule_base

from oracle import ref

RESULTS: list[str] = []

# relative roundoff allowance for float-valued simulated expectations
FLOAT_SLACK = 1e-12


def report(label: str, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'}  criterion {label}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def cold():
    solve_table.cache_clear()


# -- 1..6: headline numbers --------------------------------------------------


def check_1() -> bool:
    cold()
    cert, dt = timed(best_bound, 2)
    ok = cert.final_bound.exact == Fraction(4, 3) and dt < 1e-3
    return report("1", ok, f"bound(2) = {cert.final_bound.exact} in {dt * 1e3:.3f} ms (limit 1 ms)")


def check_2() -> bool:
    cold()
    cert, dt = timed(best_bound, 8)
    hi = cert.final_bound.hi
    ok = 2.37037 <= hi <= 2.37047 and dt < 10e-3
    return report("2", ok, f"bound(8).hi = {hi!r} (exact {cert.final_bound.exact}) in {dt * 1e3:.2f} ms (limit 10 ms)")


def check_3() -> bool:
    cold()
    cert, dt = timed(best_bound, 64)
    hi = cert.final_bound.hi
    ok = 5.5739 <= hi <= 5.5742 and dt < 0.1
    return report("3", ok, f"bound(64).hi = {hi!r} in {dt * 1e3:.1f} ms (limit 100 ms)")


def check_4() -> bool:
    cold()
    cb, dt = timed(best_cbound, SearchBudget(max_m=64, max_l=16))
    hi = cb.value.hi
    ok = hi <= 0.11072 and hi < 1 / 9 and (cb.witness_m, cb.witness_l) == (64, 9) and dt < 5
    return report(
        "4", ok, f"C <= {hi!r} witness (m={cb.witness_m}, l={cb.witness_l}) in {dt:.2f} s (limit 5 s)"
    )


def check_5() -> bool:
    c = cbound_from_corollary2(rule_base(2), 2, None, 2).value.hi
    ok = 0.19949 <= c <= 0.19959 and c < 0.2
    return report("5", ok, f"C(m=2, l=2) <= {c!r}")


def _distance(x: float, lo: float, hi: float) -> float:
    return max(lo - x, x - hi, 0.0)


def check_6() -> bool:
    tol = 1e-5
    k = kounias_constant().hi
    low = lower_constant()
    dk = _distance(k, 0.39808, 0.39810)
    dl = _distance(low, 0.048679, 0.048681)
    ok = dk <= tol and dl <= tol
    return report(
        "6",
        ok,
        f"Kounias {k:.9f} (distance to [0.39808, 0.39810] = {dk:.1e}), "
        f"lower {low:.9f} (distance {dl:.1e}), tolerance {tol:g}",
    )


# -- 7: property suite -------------------------------------------------------


def check_7a(count: int = 10**6) -> bool:
    rng = np.random.default_rng(20240607)
    # mixed scales, so that cancellation in a + b and c + d is exercised
    scale = 10.0 ** rng.uniform(-3, 3, size=(4, count))
    z = (rng.standard_normal((4, count)) + 1j * rng.standard_normal((4, count))) * scale
    gap = pointwise_lemma_gap(*z)
    total = np.sum(np.abs(z) ** 2, axis=0)
    failures = int(np.sum(gap < -4 * np.finfo(float).eps * total))
    return report("7a", failures == 0, f"{count} complex quadruples, {failures} failures, min relative slack {np.min(gap / total):.3g}")


def check_7b(count: int = 500) -> bool:
    table = solve_table(64)
    violations, worst = 0, 0.0
    for seed in range(count):
        n = 1 + seed % 16
        K = n + 1 + seed % (3 * n)
        s = make_random_system(n, K, seed=seed, field_kind="complex" if seed % 5 == 0 else "real")
        # scale by the realized total variance, which is 1 only up to roundoff
        e, b = expected_running_max(s), table.value(n).hi * float(np.sum(s.variances()))
        violations += e > b * (1 + FLOAT_SLACK)
        worst = max(worst, e / b)
    return report("7b", violations == 0, f"{count} systems, {violations} violations, max E/bound = {worst:.4f}")


def check_7c() -> bool:
    v, w = adversarial_lower_bound(2, K=8, restarts=50, seed=0)
    ok = v >= 4 / 3 - 0.01 and w.orthogonality_residual() <= 1e-10
    return report("7c", ok, f"adversarial D_2 >= {v:.6f} (need 1.3233), residual {w.orthogonality_residual():.1e}")


def _random_float(rng: random.Random, positive: bool = False) -> float:
    x = rng.uniform(1, 2) * 2.0 ** rng.randint(-60, 60)
    if rng.random() < 0.1:
        x = float(rng.randint(1, 1000))  # exact-result cases
    return x if positive or rng.random() < 0.5 else -x


def check_7d(count: int = 10**5) -> bool:
    rng = random.Random(7)
    pairs = {
        "add": (iv.add_down, iv.add_up),
        "sub": (iv.sub_down, iv.sub_up),
        "mul": (iv.mul_down, iv.mul_up),
        "div": (iv.div_down, iv.div_up),
    }
    violations = 0
    for i in range(count):
        kind = i % 6
        if kind < 4:
            op = ("add", "sub", "mul", "div")[kind]
            a, b = _random_float(rng), _random_float(rng)
            lo, hi = pairs[op][0](a, b), pairs[op][1](a, b)
            r = ref(op, a, b)
        elif kind == 4:
            a = _random_float(rng, positive=True)
            lo, hi, r = iv.sqrt_down(a), iv.sqrt_up(a), ref("sqrt", a)
        else:
            n = rng.randint(1, 10**6) if rng.random() < 0.5 else 2 ** rng.randint(0, 40) + rng.randint(-1, 1)
            n = max(n, 1)
            lo, hi, r = iv.log2_down(n), iv.log2_up(n), ref("log2", n)
        if not (mpmath.mpf(lo) <= r <= mpmath.mpf(hi)):
            violations += 1
    return report("7d", violations == 0, f"{count} directed operations vs 100-digit reference, {violations} violations")


def _tamper(cert: Certificate, step: int, direction: float) -> Certificate:
    d = cert.to_dict()
    out = d["steps"][step]["output"]
    out["hi_hex"] = math.nextafter(float.fromhex(out["hi_hex"]), direction).hex()
    return Certificate.from_dict(d)


def check_7e() -> bool:
    bad = []
    tampers = 0
    for n in (2, 8, 64, 137, 1000):
        cert = best_bound(n)
        again = Certificate.from_json(cert.to_json())
        if replay(again).hi.hex() != cert.final_bound.hi.hex():
            bad.append(f"replay {n}")
        for k in range(len(cert.steps)):
            for direction in (-math.inf, math.inf):
                tampers += 1
                if verify(_tamper(cert, k, direction))[0] is not Verdict.FORGED:
                    bad.append(f"tamper {n}/{k}")
    detail = f"replay bit-exact for 2, 8, 64, 137, 1000; {tampers} one-ulp tampers"
    return report("7e", not bad, detail + (f"; undetected: {bad}" if bad else ", all detected"))


def check_7() -> bool:
    t0 = time.perf_counter()
    parts = [check_7a(), check_7b(), check_7c(), check_7d(), check_7e()]
    dt = time.perf_counter() - t0
    return report("7", all(parts) and dt < 60, f"sub-checks {sum(parts)}/5 passed in {dt:.1f} s (limit 60 s)")


# -- 8: decomposition chain --------------------------------------------------


def check_8(count: int = 200) -> bool:
    table = solve_table(64)
    rng = random.Random(8)
    violations = 0
    for seed in range(count):
        n_blocks, m, l = rng.randint(1, 4), rng.randint(1, 4), rng.choice((2, 3, 4))
        N = n_blocks * (2 * m + l)
        s = make_random_system(N, N + rng.randint(1, 2 * N), seed=seed, field_kind="complex" if seed % 4 == 0 else "real")
        r = verify_decomposition(s, n_blocks, m, l, bound=lambda k: table.value(k).hi)
        violations += not r.chain_holds
    return report("8", violations == 0, f"{count} block systems, LHS <= MID <= RHS violated {violations} times")


# -- pytest entry points -----------------------------------------------------


@pytest.mark.parametrize("check", [check_1, check_2, check_3, check_4, check_5, check_6], ids=lambda f: f.__name__)
def test_headline(check):
    assert check()


@pytest.mark.slow
def test_property_suite():
    assert check_7()


@pytest.mark.slow
def test_decomposition_chain():
    assert check_8()


if __name__ == "__main__":
    import sys

    results = [c() for c in (check_1, check_2, check_3, check_4, check_5, check_6, check_7, check_8)]
    sys.exit(0 if all(results) else 1)

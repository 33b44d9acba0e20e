"""Orthogonal systems on finite equiprobable atom spaces.

A system of n variables over K atoms is a K x n array ``values`` with
``values[w, i] = X_{i+1}(w)``.  Every expectation is the plain average over
atoms, so ``expected_running_max`` is exact up to float rounding and a
value above a certified bound would be a genuine counterexample.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

ORTHO_TOL = 1e-10


@dataclass
class OrthogonalSystem:
    values: np.ndarray
    seed: int | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values)
        if self.values.ndim != 2:
            raise ValueError("values must be a K x n array")

    @property
    def atoms(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def field_kind(self) -> str:
        return "complex" if np.iscomplexobj(self.values) else "real"

    def variances(self) -> np.ndarray:
        """E|X_i|^2 for each variable."""
        return np.mean(np.abs(self.values) ** 2, axis=0)

    def gram(self) -> np.ndarray:
        """Matrix of E[X_i conj(X_j)]."""
        return self.values.T @ self.values.conj() / self.atoms

    def orthogonality_residual(self) -> float:
        g = self.gram()
        return float(np.max(np.abs(g - np.diag(np.diag(g))), initial=0.0))

    def validate(self, tol: float = ORTHO_TOL) -> None:
        res = self.orthogonality_residual()
        if res > tol:
            raise ValueError(f"columns are not orthogonal (residual {res:.3g})")
        total = float(np.sum(self.variances()))
        if abs(total - 1) > tol:
            raise ValueError(f"total variance is {total!r}, expected 1")

    def to_dict(self) -> dict:
        if self.field_kind == "complex":
            cols = [[[float(z.real), float(z.imag)] for z in col] for col in self.values.T]
        else:
            cols = [[float(x) for x in col] for col in self.values.T]
        return {"n": self.n, "K": self.atoms, "field_kind": self.field_kind, "seed": self.seed, "columns": cols}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> OrthogonalSystem:
        cols = np.asarray(d["columns"], dtype=float)
        if d["field_kind"] == "complex":
            cols = cols[..., 0] + 1j * cols[..., 1]
        values = cols.T if cols.size else np.zeros((int(d["K"]), int(d["n"])))
        if values.shape != (int(d["K"]), int(d["n"])):
            raise ValueError("column data does not match n and K")
        return cls(values, d.get("seed"))


@dataclass
class PartialSumPath:
    """Per-atom partial sums ``sums[:, j] = S_j`` (``S_0 = 0``) and running maxima."""

    sums: np.ndarray
    running_max: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.running_max = np.max(np.abs(self.sums[:, 1:]) ** 2, axis=1)


def partial_sums(system: OrthogonalSystem) -> PartialSumPath:
    X = system.values
    S = np.zeros((X.shape[0], X.shape[1] + 1), dtype=X.dtype)
    np.cumsum(X, axis=1, out=S[:, 1:])
    return PartialSumPath(S)


def expected_running_max(system: OrthogonalSystem) -> float:
    """E max_{1<=j<=n} |S_j|^2 as an exact average over atoms."""
    return float(np.mean(partial_sums(system).running_max))


def orthogonalize(X: np.ndarray, normalize: bool = False) -> np.ndarray:
    """Gram-Schmidt on the columns of X with a second re-orthogonalization pass.

    Without ``normalize`` the columns keep the length of their residuals, so
    the variance allocation of a nearly orthogonal input is preserved.
    """
    Q = np.array(X, dtype=np.result_type(X, float), copy=True)
    norms = np.zeros(Q.shape[1])
    for j in range(Q.shape[1]):
        for _ in range(2):
            if j:
                prev = Q[:, :j]
                coef = prev.conj().T @ Q[:, j]
                nz = norms[:j] > 0
                Q[:, j] -= prev[:, nz] @ (coef[nz] / norms[:j][nz])
        nj = float(np.vdot(Q[:, j], Q[:, j]).real)
        if normalize and nj > 0:
            Q[:, j] /= np.sqrt(nj)
            nj = 1.0
        norms[j] = nj
    return Q


def _normalize_total(X: np.ndarray) -> np.ndarray:
    total = np.sum(np.abs(X) ** 2) / X.shape[0]
    if total == 0:
        raise ValueError("system has zero total variance")
    return X / np.sqrt(total)


def _standard_normal(rng: np.random.Generator, shape: tuple[int, int], field_kind: str) -> np.ndarray:
    if field_kind == "complex":
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    if field_kind != "real":
        raise ValueError(f"unknown field kind {field_kind!r}")
    return rng.standard_normal(shape)


def make_random_system(n: int, K: int, seed: int, field_kind: str = "real") -> OrthogonalSystem:
    """Seeded random system: orthonormalized Gaussian columns with a random variance split."""
    if not 1 <= n <= K:
        raise ValueError(f"need K >= n >= 1, got n={n}, K={K}")
    rng = np.random.default_rng(seed)
    for _ in range(10):
        Y = _standard_normal(rng, (K, n), field_kind)
        Q = orthogonalize(Y, normalize=False)
        if np.all(np.sum(np.abs(Q) ** 2, axis=0) > 1e-12 * np.sum(np.abs(Y) ** 2, axis=0)):
            break
    else:
        raise ValueError("could not draw a full-rank system in 10 attempts")
    Q = orthogonalize(Q, normalize=True)
    weights = rng.dirichlet(np.ones(n))
    # column norm^2 / K is the variance; unit-norm columns have variance 1/K
    return OrthogonalSystem(Q * np.sqrt(K * weights), seed)


def project_system(X: np.ndarray) -> np.ndarray:
    """Nearest-in-spirit feasible point: orthogonalize columns, rescale to unit total variance."""
    return _normalize_total(orthogonalize(X))


def _ascent_direction(X: np.ndarray) -> np.ndarray:
    # gradient of mean_w |S_{j*(w)}(w)|^2 with the argmax frozen
    K, n = X.shape
    S = np.cumsum(X, axis=1)
    jstar = np.argmax(np.abs(S) ** 2, axis=1)
    mask = np.arange(n)[None, :] <= jstar[:, None]
    return 2.0 * mask * S[np.arange(K), jstar][:, None] / K


def _residual(X: np.ndarray) -> float:
    g = X.T @ X.conj() / X.shape[0]
    return float(np.max(np.abs(g - np.diag(np.diag(g))), initial=0.0))


def _ascend(n: int, K: int, iters: int, rng: np.random.Generator, field_kind: str) -> tuple[float, np.ndarray]:
    X = project_system(_standard_normal(rng, (K, n), field_kind))
    J = float(np.mean(np.max(np.abs(np.cumsum(X, axis=1)) ** 2, axis=1)))
    eta, delta = 0.5, 0.3

    def objective(Y: np.ndarray) -> float:
        return float(np.mean(np.max(np.abs(np.cumsum(Y, axis=1)) ** 2, axis=1)))

    for _ in range(iters):
        Y = project_system(X + eta * _ascent_direction(X))
        if _residual(Y) <= ORTHO_TOL and (J2 := objective(Y)) > J:
            X, J = Y, J2
            eta = min(eta * 1.3, 4.0)
        else:
            eta = max(eta * 0.5, 1e-12)
        P = np.zeros_like(X)
        P[rng.integers(K), rng.integers(n)] = delta * _standard_normal(rng, (1, 1), field_kind)[0, 0]
        Y = project_system(X + P)
        if _residual(Y) <= ORTHO_TOL and (J2 := objective(Y)) > J:
            X, J = Y, J2
            delta = min(delta * 1.5, 1.0)
        else:
            delta = max(delta * 0.9, 1e-6)
    return J, X


def _thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("MRBOUND_THREADS", "1")))
    except ValueError:
        return 1


def adversarial_lower_bound(
    n: int,
    K: int | None = None,
    restarts: int = 20,
    iters: int = 300,
    seed: int = 0,
    field_kind: str = "real",
    threads: int | None = None,
) -> tuple[float, OrthogonalSystem]:
    """Largest E max|S_j|^2 found by projected ascent over seeded restarts.

    Each restart alternates a gradient step and a single-entry random
    perturbation, re-projecting onto orthogonal unit-variance systems after
    both.  Restarts run on up to ``threads`` workers (``MRBOUND_THREADS`` by
    default); the result does not depend on scheduling.
    """
    K = 4 * n if K is None else K
    if not 1 <= n <= K:
        raise ValueError(f"need K >= n >= 1, got n={n}, K={K}")
    if restarts < 1 or iters < 1:
        raise ValueError("restarts and iters must be positive")
    if n == 1:
        sys1 = OrthogonalSystem(np.ones((K, 1), dtype=complex if field_kind == "complex" else float), seed)
        return 1.0, sys1

    def run(r: int) -> tuple[float, np.ndarray]:
        return _ascend(n, K, iters, np.random.default_rng([seed, r]), field_kind)

    workers = min(threads or _thread_cap(), restarts)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, range(restarts)))
    else:
        results = [run(r) for r in range(restarts)]
    best_r = max(range(restarts), key=lambda r: (results[r][0], -r))
    witness = OrthogonalSystem(results[best_r][1], seed)
    return expected_running_max(witness), witness


def pointwise_lemma_gap(a: np.ndarray, b: np.ndarray, c: np.ndarray, d: np.ndarray) -> np.ndarray:
    """``|a|^2+|b|^2+|c|^2+|d|^2 - min(|a+b|^2, |c+d|^2)``; never negative in exact arithmetic."""
    lhs = np.minimum(np.abs(a + b) ** 2, np.abs(c + d) ** 2)
    return np.abs(a) ** 2 + np.abs(b) ** 2 + np.abs(c) ** 2 + np.abs(d) ** 2 - lhs


@dataclass
class DecompositionStats:
    """Block quantities of the composition argument, as expectations per block.

    Arrays are indexed by block ``j``; ``v_sq``/``w_sq`` have an extra axis
    over the interior offset ``r = 1..l-1``.
    """

    n_blocks: int
    m: int
    l: int
    a_sq: np.ndarray
    b_sq: np.ndarray
    c_sq: np.ndarray
    d_sq: np.ndarray
    p_sq: np.ndarray
    q_sq: np.ndarray
    v_sq: np.ndarray
    w_sq: np.ndarray

    @property
    def block_size(self) -> int:
        return 2 * self.m + self.l


@dataclass
class DecompositionReport:
    stats: DecompositionStats
    lhs: float
    mid: float
    rhs: float
    theorem_rhs: float
    full_max: float
    composed_bound: float
    pointwise_violations: int
    termwise_ok: bool
    tol: float

    @property
    def chain_holds(self) -> bool:
        t = self.tol
        return (
            self.lhs <= self.mid + t
            and self.mid <= self.rhs + t
            and self.rhs <= self.theorem_rhs + t
            and self.pointwise_violations == 0
            and self.termwise_ok
        )

    @property
    def theorem_holds(self) -> bool:
        return self.full_max <= self.composed_bound + self.tol

    def to_dict(self) -> dict:
        s = self.stats
        return {
            "n_blocks": s.n_blocks,
            "m": s.m,
            "l": s.l,
            "lhs": self.lhs,
            "mid": self.mid,
            "rhs": self.rhs,
            "theorem_rhs": self.theorem_rhs,
            "full_max": self.full_max,
            "composed_bound": self.composed_bound,
            "pointwise_violations": self.pointwise_violations,
            "termwise_ok": self.termwise_ok,
            "chain_holds": self.chain_holds,
            "theorem_holds": self.theorem_holds,
            "blocks": {
                "A_sq": s.a_sq.tolist(),
                "B_sq": s.b_sq.tolist(),
                "C_sq": s.c_sq.tolist(),
                "D_sq": s.d_sq.tolist(),
                "P_sq": s.p_sq.tolist(),
                "Q_sq": s.q_sq.tolist(),
                "V_sq": s.v_sq.tolist(),
                "W_sq": s.w_sq.tolist(),
            },
        }


def _certified_hi(n: int) -> float:
    from .certifier import best_bound

    return best_bound(n).final_bound.hi


def verify_decomposition(
    system: OrthogonalSystem,
    n_blocks: int,
    m: int,
    l: int,
    bound: Callable[[int], float] = _certified_hi,
    tol: float = 1e-9,
) -> DecompositionReport:
    """Evaluate the block decomposition bound chain LHS <= MID <= RHS on a system.

    LHS = E max_i min_j |S_i - S_{pj}|^2, MID = E sum_j (A_j^2 + B_j^2 + C_j^2 + D_j^2)
    and RHS weights each block's variance mass by the certified bounds
    ``bound(m)`` and ``bound(l - 1)``.
    """
    if n_blocks < 1 or m < 1 or l < 2:
        raise ValueError("need n_blocks >= 1, m >= 1, l >= 2")
    p = 2 * m + l
    N = n_blocks * p
    if system.n != N:
        raise ValueError(f"system has {system.n} variables, block structure needs {N}")
    S = partial_sums(system).sums
    var = system.variances()  # var[k - 1] = E|X_k|^2

    anchors = S[:, ::p]  # S_{pj}, j = 0..n_blocks
    dist = np.abs(S[:, 1:, None] - anchors[:, None, :]) ** 2
    nearest = dist.min(axis=2)  # per atom, per i = 1..N
    lhs = float(np.mean(nearest.max(axis=1)))

    def sq_max(block: np.ndarray) -> np.ndarray:
        return np.max(np.abs(block) ** 2, axis=1)

    per_atom_sum = np.zeros(system.atoms)
    fields: dict[str, list] = {k: [] for k in "abcdpqvw"}
    violations = 0
    termwise_ok = True
    dm, dl = bound(m), bound(l - 1)
    rhs = 0.0
    for j in range(n_blocks):
        base = p * j
        s0, sm, sml, s1 = S[:, base], S[:, base + m], S[:, base + m + l], S[:, base + p]
        a2 = sq_max(S[:, base : base + m + 1] - s0[:, None])
        b2 = sq_max(s1[:, None] - S[:, base + m + l : base + p + 1])
        mid_idx = slice(base + m + 1, base + m + l)
        c2 = sq_max(S[:, mid_idx] - sm[:, None])
        d2 = sq_max(sml[:, None] - S[:, mid_idx])
        block_sum = a2 + b2 + c2 + d2
        per_atom_sum += block_sum

        for name, arr in zip("abcd", (a2, b2, c2, d2)):
            fields[name].append(float(np.mean(arr)))
        fields["p"].append(float(np.mean(np.abs(sm - s0) ** 2)))
        fields["q"].append(float(np.mean(np.abs(s1 - sml) ** 2)))
        fields["v"].append([float(np.mean(np.abs(S[:, base + m + r] - sm) ** 2)) for r in range(1, l)])
        fields["w"].append([float(np.mean(np.abs(sml - S[:, base + m + r]) ** 2)) for r in range(1, l)])

        # nearest-anchor distance of every i in the block against this block's sum
        block_i = np.arange(base + 1, base + p + 1)
        local = np.minimum(
            np.abs(S[:, block_i] - s0[:, None]) ** 2,
            np.abs(s1[:, None] - S[:, block_i]) ** 2,
        )
        slack = tol * (1 + block_sum)
        violations += int(np.count_nonzero(local.max(axis=1) > block_sum + slack))

        mass_a = float(np.sum(var[base : base + m]))
        mass_b = float(np.sum(var[base + m + l : base + p]))
        ends = float(var[base + m] + var[base + m + l - 1])
        interior = float(np.sum(var[base + m + 1 : base + m + l - 1]))
        termwise_ok &= fields["a"][-1] <= dm * mass_a + tol
        termwise_ok &= fields["b"][-1] <= dm * mass_b + tol
        termwise_ok &= fields["c"][-1] + fields["d"][-1] <= dl * (ends + 2 * interior) + tol
        rhs += dm * (mass_a + mass_b) + dl * (ends + 2 * interior)

    mid = float(np.mean(per_atom_sum))
    factor = dm if l == 2 else max(dm, 2 * dl)
    theorem_rhs = factor * float(np.sum(var))
    full_max = expected_running_max(system)
    composed = (np.sqrt(bound(n_blocks)) + np.sqrt(factor)) ** 2
    stats = DecompositionStats(
        n_blocks,
        m,
        l,
        *(np.asarray(fields[k]) for k in "abcdpqvw"),
    )
    return DecompositionReport(
        stats, lhs, mid, rhs, theorem_rhs, full_max, float(composed), violations, bool(termwise_ok), tol
    )

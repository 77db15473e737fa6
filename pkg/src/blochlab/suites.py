"""Built-in verification suites and the golden classification corpus."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bloch import DIVERGENT, BlochParams, bloch_norm, check_growth_bound, check_holder
from .operators import (
    Regime,
    SymbolPair,
    judge_profile,
    criterion_values,
    phi_margin,
    psi_seminorm_density,
)
from .sampling import SampleBudget, Thresholds, shell_profile
from .symbolic import Const, ExprFunction, unparse
from .testfn import FamilyKind, parallel_map, verify_family_norms

SUITES = ("lemma1", "lemma3", "families", "remark1")

CORPUS_SEED = 2024
CORPUS_SIZE = 50
NORM_BUDGET = SampleBudget(base_count=20_000, shells=12, refine_rounds=2, seed=42)


@dataclass
class SuiteRow:
    label: str
    checked: int
    violations: int
    max_ratio: float
    note: str = ""


@dataclass
class SuiteResult:
    name: str
    rows: list[SuiteRow] = field(default_factory=list)
    evidence: dict = field(default_factory=dict)

    @property
    def checked(self) -> int:
        return sum(r.checked for r in self.rows)

    @property
    def violations(self) -> int:
        return sum(r.violations for r in self.rows)

    @property
    def max_ratio(self) -> float:
        return max((r.max_ratio for r in self.rows), default=0.0)

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.checked > 0


# ---------------------------------------------------------------------------
# Random corpora


def monomials(n: int, degree: int) -> list[tuple[int, ...]]:
    return [e for e in itertools.product(range(degree + 1), repeat=n) if sum(e) <= degree]


def disk_uniform(rng: np.random.Generator, size) -> np.ndarray:
    r = np.sqrt(rng.uniform(size=size))
    return r * np.exp(2j * np.pi * rng.uniform(size=size))


def random_polynomial(rng: np.random.Generator, n: int, max_degree: int = 4) -> str:
    """Dense polynomial of random degree <= max_degree, coefficients in the unit disk."""
    degree = int(rng.integers(1, max_degree + 1))
    exps = monomials(n, degree)
    coeffs = disk_uniform(rng, len(exps))
    terms = []
    for c, e in zip(coeffs, exps):
        factors = [unparse(Const(complex(c)))]
        factors += [f"z{k + 1}" if d == 1 else f"z{k + 1}^{d}" for k, d in enumerate(e) if d]
        terms.append("*".join(factors))
    return " + ".join(terms)


def polynomial_corpus(n: int, count: int = CORPUS_SIZE, seed: int = CORPUS_SEED) -> list[str]:
    rng = np.random.default_rng([seed, n])
    return [random_polynomial(rng, n) for _ in range(count)]


def random_points(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    """Half area-uniform, half with log-uniform boundary margin in [1e-6, 1]."""
    half = count // 2
    Z = disk_uniform(rng, (count, n))
    margin = 10.0 ** rng.uniform(-6, 0, size=(count - half, n))
    Z[half:] = (1 - margin) * np.exp(2j * np.pi * rng.uniform(size=(count - half, n)))
    return Z


def random_pairs(rng: np.random.Generator, count: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Independent pairs plus nearby pairs (|z - w| down to ~1e-8)."""
    Z = random_points(rng, count, n)
    W = random_points(rng, count, n)
    near = count // 2
    step = 10.0 ** rng.uniform(-8, -1, size=(near, n)) * np.exp(2j * np.pi * rng.uniform(size=(near, n)))
    cand = Z[:near] + step
    ok = np.abs(cand) < 1
    W[:near] = np.where(ok, cand, Z[:near] * 0.5)
    return Z, W


# ---------------------------------------------------------------------------
# Inequality suites


def lemma1_suite(
    ns: Sequence[int] = (1, 2),
    ps: Sequence[float] = (0.5, 1.0, 2.0),
    count: int = CORPUS_SIZE,
    points: int = 10_000,
    budget: SampleBudget = NORM_BUDGET,
    seed: int = CORPUS_SEED,
) -> SuiteResult:
    res = SuiteResult("lemma1")
    for n in ns:
        corpus = polynomial_corpus(n, count, seed)
        for p in ps:
            rng = np.random.default_rng([seed, n, int(round(p * 1000)), 1])
            Z = random_points(rng, points, n)

            def run(text, p=p, n=n, Z=Z):
                f = ExprFunction.from_string(text, n)
                return check_growth_bound(f, p, Z, norm=bloch_norm(f, p, budget))

            reps = parallel_map(run, corpus)
            res.rows.append(
                SuiteRow(
                    f"n={n} p={p:g}",
                    sum(r.checked for r in reps),
                    sum(r.violations for r in reps),
                    max(r.max_ratio for r in reps),
                    note=f"{sum(r.skipped is not None for r in reps)} skipped",
                )
            )
    return res


def lemma3_suite(
    ns: Sequence[int] = (1, 2),
    ps: Sequence[float] = (0.0, 0.25, 0.5, 0.9),
    count: int = CORPUS_SIZE,
    pairs: int = 10_000,
    budget: SampleBudget = NORM_BUDGET,
    seed: int = CORPUS_SEED,
) -> SuiteResult:
    bad = [p for p in ps if not 0 <= p < 1]
    if bad:
        raise ValueError(f"lemma3 requires p < 1 (and p >= 0), got {bad}")
    res = SuiteResult("lemma3")
    for n in ns:
        corpus = polynomial_corpus(n, count, seed)
        for p in ps:
            rng = np.random.default_rng([seed, n, int(round(p * 1000)), 3])
            Z, W = random_pairs(rng, pairs, n)

            def run(text, p=p, n=n, Z=Z, W=W):
                f = ExprFunction.from_string(text, n)
                return check_holder(f, p, (Z, W), norm=bloch_norm(f, p, budget))

            reps = parallel_map(run, corpus)
            res.rows.append(
                SuiteRow(
                    f"n={n} p={p:g}",
                    sum(r.checked for r in reps),
                    sum(r.violations for r in reps),
                    max(r.max_ratio for r in reps),
                )
            )
    return res


ACCEPTANCE_FAMILIES = (FamilyKind.FW_P1, FamilyKind.GW_P1, FamilyKind.FW_PLT1, FamilyKind.SEQ_T3)


def _family_ratio(row) -> float:
    """Measured / allowed, so that a value above 1 is a violation."""
    if row.norm is DIVERGENT:
        return math.inf
    if row.kind is FamilyKind.FW_PLT1:
        return abs(row.seminorm - 1.0) / 1e-3
    if row.bound is not None:
        return row.norm / row.bound
    return 0.0


def families_suite(kinds: Sequence[FamilyKind] = tuple(FamilyKind)) -> SuiteResult:
    rep = verify_family_norms(kinds)
    res = SuiteResult("families", evidence={"constants": rep.constants})
    for kind in kinds:
        for p in sorted({r.p for r in rep.rows if r.kind is kind}):
            rows = [r for r in rep.rows if r.kind is kind and r.p == p]
            ratios = [_family_ratio(r) for r in rows]
            res.rows.append(
                SuiteRow(f"{kind.value} p={p:g}", len(rows), sum(not r.ok for r in rows), max(ratios), rows[0].check)
            )
    return res


# ---------------------------------------------------------------------------
# Weight-seminorm implication for p >= 1


REMARK1_CORPUS = (
    ("1", ("z1",), 1),
    ("z1", ("z1^2",), 1),
    ("0.5*z1 + 0.25", ("(z1 + 1)/2",), 1),
    ("z1*z2", ("z1", "z2"), 2),
    ("1 + 0.5*z2", ("z1*z2", "z2/2"), 2),
    ("ln(4/(1 - 0.5*z1))", ("z1/2",), 1),
)


def remark1_suite(
    ps: Sequence[float] = (1.0, 2.0),
    q: float = 1.0,
    points: int = 10_000,
    seed: int = CORPUS_SEED,
    budget: SampleBudget = NORM_BUDGET,
    thresholds: Thresholds = Thresholds(),
) -> SuiteResult:
    """Pointwise ``S(z) <= A(z) / (n ln 4)`` (p = 1) and ``S(z) <= A(z) / n`` (p > 1).

    ``S`` is the weight seminorm density.  The boundary profile of ``S``
    against the image margin is attached as evidence only.
    """
    bad = [p for p in ps if Regime.of(p) is Regime.P_LT_1]
    if bad:
        raise ValueError(f"remark1 requires p >= 1, got {bad}")
    res = SuiteResult("remark1", evidence={"profiles": {}})
    for i, (psi, phi, n) in enumerate(REMARK1_CORPUS):
        pair = SymbolPair.build(psi, list(phi), n)
        rng = np.random.default_rng([seed, i, 11])
        Z = random_points(rng, points, n)
        for p in ps:
            params = BlochParams(p, q, n)
            A = criterion_values(pair, params, Z).A
            S = psi_seminorm_density(pair, params)(Z)
            c = n * math.log(4.0) if Regime.of(p) is Regime.P_EQ_1 else float(n)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(S == 0, 0.0, c * S / A)
            res.rows.append(
                SuiteRow(
                    f"psi={psi} phi={list(phi)} p={p:g}",
                    int(S.size),
                    int((ratio > 1 + 1e-12).sum()),
                    float(ratio.max()),
                )
            )
        prof = shell_profile(psi_seminorm_density(pair, BlochParams(1.0, q, n)), phi_margin(pair), n, budget)
        res.evidence["profiles"][f"psi={psi} phi={list(phi)}"] = judge_profile(prof, thresholds)
    return res


def run_suite(name: str, ps: Optional[Sequence[float]] = None) -> SuiteResult:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    kw = {} if ps is None else {"ps": tuple(ps)}
    if name == "lemma1":
        return lemma1_suite(**kw)
    if name == "lemma3":
        return lemma3_suite(**kw)
    if name == "remark1":
        return remark1_suite(**kw)
    if ps is not None:
        raise ValueError("the families suite fixes its own p values")
    return families_suite()


# ---------------------------------------------------------------------------
# Golden classification corpus


@dataclass(frozen=True)
class GoldenCase:
    label: str
    psi: str
    phi: tuple[str, ...]
    p: float
    q: float
    n: int
    bounded: str
    compact: str

    def problem(self) -> dict:
        return {"n": self.n, "p": self.p, "q": self.q, "psi": self.psi, "phi": list(self.phi)}


GOLDEN = (
    GoldenCase("identity", "1", ("z1",), 1.0, 1.0, 1, "Bounded", "NotCompact"),
    GoldenCase("identity q=1/2", "1", ("z1",), 1.0, 0.5, 1, "Unbounded", "NotCompact"),
    GoldenCase("half-contraction", "1", ("z1/2",), 1.0, 1.0, 1, "Bounded", "Compact"),
    GoldenCase("square", "1", ("z1^2",), 1.0, 1.0, 1, "Bounded", "NotCompact"),
    GoldenCase("boundary-touching", "1", ("(z1+1)/2",), 1.0, 1.0, 1, "Bounded", "NotCompact"),
    GoldenCase("identity p=1/2 n=1", "1", ("z1",), 0.5, 1.0, 1, "Bounded", "Compact"),
    GoldenCase("identity p=1/2 n=2", "1", ("z1", "z2"), 0.5, 1.0, 2, "Bounded", "NotCompact"),
)

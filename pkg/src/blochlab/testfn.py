"""Explicit test-function families and operator-norm lower bounds.

Every family depends on one coordinate ``z_l`` (SEQ_C2 also on ``z_1``) and a
parameter ``w`` in the unit disk; write ``c = conj(w)`` and
``s = 1 - |w|^2``.

=========  ==============================================================
FW_P1      z / (1 - c z)
GW_P1      ln(4 / (1 - c z))
FW_PLT1    integral_0^z (1 - (c^2/|w|^2) t^2)^(-p) dt          (w != 0)
FW_PGT1    (1/c) (s (1-cz)^(-p) - (1-cz)^(1-p))                 (w != 0)
GW_PGT1    p (1-cz)^(1-p) - (p-1) s (1-cz)^(-p)
SEQ_C1     s^2 (1-cz)^(-p-1) - s (1-cz)^(-p)
SEQ_C2     z_l (s / (1 - c z_1))^p
SEQ_C3     ln(4/s)^(-1) ln(4 / (1 - c z))^2
SEQ_PGT1   (p+1) s (1-cz)^(-p) - p s^2 (1-cz)^(-p-1)
SEQ_T3     s (1-cz)^(-p)
=========  ==============================================================
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .bloch import DIVERGENT, BlochParams, NormReport, bloch_norm, growth_factor, growth_coefficient
from .operators import Classification, ComposedFunction, Regime, SymbolPair
from .sampling import SampleBudget
from .symbolic import Jet, as_points

GL_ORDER = 32
GL_PANELS = 4
CHUNK = 4096


def max_workers() -> int:
    env = os.environ.get("BLOCHLAB_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def parallel_map(fn, items):
    items = list(items)
    workers = min(max_workers(), len(items)) or 1
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as ex:
        return list(ex.map(fn, items))


class FamilyKind(str, Enum):
    FW_P1 = "FW_P1"
    GW_P1 = "GW_P1"
    FW_PLT1 = "FW_PLT1"
    FW_PGT1 = "FW_PGT1"
    GW_PGT1 = "GW_PGT1"
    SEQ_C1 = "SEQ_C1"
    SEQ_C2 = "SEQ_C2"
    SEQ_C3 = "SEQ_C3"
    SEQ_PGT1 = "SEQ_PGT1"
    SEQ_T3 = "SEQ_T3"


_NEEDS_NONZERO_W = {FamilyKind.FW_PLT1, FamilyKind.FW_PGT1}

APPLICABLE = {
    Regime.P_EQ_1: (FamilyKind.FW_P1, FamilyKind.GW_P1, FamilyKind.SEQ_C1, FamilyKind.SEQ_C2, FamilyKind.SEQ_C3),
    Regime.P_LT_1: (FamilyKind.FW_PLT1, FamilyKind.SEQ_T3),
    Regime.P_GT_1: (
        FamilyKind.FW_PGT1,
        FamilyKind.GW_PGT1,
        FamilyKind.SEQ_C1,
        FamilyKind.SEQ_C2,
        FamilyKind.SEQ_PGT1,
    ),
}


@dataclass(frozen=True)
class TestFamily:
    kind: FamilyKind
    w: complex = 0j
    p: float = 1.0
    l: int = 1

    __test__ = False  # not a pytest class

    def __post_init__(self):
        object.__setattr__(self, "kind", FamilyKind(self.kind))
        object.__setattr__(self, "w", complex(self.w))
        if abs(self.w) >= 1:
            raise ValueError(f"parameter w must satisfy |w| < 1, got {self.w}")
        if self.kind in _NEEDS_NONZERO_W and self.w == 0:
            raise ValueError(f"{self.kind.value} requires w != 0")
        if self.l < 1:
            raise ValueError("coordinate l must be >= 1")
        if self.p < 0:
            raise ValueError("p must be >= 0")


# ---------------------------------------------------------------------------
# Composite Gauss-Legendre along [0, z]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)


def segment_nodes(panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of composite Gauss-Legendre on ``[0, 1]``."""
    edges = np.linspace(0.0, 1.0, panels + 1)
    half = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    t = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    wt = (half[:, None] * _GL_W[None, :]).ravel()
    return t, wt


def integrate_segment(integrand, z: np.ndarray, panels: int = GL_PANELS) -> np.ndarray:
    """``integral_0^z integrand(t) dt`` along the straight segment, per entry of ``z``.

    Panels double for entries with ``|z| > 0.9``.
    """
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    far = np.abs(z) > 0.9
    for mask, pan in ((~far, panels), (far, 2 * panels)):
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            continue
        t, wt = segment_nodes(pan)
        for start in range(0, idx.size, CHUNK):
            sel = idx[start:start + CHUNK]
            zz = z[sel]
            out[sel] = zz * (integrand(zz[:, None] * t[None, :]) @ wt)
    return out


# ---------------------------------------------------------------------------
# Families


def plt1_integrand(w: complex, p: float):
    rot = w.conjugate() ** 2 / abs(w) ** 2

    def integrand(t):
        return np.exp(-p * np.log(1.0 - rot * t * t))

    return integrand


def _value_and_derivative(spec: TestFamily, x: np.ndarray, value: bool = True):
    """Closed forms in the active coordinate ``x = z_l``.

    With ``value=False`` the FW_PLT1 quadrature is skipped and ``None`` is
    returned in place of the value.
    """
    w, p, k = spec.w, spec.p, spec.kind
    c = w.conjugate()
    s = 1.0 - abs(w) ** 2
    u = 1.0 - c * x
    if k is FamilyKind.FW_P1:
        return x / u, 1.0 / u**2
    if k is FamilyKind.GW_P1:
        return np.log(4.0 / u), c / u
    if k is FamilyKind.FW_PLT1:
        integrand = plt1_integrand(w, p)
        return (integrate_segment(integrand, x) if value else None), integrand(x)
    lu = np.log(u)

    def pw(a):  # u**a on the principal branch
        return np.exp(a * lu)

    if k is FamilyKind.FW_PGT1:
        val = (s * pw(-p) - pw(1 - p)) / c
        der = p * s * pw(-p - 1) - (p - 1) * pw(-p)
        return val, der
    if k is FamilyKind.GW_PGT1:
        val = p * pw(1 - p) - (p - 1) * s * pw(-p)
        der = p * (p - 1) * c * pw(-p) - (p - 1) * p * s * c * pw(-p - 1)
        return val, der
    if k is FamilyKind.SEQ_C1:
        val = s * s * pw(-p - 1) - s * pw(-p)
        der = (p + 1) * c * s * s * pw(-p - 2) - p * c * s * pw(-p - 1)
        return val, der
    if k is FamilyKind.SEQ_C3:
        L = math.log(4.0 / s)
        g = np.log(4.0) - lu
        return g * g / L, 2.0 * g * c / (u * L)
    if k is FamilyKind.SEQ_PGT1:
        val = (p + 1) * s * pw(-p) - p * s * s * pw(-p - 1)
        der = (p + 1) * p * c * s * pw(-p - 1) - p * (p + 1) * c * s * s * pw(-p - 2)
        return val, der
    if k is FamilyKind.SEQ_T3:
        return s * pw(-p), p * c * s * pw(-p - 1)
    raise ValueError(f"no closed form for {k}")


@dataclass(frozen=True)
class FamilyFunction:
    spec: TestFamily
    n: int

    def jet(self, z) -> Jet:
        return self._jet(z, value=True)

    def grad(self, z) -> np.ndarray:
        """Partials only (skips the quadrature of FW_PLT1)."""
        return self._jet(z, value=False).partials

    def _jet(self, z, value: bool) -> Jet:
        Z, single = as_points(z, self.n)
        sp = self.spec
        N = Z.shape[0]
        partials = np.zeros((N, self.n), dtype=complex)
        if sp.kind is FamilyKind.SEQ_C2:
            w, p = sp.w, sp.p
            c = w.conjugate()
            s = 1.0 - abs(w) ** 2
            u = 1.0 - c * Z[:, 0]
            g = np.exp(p * (math.log(s) - np.log(u)))  # (s/u)^p
            zl = Z[:, sp.l - 1]
            value = zl * g
            partials[:, sp.l - 1] += g
            partials[:, 0] += zl * p * g * c / u
        else:
            value, der = _value_and_derivative(sp, Z[:, sp.l - 1], value)
            value = np.full(N, np.nan + 0j) if value is None else np.asarray(value, dtype=complex)
            partials[:, sp.l - 1] = der
        if single:
            return Jet(value[0], partials[0])
        return Jet(value, partials)


def make_test_function(spec: TestFamily, n: int) -> FamilyFunction:
    if spec.l > n:
        raise ValueError(f"coordinate l={spec.l} exceeds n={n}")
    return FamilyFunction(spec, n)


# ---------------------------------------------------------------------------
# Grids and budgets


def polar_grid(radii: Iterable[float], angles: int = 8) -> list[complex]:
    return [r * complex(math.cos(t), math.sin(t)) for r in radii for t in 2 * math.pi * np.arange(angles) / angles]


VERIFY_GRID = polar_grid((0.2, 0.5, 0.8, 0.95))  # 32 points, |w| <= 0.95
NECESSITY_GRID = polar_grid((0.5, 0.9, 0.99, 0.999))


def budget_for(w: complex, budget: SampleBudget) -> SampleBudget:
    """Deepen the shells so features at margin ``1 - |w|`` sit well inside them."""
    depth = math.ceil(-math.log2(max(1.0 - abs(w), 1e-12))) + 8
    return replace(budget, shells=max(budget.shells, depth))


# ---------------------------------------------------------------------------
# Norm verification


@dataclass(frozen=True)
class FamilyNormRow:
    kind: FamilyKind
    p: float
    w: complex
    norm: object  # float or DIVERGENT
    seminorm: float
    bound: Optional[float]
    check: str  # what was asserted
    ok: bool


@dataclass
class FamilyNormReport:
    rows: list[FamilyNormRow] = field(default_factory=list)
    constants: dict[str, float] = field(default_factory=dict)

    @property
    def violations(self) -> list[FamilyNormRow]:
        return [r for r in self.rows if not r.ok]

    @property
    def passed(self) -> bool:
        return not self.violations


def family_bound(kind: FamilyKind, p: float, w: complex) -> Optional[float]:
    """Printed norm bound for a family member, where one is stated."""
    if kind is FamilyKind.FW_P1:
        return 4.0 / (1.0 - abs(w) ** 2)
    if kind is FamilyKind.GW_P1:
        return 2.0 + math.log(4.0)
    if kind is FamilyKind.SEQ_T3:
        return 1.0 + 2.0 ** (p + 1) * p
    return None


def _default_p(kind: FamilyKind) -> tuple[float, ...]:
    if kind in (FamilyKind.FW_P1, FamilyKind.GW_P1, FamilyKind.SEQ_C3):
        return (1.0,)
    if kind in (FamilyKind.FW_PLT1, FamilyKind.SEQ_T3):
        return (0.25, 0.5, 0.75)
    if kind in (FamilyKind.SEQ_C1, FamilyKind.SEQ_C2):
        return (1.0, 2.0)
    return (1.5, 2.0, 3.0)


VERIFY_BUDGET = SampleBudget(base_count=20_000, shells=12, refine_rounds=3, seed=42)


def verify_family_norms(
    kinds: Sequence[FamilyKind] = tuple(FamilyKind),
    grid: Sequence[complex] = VERIFY_GRID,
    ps: Optional[dict] = None,
    budget: SampleBudget = VERIFY_BUDGET,
    n: int = 1,
) -> FamilyNormReport:
    """Estimate the norm of every family member on the grid and check its bound.

    FW_P1, GW_P1, SEQ_T3: the printed bounds.  FW_PLT1: seminorm equal to 1
    within 1e-3.  Other families: finite norm on every member; the largest
    value is reported as the common constant.
    """
    jobs = []
    for kind in map(FamilyKind, kinds):
        for p in (ps or {}).get(kind, _default_p(kind)):
            for w in grid:
                if kind in _NEEDS_NONZERO_W and w == 0:
                    continue
                jobs.append((kind, p, w))

    def run(job):
        kind, p, w = job
        f = make_test_function(TestFamily(kind, w, p), n)
        rep = bloch_norm(f, p, budget_for(w, budget))
        semi = rep.seminorm.value
        bound = family_bound(kind, p, w)
        if not rep.finite:
            return FamilyNormRow(kind, p, w, DIVERGENT, semi, bound, "finite", False)
        if kind is FamilyKind.FW_PLT1:
            return FamilyNormRow(kind, p, w, rep.norm, semi, 1.0, "seminorm == 1 +- 1e-3", abs(semi - 1) <= 1e-3)
        if bound is not None:
            return FamilyNormRow(kind, p, w, rep.norm, semi, bound, "norm <= bound", rep.norm <= bound)
        return FamilyNormRow(kind, p, w, rep.norm, semi, None, "finite", True)

    report = FamilyNormReport(parallel_map(run, jobs))
    for r in report.rows:
        if r.norm is not DIVERGENT:
            key = f"{r.kind.value}(p={r.p:g})"
            report.constants[key] = max(report.constants.get(key, 0.0), r.norm)
    return report


# ---------------------------------------------------------------------------
# Operator-norm lower bounds


@dataclass(frozen=True)
class RatioRow:
    kind: FamilyKind
    l: int
    w: complex
    norm_f: float
    norm_Wf: object  # float or DIVERGENT
    ratio: float


@dataclass
class LowerBound:
    value: float  # math.inf when some W f has divergent q-norm
    rows: list[RatioRow] = field(default_factory=list)
    skipped: int = 0

    def best_by_family(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for r in self.rows:
            out[r.kind.value] = max(out.get(r.kind.value, 0.0), r.ratio)
        return out


LOWER_BOUND_BUDGET = SampleBudget(base_count=10_000, shells=12, refine_rounds=2, seed=42)


def lower_bound_opnorm(
    pair: SymbolPair,
    params: BlochParams,
    kinds: Optional[Sequence[FamilyKind]] = None,
    grid: Sequence[complex] = NECESSITY_GRID,
    budget: SampleBudget = LOWER_BOUND_BUDGET,
) -> LowerBound:
    """``max ||W f||_q / ||f||_p`` over the test families and parameter grid."""
    regime = Regime.of(params.p)
    kinds = tuple(map(FamilyKind, kinds or APPLICABLE[regime]))
    jobs = []
    for kind in kinds:
        for l in range(1, pair.n + 1):
            for w in grid:
                if kind in _NEEDS_NONZERO_W and w == 0:
                    continue
                jobs.append((kind, l, w))

    def run(job):
        kind, l, w = job
        f = make_test_function(TestFamily(kind, w, params.p, l), pair.n)
        b = budget_for(w, budget)
        nf = bloch_norm(f, params.p, b)
        if not nf.finite or nf.norm == 0:
            return None
        nW = bloch_norm(ComposedFunction(pair, f), params.q, b)
        ratio = math.inf if not nW.finite else nW.norm / nf.norm
        return RatioRow(kind, l, w, nf.norm, nW.norm, ratio)

    results = parallel_map(run, jobs)
    rows = [r for r in results if r is not None]
    value = max((r.ratio for r in rows), default=0.0)
    return LowerBound(value, rows, skipped=len(results) - len(rows))


def sufficiency_bound(
    pair: SymbolPair,
    params: BlochParams,
    classification: Classification,
    psi_norm: float,
) -> float:
    """Upper bound on ``||W||`` implied by the criterion suprema.

    ``max(1, c_p) (sup A + sup B) + ||psi||_q C_p(phi(0))`` with ``c_p`` the
    growth-bound coefficient and ``C_p`` the pointwise growth factor.
    """
    c = growth_coefficient(params.p, pair.n)
    A = classification.sup_A.value
    B = classification.sup_B.value
    w0 = pair.image(np.zeros((1, pair.n), dtype=complex))[0]
    return max(1.0, c) * (A + B) + psi_norm * float(growth_factor(w0, params.p))

"""Weighted composition operators ``f -> psi * (f o phi)`` between p-Bloch spaces.

The two criterion functionals evaluated at ``z`` are

* ``A`` -- the psi-derivative term, ``sum_k |d psi/dz_k| (1-|z_k|^2)^q`` times
  ``sum_l ln(4/(1-|phi_l|^2))`` (p = 1), ``1`` (p < 1) or
  ``sum_l (1-|phi_l|^2)^(1-p)`` (p > 1);
* ``B`` -- the phi-derivative term,
  ``|psi| sum_{k,l} |d phi_l/dz_k| (1-|z_k|^2)^q / (1-|phi_l|^2)^p``
  (with exponent 1 in place of p when p = 1).

Boundedness is decided by whether both suprema are finite; compactness by
whether the functionals decay as ``phi(z)`` approaches the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .bloch import BlochParams, one_minus_abs2
from .sampling import (
    Divergence,
    SampleBudget,
    ShellSup,
    SupEstimate,
    Thresholds,
    estimate_sup,
    loglog_fit,
    sample_polydisk,
    shell_profile,
)
from .symbolic import (
    EvaluationError,
    Expr,
    HolomorphicFunction,
    Jet,
    as_points,
    eval_jet,
    max_index,
    parse,
    unparse,
    validate_self_map,
    SelfMapReport,
)

REGIME_EPS = 1e-12
# budget used to validate the self-map property when building a pair
VALIDATION_BUDGET = SampleBudget(base_count=20_000, shells=12, refine_rounds=0, seed=7)


class SelfMapViolation(EvaluationError):
    pass


class Regime(str, Enum):
    P_EQ_1 = "p=1"
    P_LT_1 = "p<1"
    P_GT_1 = "p>1"

    @classmethod
    def of(cls, p: float) -> "Regime":
        if abs(p - 1.0) <= REGIME_EPS:
            return cls.P_EQ_1
        return cls.P_LT_1 if p < 1.0 else cls.P_GT_1


class Boundedness(str, Enum):
    BOUNDED = "Bounded"
    UNBOUNDED = "Unbounded"
    INCONCLUSIVE = "Inconclusive"


class Compactness(str, Enum):
    COMPACT = "Compact"
    NOT_COMPACT = "NotCompact"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class SymbolPair:
    psi: Expr
    phi: tuple[Expr, ...]
    n: int
    self_map: SelfMapReport

    @classmethod
    def build(
        cls,
        psi: str | Expr,
        phi: Sequence[str | Expr],
        n: Optional[int] = None,
        samples=None,
    ) -> "SymbolPair":
        """Parse and validate; raises :class:`SelfMapViolation` if ``phi`` escapes."""
        n = len(phi) if n is None else n
        if len(phi) != n:
            raise ValueError(f"phi needs exactly n={n} components, got {len(phi)}")
        psi_e = parse(psi, n) if isinstance(psi, str) else psi
        phi_e = tuple(parse(e, n) if isinstance(e, str) else e for e in phi)
        for e in (psi_e, *phi_e):
            if max_index(e) > n:
                raise ValueError(f"{unparse(e)} uses a variable beyond n={n}")
        if samples is None:
            samples = sample_polydisk(n, VALIDATION_BUDGET)
        report = validate_self_map(phi_e, samples)
        if not report.ok:
            raise SelfMapViolation(
                f"phi is not a self-map of the polydisk: max |phi_l| = {report.max_modulus:.6g}",
                report.witness,
            )
        return cls(psi_e, phi_e, n, report)

    def jets(self, Z: np.ndarray) -> tuple[Jet, list[Jet]]:
        """Jets of psi and of every phi_l; re-checks that phi(Z) is interior."""
        psi = eval_jet(self.psi, Z)
        phis = [eval_jet(e, Z) for e in self.phi]
        W = np.column_stack([j.value for j in phis])
        out = np.abs(W) >= 1.0
        if out.any():
            i = int(np.flatnonzero(out.any(axis=1))[0])
            raise SelfMapViolation("phi(z) left the polydisk", Z[i])
        return psi, phis

    def image(self, Z: np.ndarray) -> np.ndarray:
        return np.column_stack([eval_jet(e, Z).value for e in self.phi])


def apply_wco(pair: SymbolPair, f: HolomorphicFunction, z) -> Jet:
    """Jet of ``psi * (f o phi)`` at ``z`` by the chain rule.

    ``d/dz_k = (d psi/dz_k) f(phi) + psi * sum_l (df/dw_l)(phi) (d phi_l/dz_k)``.
    """
    Z, single = as_points(z, pair.n)
    psi, phis = pair.jets(Z)
    W = np.column_stack([j.value for j in phis])
    fj = f.jet(W)
    Dphi = np.stack([j.partials for j in phis], axis=1)  # (N, l, k)
    inner = np.einsum("nl,nlk->nk", fj.partials, Dphi)
    value = psi.value * fj.value
    partials = psi.partials * fj.value[:, None] + psi.value[:, None] * inner
    if single:
        return Jet(value[0], partials[0])
    return Jet(value, partials)


@dataclass(frozen=True)
class ComposedFunction:
    """``W_{psi,phi} f`` as a :class:`HolomorphicFunction`."""

    pair: SymbolPair
    f: HolomorphicFunction

    @property
    def n(self) -> int:
        return self.pair.n

    def jet(self, z) -> Jet:
        return apply_wco(self.pair, self.f, z)

    def grad(self, z) -> np.ndarray:
        """Partials only; the values of ``f`` are skipped when ``grad psi = 0``."""
        fgrad = getattr(self.f, "grad", None)
        Z, _ = as_points(z, self.pair.n)
        psi, phis = self.pair.jets(Z)
        if fgrad is None or np.any(psi.partials != 0):
            return apply_wco(self.pair, self.f, Z).partials
        W = np.column_stack([j.value for j in phis])
        Dphi = np.stack([j.partials for j in phis], axis=1)
        return psi.value[:, None] * np.einsum("nl,nlk->nk", fgrad(W), Dphi)


@dataclass(frozen=True)
class CriterionValues:
    A: np.ndarray
    B: np.ndarray
    per_l_B: np.ndarray  # (N, n) for a batch, (n,) for one point


def _criterion_arrays(pair: SymbolPair, params: BlochParams, Z: np.ndarray):
    psi, phis = pair.jets(Z)
    W = np.column_stack([j.value for j in phis])
    s = one_minus_abs2(W)  # (N, l)
    t = one_minus_abs2(Z) ** params.q  # (N, k)
    Dphi = np.abs(np.stack([j.partials for j in phis], axis=1))  # (N, l, k)
    psi_semi = (np.abs(psi.partials) * t).sum(axis=1)
    regime = Regime.of(params.p)
    if regime is Regime.P_EQ_1:
        A = psi_semi * np.log(4.0 / s).sum(axis=1)
        denom = s
    elif regime is Regime.P_LT_1:
        A = psi_semi
        denom = s ** params.p
    else:
        A = psi_semi * (s ** (1.0 - params.p)).sum(axis=1)
        denom = s ** params.p
    per_l = np.abs(psi.value)[:, None] * (Dphi * t[:, None, :]).sum(axis=2) / denom
    return A, per_l.sum(axis=1), per_l, psi_semi


def criterion_values(pair: SymbolPair, params: BlochParams, z) -> CriterionValues:
    Z, single = as_points(z, pair.n)
    A, B, per_l, _ = _criterion_arrays(pair, params, Z)
    if single:
        return CriterionValues(A[0], B[0], per_l[0])
    return CriterionValues(A, B, per_l)


def corollary_functional(pair: SymbolPair, params: BlochParams, z) -> np.ndarray:
    """``sum_{k,l} |d phi_l/dz_k| (1-|z_k|^2)^q / (1-|phi_l|^2)^p`` (psi ignored)."""
    Z, single = as_points(z, pair.n)
    _, phis = pair.jets(Z)
    W = np.column_stack([j.value for j in phis])
    Dphi = np.abs(np.stack([j.partials for j in phis], axis=1))
    t = one_minus_abs2(Z) ** params.q
    out = ((Dphi * t[:, None, :]).sum(axis=2) / one_minus_abs2(W) ** params.p).sum(axis=1)
    return out[0] if single else out


def psi_seminorm_density(pair: SymbolPair, params: BlochParams):
    """``z -> sum_k |d psi/dz_k| (1-|z_k|^2)^q``."""

    def F(Z):
        psi = eval_jet(pair.psi, Z)
        return (np.abs(psi.partials) * one_minus_abs2(Z) ** params.q).sum(axis=1)

    return F


def functional_A(pair, params):
    return lambda Z: _criterion_arrays(pair, params, Z)[0]


def functional_B(pair, params):
    return lambda Z: _criterion_arrays(pair, params, Z)[1]


def functional_per_l(pair, params, l: int):
    """Per-coordinate phi term for coordinate ``l`` (1-based)."""
    return lambda Z: _criterion_arrays(pair, params, Z)[2][:, l - 1]


def phi_margin(pair: SymbolPair):
    """Distance of ``phi(z)`` to the boundary, ``1 - max_l |phi_l(z)|``."""
    return lambda Z: 1.0 - np.abs(pair.image(Z)).max(axis=1)


def phi_margin_l(pair: SymbolPair, l: int):
    return lambda Z: 1.0 - np.abs(eval_jet(pair.phi[l - 1], Z).value)


# ---------------------------------------------------------------------------
# Classification


@dataclass
class Classification:
    regime: Regime
    params: BlochParams
    bounded: Boundedness = Boundedness.INCONCLUSIVE
    compact: Compactness = Compactness.INCONCLUSIVE
    sup_A: Optional[SupEstimate] = None
    sup_B: Optional[SupEstimate] = None
    profiles: dict[str, list[ShellSup]] = field(default_factory=dict)
    profile_verdicts: dict[str, str] = field(default_factory=dict)
    max_phi_modulus: Optional[float] = None
    notes: list[str] = field(default_factory=list)
    thresholds: Thresholds = field(default_factory=Thresholds)

    @property
    def decisive(self) -> bool:
        return (
            self.bounded is not Boundedness.INCONCLUSIVE
            and self.compact is not Compactness.INCONCLUSIVE
        )


def classify_bounded(
    pair: SymbolPair,
    params: BlochParams,
    budget: SampleBudget = SampleBudget(),
    thresholds: Thresholds = Thresholds(),
) -> Classification:
    """Bounded iff the sup of both criterion functionals is finite."""
    if params.n != pair.n:
        raise ValueError("dimension of params and pair differ")
    regime = Regime.of(params.p)
    cls = Classification(regime, params, thresholds=thresholds)
    cls.sup_A = estimate_sup(functional_A(pair, params), pair.n, budget, thresholds=thresholds)
    cls.sup_B = estimate_sup(functional_B(pair, params), pair.n, budget, thresholds=thresholds)
    divs = (cls.sup_A.divergence, cls.sup_B.divergence)
    if Divergence.DIVERGENT in divs:
        cls.bounded = Boundedness.UNBOUNDED
        for name, est in (("A", cls.sup_A), ("B", cls.sup_B)):
            if est.divergence is Divergence.DIVERGENT:
                cls.notes.append(
                    f"{name} diverges toward the boundary with growth exponent {est.growth_exponent:.4g}"
                )
    elif all(d is Divergence.CONVERGENT for d in divs):
        cls.bounded = Boundedness.BOUNDED
    else:
        cls.bounded = Boundedness.INCONCLUSIVE
        cls.notes.append("criterion suprema neither convergent nor divergent at this budget")
    return cls


def _decays(profile: list[ShellSup], th: Thresholds) -> bool:
    pop = [s for s in profile if not s.empty]
    if len(pop) < 3:
        return False
    last = [s.sup for s in pop[-3:]]
    if max(last) < th.tau and last[0] >= last[1] >= last[2]:
        return True
    tail = pop[-th.fit_shells:]
    if all(s.sup > 0 for s in tail):
        fit = loglog_fit(tail)
        if fit and fit[0] <= -th.slope and fit[1] <= -th.correlation:
            return True
    return False


def _persists(profile: list[ShellSup], th: Thresholds) -> bool:
    M = len(profile)
    deep = [s for s in profile if s.index > M // 2 and not s.empty]
    if len(deep) < th.persist_shells:
        return False
    return all(s.sup >= th.tau_big for s in deep[-th.persist_shells:])


def _deep_populated(profile: list[ShellSup]) -> bool:
    M = len(profile)
    return any(not s.empty for s in profile if s.index > M // 2)


def judge_profile(profile, th) -> str:
    if not _deep_populated(profile):
        return "vacuous"
    if _persists(profile, th):
        return "persists"
    if _decays(profile, th):
        return "decays"
    return "unclear"


def classify_compact(
    pair: SymbolPair,
    params: BlochParams,
    budget: SampleBudget = SampleBudget(),
    thresholds: Thresholds = Thresholds(),
    bounded: Optional[Classification] = None,
) -> Classification:
    """Compactness verdict from the boundary-shell profiles of the criteria.

    p >= 1: profiles of ``A`` and ``B`` against ``1 - max_l |phi_l(z)|``.
    p < 1: for each ``l`` the profile of the per-coordinate ``B`` term
    against ``1 - |phi_l(z)|``.  The bounded verdict is a premise.
    """
    cls = bounded or classify_bounded(pair, params, budget, thresholds)
    th = thresholds
    Z = sample_polydisk(pair.n, budget)
    cls.max_phi_modulus = float(np.abs(pair.image(Z)).max())

    if cls.bounded is Boundedness.UNBOUNDED:
        cls.compact = Compactness.NOT_COMPACT
        cls.notes.append("not compact: operator is not bounded (premise fails)")
        return cls

    if cls.regime is Regime.P_LT_1:
        for l in range(1, pair.n + 1):
            key = f"B_{l}"
            cls.profiles[key] = shell_profile(
                functional_per_l(pair, params, l), phi_margin_l(pair, l), pair.n, budget
            )
    else:
        margin = phi_margin(pair)
        cls.profiles["A"] = shell_profile(functional_A(pair, params), margin, pair.n, budget)
        cls.profiles["B"] = shell_profile(functional_B(pair, params), margin, pair.n, budget)
    cls.profile_verdicts = {k: judge_profile(v, th) for k, v in cls.profiles.items()}
    verdicts = set(cls.profile_verdicts.values())

    if verdicts == {"vacuous"}:
        verdict = Compactness.COMPACT
        cls.notes.append(
            f"image compactly contained: phi never entered the deepest {budget.shells - budget.shells // 2} "
            f"shells (max sampled |phi_l| = {cls.max_phi_modulus:.6g})"
        )
    elif "persists" in verdicts:
        verdict = Compactness.NOT_COMPACT
        bad = sorted(k for k, v in cls.profile_verdicts.items() if v == "persists")
        cls.notes.append(f"profile(s) {', '.join(bad)} stay >= tau_big={th.tau_big} near the boundary")
    elif verdicts <= {"vacuous", "decays"}:
        verdict = Compactness.COMPACT
    else:
        verdict = Compactness.INCONCLUSIVE
        cls.notes.append("boundary profiles neither decay below tau nor persist above tau_big")

    if cls.bounded is Boundedness.INCONCLUSIVE and verdict is Compactness.COMPACT:
        verdict = Compactness.INCONCLUSIVE
        cls.notes.append("profiles decay but boundedness is undecided; compactness withheld")
    cls.compact = verdict
    return cls


def classify(
    pair: SymbolPair,
    params: BlochParams,
    budget: SampleBudget = SampleBudget(),
    thresholds: Thresholds = Thresholds(),
) -> Classification:
    return classify_compact(pair, params, budget, thresholds)

"""p-Bloch norms on the polydisk and the growth / Hoelder inequality checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .sampling import Divergence, SampleBudget, SupEstimate, Thresholds, estimate_sup
from .symbolic import FunctionLike, HolomorphicFunction, as_function, as_points


class _Divergent:
    """Sentinel for an infinite norm.  Not a number; never enters arithmetic."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "DIVERGENT"

    def __reduce__(self):
        return (_Divergent, ())


DIVERGENT = _Divergent()
Norm = Union[float, _Divergent]


@dataclass(frozen=True)
class BlochParams:
    p: float
    q: float
    n: int

    def __post_init__(self):
        for name in ("p", "q"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        if self.n < 1:
            raise ValueError("n must be >= 1")


@dataclass(frozen=True)
class NormReport:
    p: float
    value_at_zero: float
    seminorm: SupEstimate
    norm: Norm

    @property
    def finite(self) -> bool:
        return self.norm is not DIVERGENT


def one_minus_abs2(Z: np.ndarray) -> np.ndarray:
    """``1 - |z|**2`` computed as ``(1 - |z|)(1 + |z|)``."""
    a = np.abs(Z)
    return (1.0 - a) * (1.0 + a)


def seminorm_density(f: HolomorphicFunction, p: float):
    """``z -> sum_k |df/dz_k| (1 - |z_k|^2)^p`` as a vectorised functional."""

    grad = getattr(f, "grad", None) or (lambda Z: f.jet(Z).partials)

    def F(Z):
        return (np.abs(grad(Z)) * one_minus_abs2(Z) ** p).sum(axis=1)

    return F


def bloch_norm(
    f: FunctionLike,
    p: float,
    budget: SampleBudget = SampleBudget(),
    n: Optional[int] = None,
    thresholds: Thresholds = Thresholds(),
) -> NormReport:
    """Estimate ``||f||_p = |f(0)| + sup_z sum_k |df/dz_k| (1 - |z_k|^2)^p``.

    A divergent seminorm profile yields the ``DIVERGENT`` sentinel as norm.
    """
    if n is None:
        n = getattr(f, "n", None)
        if n is None:
            raise ValueError("dimension n required for string/AST input")
    f = as_function(f, n)
    if not (math.isfinite(p) and p >= 0):
        raise ValueError(f"p must be finite and >= 0, got {p}")
    f0 = abs(complex(f.jet(np.zeros(n)).value))
    semi = estimate_sup(seminorm_density(f, p), n, budget, thresholds=thresholds)
    norm = DIVERGENT if semi.divergence is Divergence.DIVERGENT else f0 + semi.value
    return NormReport(p, f0, semi, norm)


# ---------------------------------------------------------------------------
# Growth bound


def growth_coefficient(p: float, n: int) -> float:
    """Leading constant of the pointwise growth bound in the regime of ``p``.

    Uses ``1 + n/(1-p)`` for ``p < 1`` (the constant the integral estimate
    actually delivers for ``n`` coordinates).
    """
    if abs(p - 1.0) <= 1e-12:
        return 0.5 + 1.0 / (2 * n * math.log(2.0))
    if p < 1:
        return 1.0 + n / (1.0 - p)
    return 1.0 / n + 2.0 ** (p - 1) / (p - 1)


def growth_factor(Z, p: float) -> np.ndarray:
    """Right-hand side factor ``C_p(z)`` with ``|f(z)| <= C_p(z) ||f||_p``."""
    Z, single = as_points(Z)
    n = Z.shape[1]
    c = growth_coefficient(p, n)
    s = one_minus_abs2(Z)
    if abs(p - 1.0) <= 1e-12:
        out = c * np.log(4.0 / s).sum(axis=1)
    elif p < 1:
        out = np.full(Z.shape[0], c)
    else:
        out = c * (s ** (1.0 - p)).sum(axis=1)
    return out[0] if single else out


@dataclass(frozen=True)
class InequalityReport:
    name: str
    p: float
    norm: Optional[float]
    checked: int
    violations: int
    max_ratio: float
    worst_point: Optional[np.ndarray] = None
    skipped: Optional[str] = None

    @property
    def holds(self) -> bool:
        return self.skipped is None and self.violations == 0


def _resolve_norm(f, p, norm, budget):
    if norm is None:
        norm = bloch_norm(f, p, budget or SampleBudget())
    if isinstance(norm, NormReport):
        norm = norm.norm
    return norm


def _ratio_report(name, p, norm, lhs, rhs, Z, rtol):
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(lhs == 0, 0.0, lhs / rhs)
    i = int(np.argmax(ratio)) if ratio.size else 0
    viol = int((ratio > 1.0 + rtol).sum())
    worst = Z[i].copy() if ratio.size else None
    return InequalityReport(name, p, float(norm), int(ratio.size), viol, float(ratio.max(initial=0.0)), worst)


def check_growth_bound(
    f: HolomorphicFunction,
    p: float,
    samples,
    norm: Union[NormReport, Norm, None] = None,
    budget: Optional[SampleBudget] = None,
    rtol: float = 1e-9,
) -> InequalityReport:
    """Check ``|f(z)| <= C_p(z) ||f||_p`` at every sample point.

    ``norm`` may be a precomputed :class:`NormReport` or number; otherwise it
    is estimated with ``budget``.  A divergent norm makes the check
    inapplicable (reported via ``skipped``).
    """
    Z, _ = as_points(samples, f.n)
    norm = _resolve_norm(f, p, norm, budget)
    if norm is DIVERGENT:
        return InequalityReport("growth", p, None, 0, 0, 0.0, skipped="f not in B^p (divergent seminorm)")
    lhs = np.abs(f.jet(Z).value)
    rhs = growth_factor(Z, p) * norm
    return _ratio_report("growth", p, norm, lhs, rhs, Z, rtol)


def check_holder(
    f: HolomorphicFunction,
    p: float,
    pairs,
    norm: Union[NormReport, Norm, None] = None,
    budget: Optional[SampleBudget] = None,
    rtol: float = 1e-9,
) -> InequalityReport:
    """Check ``|f(z) - f(w)| <= 2/(1-p) ||f||_p sum_k |z_k - w_k|^(1-p)``.

    ``pairs`` is ``(Z, W)`` with two ``(N, n)`` arrays, or one ``(N, 2, n)``
    array.  Only defined for ``0 <= p < 1``.
    """
    if not 0 <= p < 1:
        raise ValueError(f"Hoelder estimate requires 0 <= p < 1, got p={p}")
    if isinstance(pairs, tuple):
        Z, W = pairs
    else:
        arr = np.asarray(pairs, dtype=complex)
        Z, W = arr[:, 0, :], arr[:, 1, :]
    Z, _ = as_points(Z, f.n)
    W, _ = as_points(W, f.n)
    norm = _resolve_norm(f, p, norm, budget)
    if norm is DIVERGENT:
        return InequalityReport("holder", p, None, 0, 0, 0.0, skipped="f not in B^p (divergent seminorm)")
    lhs = np.abs(f.jet(Z).value - f.jet(W).value)
    rhs = 2.0 / (1.0 - p) * norm * (np.abs(Z - W) ** (1.0 - p)).sum(axis=1)
    return _ratio_report("holder", p, norm, lhs, rhs, Z, rtol)

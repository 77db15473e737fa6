"""Boundary-stratified sampling of the polydisk and supremum estimation.

Functionals are vectorised callables ``F(Z) -> values`` taking a complex
``(N, n)`` array of points and returning ``N`` nonnegative reals.

Margins are distances to the boundary measured as ``1 - |w|``.  Shell ``m``
(``m >= 1``) collects points whose margin lies in ``(2**-(m+1), 2**-m]``;
margins above ``1/2`` belong to the core and are not binned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .symbolic import EvaluationError

MARGIN_FLOOR = 1e-12
RAY_ANGLES = 8
TOP_K = 5
MAX_POLLS = 40
MIN_STEP = 1e-7

Functional = Callable[[np.ndarray], np.ndarray]
MarginMap = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SampleBudget:
    base_count: int = 200_000
    shells: int = 12
    refine_rounds: int = 3
    seed: int = 42

    def __post_init__(self):
        if self.base_count < 1 or self.shells < 1 or self.refine_rounds < 0:
            raise ValueError(f"invalid budget {self}")


@dataclass(frozen=True)
class Thresholds:
    """Decision policy for divergence and decay judgements."""

    slope: float = 0.1  # log-log growth exponent that counts as divergence
    correlation: float = 0.9
    fit_shells: int = 6
    plateau: float = 0.05  # relative spread of the last 3 shell sups
    tau: float = 1e-2  # decay threshold for o(1)
    tau_big: float = 1e-1  # persistence threshold for "not o(1)"
    persist_shells: int = 3


class Divergence(str, Enum):
    CONVERGENT = "convergent"
    DIVERGENT = "divergent"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ShellSup:
    index: int
    count: int
    sup: Optional[float]  # None marks an empty shell

    @property
    def delta_high(self) -> float:
        return 2.0 ** -self.index

    @property
    def delta_low(self) -> float:
        return 2.0 ** -(self.index + 1)

    @property
    def empty(self) -> bool:
        return self.sup is None


@dataclass(frozen=True)
class SupEstimate:
    value: float
    argmax: np.ndarray
    samples_used: int
    shell_sups: list[ShellSup]
    divergence: Divergence
    growth_exponent: Optional[float] = None
    thresholds: Thresholds = field(default_factory=Thresholds)

    @property
    def convergent(self) -> bool:
        return self.divergence is Divergence.CONVERGENT


def boundary_margin(Z: np.ndarray) -> np.ndarray:
    """Distance ``1 - max_k |z_k|`` to the topological boundary."""
    return 1.0 - np.abs(Z).max(axis=1)


def shell_of(margin: np.ndarray) -> np.ndarray:
    """Shell index per margin; 0 for the core (margin > 1/2)."""
    m = np.floor(-np.log2(np.maximum(margin, 1e-300)))
    return np.maximum(m, 0).astype(int)


def _rng(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, tag])


def _polar(margin: np.ndarray, angle: np.ndarray) -> np.ndarray:
    r = 1.0 - np.maximum(margin, MARGIN_FLOOR)
    return r * np.exp(1j * angle)


def stratified_points(n: int, budget: SampleBudget) -> np.ndarray:
    """The ``base_count`` stratified points.

    Each coordinate cycles through the shells ``1..M`` in a random order within
    consecutive blocks of ``M`` points, so every shell receives the same count
    (up to the last partial block).  Both random streams are consumed in
    point order, hence a larger ``base_count`` extends the set.
    """
    N, M = budget.base_count, budget.shells
    blocks = -(-N // M)
    keys = _rng(budget.seed, 1).random((blocks, n, M))
    shells = np.argsort(keys, axis=-1).transpose(0, 2, 1).reshape(blocks * M, n)[:N] + 1
    u = _rng(budget.seed, 2).random((N, n, 2))
    hi = 2.0 ** -shells
    margin = hi - u[..., 0] * (hi - hi / 2)  # (hi/2, hi]
    return _polar(margin, 2 * np.pi * u[..., 1])


def core_points(n: int, budget: SampleBudget) -> np.ndarray:
    """Mixed interior/boundary points: each coordinate picks a shell in ``0..M``.

    Shell 0 is the disk ``|z| < 1/2``.  Keeps coordinates of different depths
    together, which the purely stratified block never produces.
    """
    c = max(1, budget.base_count // budget.shells)
    M = budget.shells
    u = _rng(budget.seed, 3).random((c, n, 3))
    shells = np.minimum((u[..., 0] * (M + 1)).astype(int), M)
    hi = np.where(shells == 0, 1.0, 2.0 ** -shells)
    lo = np.where(shells == 0, 0.5, hi / 2)
    margin = hi - u[..., 1] * (hi - lo)
    return _polar(margin, 2 * np.pi * u[..., 2])


def ray_points(n: int, budget: SampleBudget) -> np.ndarray:
    """Axis-aligned rays (one coordinate moving, the rest 0) plus the diagonal.

    Margins run in half-octave steps down to ``2^-(2M)``, twice as deep as
    the stratified block, so that maps which square the margin (``z^2``)
    still reach the deepest image shells.
    """
    M = budget.shells
    margins = 2.0 ** (-np.arange(1, 4 * M + 1) / 2)
    angles = 2 * np.pi * np.arange(RAY_ANGLES) / RAY_ANGLES
    vals = _polar(margins[:, None], angles[None, :]).ravel()
    rays = []
    for k in range(n):
        block = np.zeros((vals.size, n), dtype=complex)
        block[:, k] = vals
        rays.append(block)
    if n > 1:
        rays.append(np.repeat(vals[:, None], n, axis=1))
    return np.concatenate(rays)


def sample_polydisk(n: int, budget: SampleBudget) -> np.ndarray:
    """Deterministic sample set: origin, rays, stratified block, core block."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.concatenate(
        [
            np.zeros((1, n), dtype=complex),
            ray_points(n, budget),
            stratified_points(n, budget),
            core_points(n, budget),
        ]
    )


def evaluate(F: Functional, Z: np.ndarray) -> np.ndarray:
    """Evaluate ``F`` and check the result is finite and nonnegative."""
    vals = np.asarray(F(Z), dtype=float)
    if vals.shape != (Z.shape[0],):
        raise ValueError(f"functional returned shape {vals.shape}, expected ({Z.shape[0]},)")
    bad = ~np.isfinite(vals) | (vals < 0)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise EvaluationError(f"functional value {vals[i]!r} is not a finite nonnegative real", Z[i])
    return vals


def bin_shells(margins: np.ndarray, values: np.ndarray, shells: int) -> list[ShellSup]:
    idx = shell_of(margins)
    out = []
    for m in range(1, shells + 1):
        sel = idx == m
        cnt = int(sel.sum())
        out.append(ShellSup(m, cnt, float(values[sel].max()) if cnt else None))
    return out


def loglog_fit(shell_sups: list[ShellSup]) -> tuple[float, float] | None:
    """Slope and correlation of ``log sup`` against ``log(1/delta_m)``."""
    pts = [(s.index * math.log(2.0), math.log(s.sup)) for s in shell_sups if s.sup]
    if len(pts) < 3:
        return None
    x, y = np.array(pts).T
    if np.ptp(y) == 0:
        return 0.0, 0.0
    slope = float(np.polyfit(x, y, 1)[0])
    r = float(np.corrcoef(x, y)[0, 1])
    return slope, r


def diagnose(shell_sups: list[ShellSup], thresholds: Thresholds = Thresholds()):
    """Classify a boundary profile as convergent, divergent or inconclusive.

    Returns ``(Divergence, growth_exponent_or_None)``.
    """
    M = len(shell_sups)
    pop = [s for s in shell_sups if not s.empty]
    if not pop or pop[-1].index <= M // 2:
        # never near the boundary: sup of a continuous function over a compact set
        return Divergence.CONVERGENT, None
    if len(pop) < 3:
        return Divergence.INCONCLUSIVE, None
    tail = pop[-thresholds.fit_shells:]
    if all(s.sup > 0 for s in tail):
        fit = loglog_fit(tail)
        if fit and fit[0] >= thresholds.slope and fit[1] >= thresholds.correlation:
            return Divergence.DIVERGENT, fit[0]
    last = [s.sup for s in pop[-3:]]
    flat = max(last) - min(last) <= thresholds.plateau * max(last)
    falling = last[0] >= last[1] >= last[2]
    if flat or falling:
        return Divergence.CONVERGENT, None
    return Divergence.INCONCLUSIVE, None


def _to_polar(Z):
    return np.log(np.maximum(1.0 - np.abs(Z), MARGIN_FLOOR)), np.angle(Z)


def _from_polar(logm, ang):
    return _polar(np.minimum(np.exp(logm), 1.0), ang)


def pattern_search(F: Functional, seeds: np.ndarray, seed_vals: np.ndarray):
    """Coordinate-wise compass search in (log-margin, angle) with step halving.

    All seeds are polled together so each poll is one batched call of ``F``.
    Returns every evaluated point and value.
    """
    K, n = seeds.shape
    logm, ang = _to_polar(seeds)
    best = seed_vals.copy()
    step_r = np.full(K, 0.5)
    step_a = np.full(K, np.pi / 8)
    moves = [(k, dr, da) for k in range(n) for dr, da in ((1, 0), (-1, 0), (0, 1), (0, -1))]
    seen_Z, seen_v = [], []
    for _ in range(MAX_POLLS):
        active = (step_r > MIN_STEP) | (step_a > MIN_STEP)
        if not active.any():
            break
        cand_m = np.repeat(logm[None], len(moves), axis=0)  # (moves, K, n)
        cand_a = np.repeat(ang[None], len(moves), axis=0)
        for j, (k, dr, da) in enumerate(moves):
            cand_m[j, :, k] += dr * step_r
            cand_a[j, :, k] += da * step_a
        cand_m = np.clip(cand_m, math.log(MARGIN_FLOOR), 0.0)
        Zc = _from_polar(cand_m, cand_a).reshape(-1, n)
        vals = evaluate(F, Zc).reshape(len(moves), K)
        seen_Z.append(Zc)
        seen_v.append(vals.ravel())
        j_best = np.argmax(vals, axis=0)
        v_best = vals[j_best, np.arange(K)]
        improved = (v_best > best) & active
        for i in np.flatnonzero(improved):
            logm[i] = cand_m[j_best[i], i]
            ang[i] = cand_a[j_best[i], i]
            best[i] = v_best[i]
        stuck = ~improved & active
        step_r[stuck] /= 2
        step_a[stuck] /= 2
    if not seen_Z:
        return np.empty((0, n), dtype=complex), np.empty(0)
    return np.concatenate(seen_Z), np.concatenate(seen_v)


def top_k(values: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` largest values; ties go to the lower index."""
    return np.argsort(-values, kind="stable")[:k]


def estimate_sup(
    F: Functional,
    n: int,
    budget: SampleBudget = SampleBudget(),
    margin_of: MarginMap | None = None,
    thresholds: Thresholds = Thresholds(),
) -> SupEstimate:
    """Estimate ``sup F`` over the polydisk.

    Samples the stratified set, refines from the best points by pattern
    search, then bins every evaluated point by ``margin_of`` (default: the
    distance to the boundary) to build the shell profile and the divergence
    diagnosis.
    """
    margin_of = margin_of or boundary_margin
    Z = sample_polydisk(n, budget)
    vals = evaluate(F, Z)
    allZ, allv = [Z], [vals]
    for _ in range(budget.refine_rounds):
        Zs, vs = np.concatenate(allZ), np.concatenate(allv)
        seeds = top_k(vs, TOP_K)
        rz, rv = pattern_search(F, Zs[seeds], vs[seeds])
        allZ.append(rz)
        allv.append(rv)
    Zs, vs = np.concatenate(allZ), np.concatenate(allv)
    i = int(np.argmax(vs))
    shells = bin_shells(margin_of(Zs), vs, budget.shells)
    div, expo = diagnose(shells, thresholds)
    return SupEstimate(float(vs[i]), Zs[i].copy(), int(vs.size), shells, div, expo, thresholds)


def shell_profile(
    F: Functional,
    margin_of: MarginMap,
    n: int,
    budget: SampleBudget = SampleBudget(),
) -> list[ShellSup]:
    """Per-shell sup of ``F`` on the sample set, binned by ``margin_of``."""
    Z = sample_polydisk(n, budget)
    margins = np.asarray(margin_of(Z), dtype=float)
    if (margins <= 0).any():
        i = int(np.flatnonzero(margins <= 0)[0])
        raise EvaluationError("margin map must be positive", Z[i])
    return bin_shells(margins, evaluate(F, Z), budget.shells)

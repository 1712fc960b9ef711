#!/usr/bin/env python3
"""Quadrature on unit spheres 𝕊^{n-1} ⊂ ℝⁿ and the transforms built on it.

Product rules write v = (t, √(1 - t²) w) with t = ⟨v, e₁⟩ and w on 𝕊^{n-2},
so the measure is (1 - t²)^{(n-3)/2} dt dw.  The t integral is split at the
equator and done with Gauss–Jacobi on each half, which makes the hemisphere
split along e₁ exact; rules are rotated to put e₁ on a requested axis.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma, roots_jacobi, roots_legendre
from scipy.stats import norm, qmc

from riemann import (
    FloatArray,
    ParameterError,
    UnsupportedError,
    orthonormal_frame,
    weighted_sum,
)

log = logging.getLogger(__name__)

PRODUCT_MAX_DIM = 5
EQUATOR_TOLERANCE = 1e-14
PARITY_TOLERANCE = 1e-10
LOW_DISCREPANCY_REPLICATES = 8

RULE_KINDS = ("product", "low-discrepancy")


def unit_ball_volume(m: int) -> float:
    """ω_m = π^{m/2} / Γ(m/2 + 1)."""
    return float(math.pi ** (m / 2) / gamma(m / 2 + 1))


def sphere_area(n: int) -> float:
    """Area of 𝕊^{n-1} ⊂ ℝⁿ, n·ω_n."""
    return n * unit_ball_volume(n)


@dataclass(frozen=True, eq=False)
class SphereRule:
    dim: int
    nodes: FloatArray  # (size, dim), unit rows
    weights: FloatArray
    level: int
    kind: str = "product"
    antipodal: bool = True
    # Replicate index of every node; low-discrepancy error bars come from the spread.
    groups: FloatArray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def exact(self) -> bool:
        return self.kind == "product"

    def values(self, f: Callable[[FloatArray], float]) -> FloatArray:
        return np.array([float(f(v)) for v in self.nodes])

    def integrate(self, f: Callable[[FloatArray], float] | FloatArray) -> float:
        values = f if isinstance(f, np.ndarray) else self.values(f)
        return weighted_sum(self.weights, values)

    def error_estimate(self, values: FloatArray) -> float:
        roundoff = 1e-15 * float(np.sum(np.abs(self.weights * values)))
        if self.exact or len(self.groups) != self.size:
            return roundoff
        count = int(self.groups.max()) + 1
        if count < 2:
            return roundoff
        partial = np.bincount(self.groups, weights=self.weights * values, minlength=count)
        # Every replicate alone is an estimate of the integral.
        estimates = count * partial
        return float(np.std(estimates, ddof=1) / math.sqrt(count)) + roundoff

    def oriented(self, u: FloatArray) -> SphereRule:
        """Same rule with its polar axis e₁ moved to the unit vector ``u``."""
        basis = complete_basis(u)
        return SphereRule(
            self.dim,
            self.nodes @ basis.T,
            self.weights,
            self.level,
            self.kind,
            self.antipodal,
            self.groups,
        )

    def restricted(self, weights: FloatArray) -> SphereRule:
        keep = weights > 0
        groups = self.groups[keep] if len(self.groups) == self.size else self.groups
        return SphereRule(
            self.dim,
            self.nodes[keep],
            weights[keep],
            self.level,
            self.kind,
            antipodal=False,
            groups=groups,
        )


def complete_basis(u: FloatArray) -> FloatArray:
    """Orthonormal columns with ``u`` first; the completion is deterministic."""
    u = np.asarray(u, dtype=float)
    return orthonormal_frame(np.eye(len(u)), u)


def _circle(count: int) -> tuple[FloatArray, FloatArray]:
    angles = (np.arange(count) + 0.5) * 2 * math.pi / count
    nodes = np.column_stack([np.cos(angles), np.sin(angles)])
    return nodes, np.full(count, 2 * math.pi / count)


def _half_circles(level: int) -> tuple[FloatArray, FloatArray]:
    # Composite Gauss–Legendre on the two halves split by the e₁ axis.
    x, w = roots_legendre(2 * level + 8)
    angles = 0.5 * math.pi * x
    weights = 0.5 * math.pi * w
    right = np.column_stack([np.cos(angles), np.sin(angles)])
    return np.vstack([right, -right]), np.concatenate([weights, weights])


def _full_jacobi(n: int, level: int) -> tuple[FloatArray, FloatArray]:
    # Inner spheres carry no hemisphere split, one Gauss–Jacobi rule suffices.
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.ones(2)
    if n == 2:
        return _circle(2 * level + 2)
    alpha = (n - 3) / 2
    t, wt = roots_jacobi(level + 1, alpha, alpha)
    return _join(t, wt, *_full_jacobi(n - 1, level))


def _join(
    t: FloatArray, wt: FloatArray, inner: FloatArray, inner_weights: FloatArray
) -> tuple[FloatArray, FloatArray]:
    radius = np.sqrt(np.clip(1 - t * t, 0.0, None))
    nodes = [
        np.concatenate([[ti], ri * w]) for ti, ri in zip(t, radius, strict=True) for w in inner
    ]
    weights = [wi * wj for wi in wt for wj in inner_weights]
    return np.asarray(nodes), np.asarray(weights)


def _product_rule(n: int, level: int) -> tuple[FloatArray, FloatArray]:
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.ones(2)
    if n == 2:
        return _half_circles(level)
    alpha = (n - 3) / 2
    count = level + 2 if n % 2 == 1 else level + 10
    s, ws = roots_jacobi(count, alpha, 0.0)
    t = (1 + s) / 2
    wt = ws * 2 ** (-alpha - 1) * (1 + t) ** alpha
    upper, upper_weights = _join(t, wt, *_full_jacobi(n - 1, level))
    lower = upper.copy()
    lower[:, 0] *= -1
    # Antipode of each upper node, keeping the inner sphere symmetric as well.
    lower[:, 1:] *= -1
    return np.vstack([upper, lower]), np.concatenate([upper_weights, upper_weights])


def _low_discrepancy_rule(n: int, level: int, seed: int) -> SphereRule:
    points_per_replicate = 2 ** (level + 4)
    nodes, groups = [], []
    for replicate in range(LOW_DISCREPANCY_REPLICATES):
        sampler = qmc.Sobol(d=n, scramble=True, seed=seed + replicate)
        uniform = np.clip(sampler.random(points_per_replicate), 1e-16, 1 - 1e-16)
        gaussian = norm.ppf(uniform)
        unit = gaussian / np.linalg.norm(gaussian, axis=1, keepdims=True)
        nodes.extend([unit, -unit])
        groups.extend([np.full(2 * points_per_replicate, replicate)])
    stacked = np.vstack(nodes)
    return SphereRule(
        n,
        stacked,
        np.full(len(stacked), sphere_area(n) / len(stacked)),
        level,
        kind="low-discrepancy",
        antipodal=True,
        groups=np.concatenate(groups).astype(int),
    )


def build_rule(n: int, level: int, kind: str = "product", seed: int = 0) -> SphereRule:
    """Rule on 𝕊^{n-1}; product rules integrate polynomials of degree ≤ 2·level exactly."""
    if level < 0:
        msg = f"rule level must be nonnegative, got {level}"
        raise ParameterError(msg)
    if kind == "product":
        if not 1 <= n <= PRODUCT_MAX_DIM:
            msg = f"product sphere rules exist for 1 <= n <= {PRODUCT_MAX_DIM}, got n={n}"
            raise UnsupportedError(msg)
        nodes, weights = _product_rule(n, level)
        rule = SphereRule(n, nodes, weights, level)
    elif kind == "low-discrepancy":
        if n < 2:
            msg = f"low-discrepancy sphere rules need n >= 2, got n={n}"
            raise UnsupportedError(msg)
        rule = _low_discrepancy_rule(n, level, seed)
    else:
        msg = f"unknown sphere rule kind {kind!r}, choose one of {RULE_KINDS}"
        raise UnsupportedError(msg)
    log.debug(f"{kind} rule on S^{n - 1}: level {level}, {rule.size} nodes")
    return rule


def default_kind(n: int) -> str:
    return "product" if n <= PRODUCT_MAX_DIM else "low-discrepancy"


def hemisphere_weights(rule: SphereRule, u: FloatArray) -> FloatArray:
    """Weights of S⁺(u); nodes on the equator count half."""
    c = rule.nodes @ np.asarray(u, dtype=float)
    return np.where(
        c > EQUATOR_TOLERANCE,
        rule.weights,
        np.where(np.abs(c) <= EQUATOR_TOLERANCE, rule.weights / 2, 0.0),
    )


def hemisphere(rule: SphereRule, u: FloatArray) -> SphereRule:
    return rule.restricted(hemisphere_weights(rule, u))


def great_subsphere_rule(
    n: int,
    level: int,
    u: FloatArray,
    kind: str | None = None,
    seed: int = 0,
    inner: SphereRule | None = None,
) -> SphereRule:
    """Rule on S⁰(u) = 𝕊^{n-1} ∩ u^⊥, nodes expressed in ℝⁿ."""
    if inner is None:
        inner = build_rule(n - 1, level, kind or default_kind(n - 1), seed)
    complement = complete_basis(u)[:, 1:]
    return SphereRule(
        n,
        inner.nodes @ complement.T,
        inner.weights,
        level,
        inner.kind,
        inner.antipodal,
        inner.groups,
    )


@dataclass(frozen=True, eq=False)
class SphericalFunction:
    dim: int
    evaluate: Callable[[FloatArray], float]
    parity: str | None = None

    def __post_init__(self) -> None:
        if self.parity not in (None, "even", "odd"):
            msg = f"parity must be 'even', 'odd' or None, got {self.parity!r}"
            raise ParameterError(msg)
        if self.parity is not None:
            self.verify_parity()

    def __call__(self, v: FloatArray) -> float:
        return float(self.evaluate(np.asarray(v, dtype=float)))

    def verify_parity(self, samples: int = 16, seed: int = 0) -> float:
        sign = 1.0 if self.parity == "even" else -1.0
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(samples):
            v = rng.normal(size=self.dim)
            v /= np.linalg.norm(v)
            worst = max(worst, abs(self(-v) - sign * self(v)))
        if worst > PARITY_TOLERANCE:
            msg = f"function tagged {self.parity} violates its parity by {worst:.2e}"
            raise ParameterError(msg)
        return worst


def _check_dim(f: SphericalFunction, rule: SphereRule) -> None:
    if f.dim != rule.dim:
        msg = f"function lives on S^{f.dim - 1} but the rule on S^{rule.dim - 1}"
        raise ParameterError(msg)


def cosine_transform(f: SphericalFunction, u: FloatArray, rule: SphereRule) -> float:
    """(𝒞f)(u) = ∫ |⟨u, v⟩| f(v) dv."""
    _check_dim(f, rule)
    u = np.asarray(u, dtype=float)
    oriented = rule.oriented(u)
    return oriented.integrate(lambda v: abs(float(u @ v)) * f(v))


def hemisphere_moment(f: SphericalFunction, u: FloatArray, rule: SphereRule) -> float:
    """∫_{S⁺(u)} ⟨u, v⟩ f(v) dv."""
    _check_dim(f, rule)
    u = np.asarray(u, dtype=float)
    upper = hemisphere(rule.oriented(u), u)
    return upper.integrate(lambda v: float(u @ v) * f(v))


@dataclass(frozen=True)
class FubiniResult:
    lhs: float
    rhs: float

    @property
    def defect(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def relative_defect(self) -> float:
        return self.defect / max(abs(self.lhs), np.finfo(float).tiny)


def stiefel_fubini_check(
    f: Callable[[FloatArray, FloatArray], float], rule: SphereRule
) -> FubiniResult:
    """Both iterated integrals of ``f`` over orthonormal 2-frames.

    lhs integrates the second argument over the great subsphere orthogonal to
    the first, rhs the first over the subsphere orthogonal to the second.
    """
    lhs_terms, rhs_terms = [], []
    base = build_rule(rule.dim - 1, rule.level, default_kind(rule.dim - 1))
    for outer, weight in zip(rule.nodes, rule.weights, strict=True):
        inner = great_subsphere_rule(rule.dim, rule.level, outer, inner=base)
        lhs_terms.append(weight * inner.integrate(lambda v, x=outer: f(x, v)))
        rhs_terms.append(weight * inner.integrate(lambda v, x=outer: f(v, x)))
    return FubiniResult(math.fsum(lhs_terms), math.fsum(rhs_terms))

#!/usr/bin/env python3
"""Taylor coefficients a_i(u) of r ↦ θ(ru) and the checks built on them.

θ(ru) is sampled on Chebyshev radii of a window [r_min, r_max] along u and,
through θ(ru) = θ((-r)(-u)), along -u for negative r.  A least-squares fit
in the scaled variable r/r_max gives the coefficients.  Error bars add the
residual covariance and the shift seen when two more orders are fitted.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from model_spaces import RadialProfile
from riemann import (
    RTOL,
    ChartMetric,
    Error,
    FloatArray,
    ParameterError,
    TangentVector,
    curvature,
    geodesic_flow,
    tangent_vector,
)
from volume_density import (
    densities,
    geodesic_involution,
    sphere_mean_curvature,
    sphere_ray,
)

log = logging.getLogger(__name__)

MAX_ORDER = 8
MAX_CONDITION = 1e10
DEFAULT_WINDOW = (0.05, 0.5)
HARMONIC_FLOOR = 1e-6
VANHECKE_STEP = 0.05


class IllConditionedFitError(Error):
    pass


@dataclass(frozen=True)
class CoefficientFit:
    point: FloatArray
    direction: FloatArray
    coefficients: FloatArray
    errors: FloatArray
    window: tuple[float, float]
    condition: float
    residual: float = 0.0

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    def coefficient(self, i: int) -> float:
        return float(self.coefficients[i])

    def error(self, i: int) -> float:
        return float(self.errors[i])


def curvature_window(metric: ChartMetric, p: FloatArray) -> tuple[float, float]:
    """Default fit window, shrunk where the Ricci curvature is large."""
    data = curvature(metric, p)
    eigenvalues = np.linalg.eigvals(np.linalg.solve(data.metric, data.ricci)).real
    strength = float(np.max(np.abs(eigenvalues))) / max(metric.dim - 1, 1)
    scale = 1 / math.sqrt(max(1.0, strength))
    return DEFAULT_WINDOW[0] * scale, DEFAULT_WINDOW[1] * scale


def chebyshev_radii(window: tuple[float, float], count: int) -> FloatArray:
    low, high = window
    k = np.arange(count)
    nodes = np.cos((2 * k + 1) * math.pi / (2 * count))
    return np.sort(0.5 * (low + high) + 0.5 * (high - low) * nodes)


def fit_coefficients(
    metric: ChartMetric,
    u: TangentVector,
    K: int,  # noqa: N803
    window: tuple[float, float] | None = None,
) -> CoefficientFit:
    if not 0 <= K <= MAX_ORDER:
        msg = f"fit order must lie in [0, {MAX_ORDER}], got {K}"
        raise ParameterError(msg)
    unit = u.unit()
    window = window or curvature_window(metric, unit.point)
    low, high = window
    if not 0 < low < high:
        msg = f"fit window must satisfy 0 < r_min < r_max, got {window}"
        raise ParameterError(msg)
    radii = chebyshev_radii(window, 2 * K + 8)
    forward = densities(metric, sphere_ray(metric, unit.point, unit.components, radii))
    backward = densities(metric, sphere_ray(metric, unit.point, -unit.components, radii))
    r = np.concatenate([-radii[::-1], radii])
    values = np.concatenate([backward[::-1], forward])
    design = np.vander(r / high, K + 1, increasing=True)
    condition = float(np.linalg.cond(design))
    if condition > MAX_CONDITION:
        msg = (
            f"fit of order {K} on {window} has condition number {condition:.2e}; "
            "use a smaller order or a wider window"
        )
        raise IllConditionedFitError(msg)
    solution, *_ = np.linalg.lstsq(design, values, rcond=None)
    residual = values - design @ solution
    dof = max(len(r) - (K + 1), 1)
    sigma2 = max(float(residual @ residual) / dof, (10 * RTOL) ** 2)
    covariance = sigma2 * np.linalg.inv(design.T @ design)
    # Truncation bias: shift of the leading coefficients when two more orders are fitted.
    wider = np.vander(r / high, K + 3, increasing=True)
    refit, *_ = np.linalg.lstsq(wider, values, rcond=None)
    truncation = np.abs(refit[: K + 1] - solution)
    rescale = high ** (-np.arange(K + 1, dtype=float))
    log.debug(
        f"order {K} fit on {window}: residual {np.max(np.abs(residual)):.2e}, "
        f"truncation {np.max(truncation):.2e}"
    )
    return CoefficientFit(
        point=unit.point,
        direction=unit.components,
        coefficients=solution * rescale,
        errors=(np.sqrt(np.diag(covariance)) + truncation) * rescale,
        window=(float(low), float(high)),
        condition=condition,
        residual=float(np.max(np.abs(residual))),
    )


@dataclass(frozen=True)
class ParityReport:
    defects: FloatArray
    errors: FloatArray

    @property
    def passes(self) -> bool:
        return bool(np.all(self.defects <= self.errors + 1e-12))


def parity_check(fit_u: CoefficientFit, fit_minus_u: CoefficientFit) -> ParityReport:
    """|a_i(-u) - (-1)^i a_i(u)| per order."""
    if fit_u.order != fit_minus_u.order or not np.allclose(fit_u.window, fit_minus_u.window):
        msg = "parity needs two fits of the same order on the same window"
        raise ParameterError(msg)
    signs = (-1.0) ** np.arange(fit_u.order + 1)
    return ParityReport(
        defects=np.abs(fit_minus_u.coefficients - signs * fit_u.coefficients),
        errors=fit_u.errors + fit_minus_u.errors,
    )


@dataclass(frozen=True)
class HarmonicityReport:
    order: int
    means: FloatArray
    variations: FloatArray
    error_bars: FloatArray
    fits: tuple[CoefficientFit, ...] = ()

    @property
    def passes_at(self) -> int:
        """Largest k with every a_i, i ≤ k, constant within its error bar; -1 if none."""
        k = -1
        for variation, bar in zip(self.variations, self.error_bars, strict=True):
            if variation > bar:
                break
            k += 1
        return k

    @property
    def harmonic(self) -> bool:
        return self.passes_at >= self.order


def harmonic_up_to_order(
    metric: ChartMetric,
    K: int,  # noqa: N803
    samples: Sequence[TangentVector],
    window: tuple[float, float] | None = None,
) -> HarmonicityReport:
    if not samples:
        msg = "harmonic_up_to_order needs sample directions"
        raise ParameterError(msg)
    fit_order = min(K + 2, MAX_ORDER)
    fits = tuple(fit_coefficients(metric, u, fit_order, window) for u in samples)
    table = np.array([fit.coefficients[: K + 1] for fit in fits])
    errors = np.array([fit.errors[: K + 1] for fit in fits])
    means = table.mean(axis=0)
    variations = np.max(np.abs(table - means), axis=0)
    bars = 3 * errors.max(axis=0) + HARMONIC_FLOOR
    report = HarmonicityReport(K, means, variations, bars, fits)
    log.info(f"{metric.name}: harmonic through order {report.passes_at} of {K}")
    return report


@dataclass(frozen=True)
class VanheckeReport:
    k: int
    lhs: float
    rhs: float
    lhs_error: float
    rhs_error: float

    @property
    def inconclusive(self) -> bool:
        return self.lhs_error >= abs(self.lhs) and self.rhs_error >= abs(self.rhs)

    @property
    def agree(self) -> bool:
        return abs(self.lhs - self.rhs) <= self.lhs_error + self.rhs_error + 1e-12


def _along_geodesic(
    metric: ChartMetric, u: TangentVector, offsets: Sequence[float]
) -> list[TangentVector]:
    forward = [s for s in offsets if s >= 0]
    backward = [-s for s in offsets if s < 0][::-1]
    states = {
        s: tangent_vector(metric, st.position, st.velocity)
        for s, st in zip(forward, geodesic_flow(metric, u.point, u.components, forward), strict=True)
    }
    if backward:
        reverse = geodesic_flow(metric, u.point, -u.components, backward)
        for s, st in zip(backward, reverse, strict=True):
            states[-s] = tangent_vector(metric, st.position, -st.velocity)
    return [states[s] for s in offsets]


def vanhecke_relation_check(
    metric: ChartMetric,
    u: TangentVector,
    k: int,
    step: float = VANHECKE_STEP,
    window: tuple[float, float] | None = None,
) -> VanheckeReport:
    """2a_{2k+1}(u) against Σ_j (-1)^{2k+1-j} α^{(j)}_{2k+1-j}(0)/j!, α_i(s) = a_i(γ′_u(s))."""
    if not 0 <= k <= 2:
        msg = f"the odd-order relation is checked for k in [0, 2], got {k}"
        raise ParameterError(msg)
    unit = u.unit()
    top = 2 * k + 1
    fit_order = max(6, min(2 * k + 5, MAX_ORDER))
    window = window or curvature_window(metric, unit.point)
    offsets = [m * step for m in range(-(k + 2), k + 3)]
    fits = [
        fit_coefficients(metric, v, fit_order, window)
        for v in _along_geodesic(metric, unit, offsets)
    ]
    center = fits[len(offsets) // 2]
    s = np.asarray(offsets)
    degree = 2 * k + 3
    vander = np.vander(s, degree + 1, increasing=True)
    projector = np.linalg.pinv(vander)
    rhs, variance = 0.0, 0.0
    for j in range(1, top + 1):
        i = top - j
        alpha = np.array([fit.coefficient(i) for fit in fits])
        sigma = np.array([fit.error(i) for fit in fits])
        # Taylor coefficient c_j = α^{(j)}(0)/j!
        rhs += (-1) ** (top - j) * float(projector[j] @ alpha)
        variance += float((projector[j] ** 2) @ (sigma**2))
    return VanheckeReport(
        k=k,
        lhs=2 * center.coefficient(top),
        rhs=rhs,
        lhs_error=2 * center.error(top),
        rhs_error=math.sqrt(variance),
    )


@dataclass(frozen=True)
class SymmetryDecay:
    radii: tuple[float, ...]
    defects: tuple[float, ...]
    exponent: float


def mean_curvature_symmetry_decay(
    metric: ChartMetric, u: TangentVector, radii: Sequence[float]
) -> SymmetryDecay:
    """|h(ru) - h(ι(ru))| and the observed power of r it decays with."""
    unit = u.unit()
    defects = []
    for r in radii:
        v = unit.scaled(float(r))
        defects.append(
            abs(
                sphere_mean_curvature(metric, v)
                - sphere_mean_curvature(metric, geodesic_involution(metric, v))
            )
        )
    usable = [(r, d) for r, d in zip(radii, defects, strict=True) if d > 1e-13]
    if len(usable) >= 2:
        x = np.log([r for r, _ in usable])
        y = np.log([d for _, d in usable])
        exponent = float(np.polyfit(x, y, 1)[0])
    else:
        exponent = math.inf
    return SymmetryDecay(tuple(float(r) for r in radii), tuple(defects), exponent)


def fitted_profile(fit: CoefficientFit, name: str = "fitted") -> RadialProfile:
    """Polynomial θ̄ from a fit, with error bounds per derivative order on the window."""
    series = np.polynomial.Polynomial(fit.coefficients)
    derivatives = tuple(series.deriv(order) if order else series for order in range(4))
    high = fit.window[1]
    errors = []
    for order in range(4):
        bound = 0.0
        for i, sigma in enumerate(fit.errors):
            if i >= order:
                bound += math.perm(i, order) * high ** (i - order) * float(sigma)
        errors.append(bound)
    return RadialProfile(
        name=name,
        derivatives=tuple(
            (lambda r, p=p: float(p(r))) for p in derivatives
        ),
        provenance="fitted",
        taylor=tuple(float(c) for c in fit.coefficients),
        errors=tuple(errors),
    )

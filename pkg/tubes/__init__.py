#!/usr/bin/env python3
"""Tubes about curves: Fermi frames, normal-exponential Jacobians and tube integrals.

A point of the tube is Φ(t, s, w) = exp(s·w) with w a unit normal of the base
curve at γ(t).  Along every ray s ↦ exp(s·w) the tangent vectors of the
parallel hypersurface P(γ, s) are Jacobi fields:

- the axial field with J(0) = γ′(t) and DJ(0) = -⟨w, κ⟩ γ′/|γ′|²,
- the angular fields with J(0) = 0 and DJ(0) = e_k, e_k ⊥ w in the normal space.

Their Gram determinant is the area element of P(γ, s); the unit normal of
P(γ, s) is the ray velocity, so it is also the volume element of the tube.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre
from scipy.special import roots_legendre

from riemann import (
    RTOL,
    ChartMetric,
    Error,
    FloatArray,
    ParameterError,
    check_point,
    christoffel_array,
    geodesic_rhs,
    orthonormal_frame,
    parallel_map,
    riemann_array,
    solve,
    tangent_vector,
    weighted_sum,
)
from sphere_quadrature import SphereRule, build_rule, complete_basis, default_kind
from volume_density import integrate_ray

log = logging.getLogger(__name__)

DEFAULT_RADIAL_ORDER = 16
DEFAULT_T_PANELS = 2
DEFAULT_T_ORDER = 16
# Degree 12 angular exactness.
DEFAULT_RULE_LEVEL = 6
REGULARITY_FACTOR = 0.9
FOCUS_TOLERANCE = 1e-10
# Residual ratios for halved offsets must land in [12, 20] around the ideal 2⁴.
STEINER_RATIO_SLACK = 0.25


class SelfFocusError(Error):
    def __init__(self, msg: str, t: float, rho: float) -> None:
        super().__init__(msg)
        self.t = t
        self.rho = rho


@dataclass(frozen=True, eq=False)
class Curve:
    position: Callable[[float], FloatArray]
    velocity: Callable[[float], FloatArray]
    # Coordinate second derivative γ̈.
    acceleration: Callable[[float], FloatArray]
    start: float
    end: float
    geodesic: bool = False
    name: str = "curve"


def geodesic_curve(
    metric: ChartMetric, p: Sequence[float], u: Sequence[float], length: float
) -> Curve:
    """Unit-speed geodesic from ``p`` in the direction of ``u`` on [0, length]."""
    if length <= 0:
        msg = f"curve length must be positive, got {length}"
        raise ParameterError(msg)
    unit = tangent_vector(metric, p, u).unit()
    n = metric.dim
    solution = solve(
        metric,
        geodesic_rhs(metric),
        np.concatenate([unit.point, unit.components]),
        length,
        dense_output=True,
    )
    dense = solution.sol

    def acceleration(t: float) -> FloatArray:
        y = dense(t)
        return -np.einsum("kij,i,j->k", christoffel_array(metric, y[:n]), y[n:], y[n:])

    return Curve(
        position=lambda t: dense(t)[:n],
        velocity=lambda t: dense(t)[n:],
        acceleration=acceleration,
        start=0.0,
        end=float(length),
        geodesic=True,
        name=f"geodesic(p={unit.point.tolist()}, length={length:g})",
    )


def coordinate_circle(
    center: Sequence[float],
    radius: float,
    axes: tuple[int, int] = (0, 1),
) -> Curve:
    """t ↦ c + R(cos t·e_i + sin t·e_j) on [0, 2π]."""
    c = np.asarray(center, dtype=float)
    first, second = np.zeros_like(c), np.zeros_like(c)
    first[axes[0]], second[axes[1]] = 1.0, 1.0
    return Curve(
        position=lambda t: c + radius * (math.cos(t) * first + math.sin(t) * second),
        velocity=lambda t: radius * (-math.sin(t) * first + math.cos(t) * second),
        acceleration=lambda t: -radius * (math.cos(t) * first + math.sin(t) * second),
        start=0.0,
        end=2 * math.pi,
        name=f"circle(R={radius:g})",
    )


@dataclass(frozen=True)
class CurvePoint:
    t: float
    position: FloatArray
    velocity: FloatArray
    # κ = D_t γ′
    curvature: FloatArray
    normals: FloatArray  # (n, n - 1) Fermi frame
    speed: float


@dataclass(frozen=True, eq=False)
class FramedCurve:
    metric: ChartMetric
    curve: Curve
    normals: Callable[[float], FloatArray]

    def at(self, t: float) -> CurvePoint:
        x = self.curve.position(t)
        xdot = self.curve.velocity(t)
        gamma = christoffel_array(self.metric, x)
        kappa = self.curve.acceleration(t) + np.einsum("kij,i,j->k", gamma, xdot, xdot)
        speed = math.sqrt(float(xdot @ self.metric.g(x) @ xdot))
        return CurvePoint(t, x, xdot, kappa, self.normals(t), speed)

    def length(self, panels: int = 4, order: int = 16) -> float:
        nodes, weights = gauss_panels(self.curve.start, self.curve.end, panels, order)
        return weighted_sum(weights, [self.at(t).speed for t in nodes])

    def orthonormality_defect(self, samples: int = 17) -> float:
        worst = 0.0
        for t in np.linspace(self.curve.start, self.curve.end, samples):
            point = self.at(float(t))
            g = self.metric.g(point.position)
            nu = point.normals
            worst = max(
                worst,
                float(np.max(np.abs(nu.T @ g @ nu - np.eye(nu.shape[1])))),
                float(np.max(np.abs(nu.T @ g @ point.velocity))) / point.speed,
            )
        return worst


def frame_curve(
    metric: ChartMetric, curve: Curve, normals: FloatArray | None = None
) -> FramedCurve:
    """Transport a normal frame along ``curve`` with the normal connection.

    D_t ν = -⟨ν, κ⟩ γ′/|γ′|², which is plain parallel transport when κ = 0.
    """
    n = metric.dim
    x0 = check_point(metric, curve.position(curve.start))
    v0 = curve.velocity(curve.start)
    if normals is None:
        normals = orthonormal_frame(metric.g(x0), v0)[:, 1:]
    columns = normals.shape[1]

    def rhs(t: float, y: FloatArray) -> FloatArray:
        x, xdot = curve.position(t), curve.velocity(t)
        gamma = christoffel_array(metric, x)
        g = metric.g(x)
        nu = y.reshape(n, columns)
        kappa = curve.acceleration(t) + np.einsum("kij,i,j->k", gamma, xdot, xdot)
        coupling = np.outer(xdot, kappa @ g @ nu) / float(xdot @ g @ xdot)
        return (-np.einsum("kij,i,jm->km", gamma, xdot, nu) - coupling).ravel()

    solution = solve(
        metric,
        rhs,
        np.asarray(normals, dtype=float).ravel(),
        curve.end,
        t_start=curve.start,
        dense_output=True,
        position=lambda t, _y: curve.position(t),
    )
    dense = solution.sol
    return FramedCurve(metric, curve, lambda t: dense(t).reshape(n, columns))


def frame_geodesic(
    metric: ChartMetric, p: Sequence[float], u: Sequence[float], length: float
) -> FramedCurve:
    return frame_curve(metric, geodesic_curve(metric, p, u, length))


def gauss_panels(
    start: float, end: float, panels: int, order: int
) -> tuple[FloatArray, FloatArray]:
    if panels < 1 or order < 1:
        msg = f"need positive panel count and order, got {panels} and {order}"
        raise ParameterError(msg)
    x, w = roots_legendre(order)
    cuts = np.linspace(start, end, panels + 1)
    nodes, weights = [], []
    for a, b in zip(cuts, cuts[1:], strict=False):
        half = 0.5 * (b - a)
        nodes.append(a + half * (x + 1))
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _legendre_tail(values: FloatArray, weights: FloatArray, order: int) -> float:
    """Size of the two highest Legendre coefficients of one panel's integrand."""
    if order < 3:
        return 0.0
    x, w = roots_legendre(order)
    vander = legendre.legvander(x, order - 1)
    coefficients = (vander * w[:, None]).T @ values * (2 * np.arange(order) + 1) / 2
    half = float(np.sum(weights)) / 2
    return 2 * half * float(np.sum(np.abs(coefficients[-2:])))


@dataclass(frozen=True)
class TubeJacobian:
    factor: float
    shape_operator: FloatArray  # in an orthonormal basis of T P(γ, ρ)
    normal: FloatArray
    position: FloatArray

    @property
    def mean_curvature(self) -> float:
        return float(np.trace(self.shape_operator))


@dataclass(frozen=True)
class RaySamples:
    factor: FloatArray
    mean_curvature: FloatArray
    scalar: FloatArray  # τ^P
    normal_ricci: FloatArray  # ρ(N)
    ambient_scalar: FloatArray  # τ


def _orientation(matrix: FloatArray) -> float:
    return float(np.sign(np.linalg.det(matrix)))


def _ray(
    metric: ChartMetric,
    point: CurvePoint,
    node: FloatArray,
    radii: Sequence[float],
) -> tuple[RaySamples, list[TubeJacobian]]:
    n = metric.dim
    w = point.normals @ node
    angular = point.normals @ complete_basis(node)[:, 1:]
    g = metric.g(point.position)
    fields = np.column_stack([point.velocity, np.zeros((n, n - 2))])
    axial = -float(w @ g @ point.curvature) * point.velocity / point.speed**2
    derivatives = np.column_stack([axial, angular])
    orientation = _orientation(np.column_stack([w, point.velocity, angular]))
    ray = integrate_ray(
        metric, point.position, w, fields, derivatives, np.zeros((n, 0)), radii
    )
    samples: dict[str, list[float]] = {
        k: [] for k in ("factor", "mean_curvature", "scalar", "normal_ricci", "ambient_scalar")
    }
    jacobians = []
    for s, x, normal, j, p in zip(
        ray.radii, ray.positions, ray.velocities, ray.fields, ray.derivatives, strict=True
    ):
        gx = metric.g(x)
        gram = j.T @ gx @ j
        if s > 0:
            signed = _orientation(np.column_stack([normal, j])) * orientation
            scale = float(np.linalg.det(gram))
            if signed <= 0 or scale <= (FOCUS_TOLERANCE * s ** (n - 2)) ** 2:
                msg = f"tube focuses at t = {point.t:.6g}, rho = {s:.6g}"
                raise SelfFocusError(msg, point.t, float(s))
        riemann = riemann_array(metric, x)
        ricci = np.einsum("abad->bd", riemann)
        tau = float(np.einsum("ab,ab->", np.linalg.inv(gx), ricci))
        rho_n = float(normal @ ricci @ normal)
        if s > 0:
            lower = np.linalg.cholesky(gram)
            weingarten = j.T @ gx @ p
            weingarten = 0.5 * (weingarten + weingarten.T)
            inverse = np.linalg.inv(lower)
            shape = -inverse @ weingarten @ inverse.T
            factor = math.sqrt(float(np.linalg.det(gram)))
            trace = float(np.trace(shape))
            tau_p = tau - 2 * rho_n + trace**2 - float(np.trace(shape @ shape))
        else:
            shape = np.full((n - 1, n - 1), np.nan)
            factor, trace, tau_p = 0.0, math.nan, math.nan
        samples["factor"].append(factor)
        samples["mean_curvature"].append(trace)
        samples["scalar"].append(tau_p)
        samples["normal_ricci"].append(rho_n)
        samples["ambient_scalar"].append(tau)
        jacobians.append(TubeJacobian(factor, shape, normal, x))
    return RaySamples(**{k: np.asarray(v) for k, v in samples.items()}), jacobians


def tube_jacobian(
    metric: ChartMetric, fc: FramedCurve, t: float, w: Sequence[float], rho: float
) -> TubeJacobian:
    """Area element, shape operator and outward normal of P(γ, ρ) over (t, w).

    ``w`` holds unit normal components in the Fermi frame at γ(t).
    """
    node = np.asarray(w, dtype=float)
    if abs(float(np.linalg.norm(node)) - 1.0) > 1e-12:
        msg = "tube directions are unit vectors in the Fermi frame"
        raise ParameterError(msg)
    return _ray(metric, fc.at(t), node, [float(rho)])[1][-1]


@dataclass(frozen=True)
class TubeInvariants:
    radius: float
    volume: float
    area: float
    total_mean_curvature: float
    total_scalar_curvature: float
    normal_ricci: float
    mean_curvature_integral: float = math.nan
    ambient_scalar: float = math.nan
    length: float = math.nan
    ricci_constant: float | None = None
    scalar_constant: float | None = None
    checked_radius: float | None = None
    errors: dict[str, float] = field(default_factory=dict)

    def error(self, name: str) -> float:
        return self.errors.get(name, 0.0)


class TubeIntegrator:
    """Tube integrals about one framed curve, sharing rays across radii."""

    def __init__(
        self,
        metric: ChartMetric,
        curve: FramedCurve,
        rule: SphereRule | None = None,
        *,
        radial_order: int = DEFAULT_RADIAL_ORDER,
        t_panels: int = DEFAULT_T_PANELS,
        t_order: int = DEFAULT_T_ORDER,
        threads: int = 1,
        max_radius: float | None = None,
    ) -> None:
        n = metric.dim
        if n < 2:
            msg = "tubes live in dimension >= 2"
            raise ParameterError(msg)
        self.metric = metric
        self.curve = curve
        self.rule = rule or build_rule(n - 1, DEFAULT_RULE_LEVEL, default_kind(n - 1))
        if self.rule.dim != n - 1:
            msg = f"tube rules live on S^{n - 2}, got a rule on S^{self.rule.dim - 1}"
            raise ParameterError(msg)
        self.radial_order = radial_order
        self.t_order = t_order
        self.t_panels = t_panels
        self.threads = threads
        self.max_radius = max_radius
        self.t_nodes, self.t_weights = gauss_panels(
            curve.curve.start, curve.curve.end, t_panels, t_order
        )

    def _layout(self, r: float, order: int) -> tuple[FloatArray, FloatArray]:
        x, w = roots_legendre(order)
        return 0.5 * r * (x + 1), 0.5 * r * w

    def evaluate(self, radii: Sequence[float]) -> list[TubeInvariants]:
        radii = [float(r) for r in radii]
        if not radii or min(radii) <= 0:
            msg = "tube radii must be positive"
            raise ParameterError(msg)
        if self.max_radius is not None and max(radii) > self.max_radius:
            msg = f"radius {max(radii)} exceeds the configured cap {self.max_radius}"
            raise ParameterError(msg)
        fine_order, coarse_order = self.radial_order, max(self.radial_order // 2, 2)
        layouts = {
            r: (self._layout(r, fine_order), self._layout(r, coarse_order)) for r in radii
        }
        reach = max(radii) / REGULARITY_FACTOR
        samples = sorted(
            {
                *radii,
                reach,
                *(s for fine, coarse in layouts.values() for s in (*fine[0], *coarse[0])),
            }
        )
        index = {s: i for i, s in enumerate(samples)}
        points = [self.curve.at(float(t)) for t in self.t_nodes]
        work = [(i, j) for i in range(len(points)) for j in range(self.rule.size)]

        def run(item: tuple[int, int]) -> RaySamples:
            i, j = item
            return _ray(self.metric, points[i], self.rule.nodes[j], samples)[0]

        log.debug(
            f"tube about {self.curve.curve.name}: {len(work)} rays to radius {reach:.4g}"
        )
        rays = parallel_map(run, work, self.threads)
        shape = (len(points), self.rule.size, len(samples))
        factor = np.asarray([ray.factor for ray in rays]).reshape(shape)
        quantities = {
            "mean_curvature": np.asarray([ray.mean_curvature for ray in rays]).reshape(shape),
            "scalar": np.asarray([ray.scalar for ray in rays]).reshape(shape),
            "normal_ricci": np.asarray([ray.normal_ricci for ray in rays]).reshape(shape),
            "ambient_scalar": np.asarray([ray.ambient_scalar for ray in rays]).reshape(shape),
        }
        length = weighted_sum(self.t_weights, [p.speed for p in points])
        return [
            self._invariants(r, layouts[r], factor, quantities, index, length, reach)
            for r in radii
        ]

    def _surface(self, values: FloatArray) -> tuple[float, float]:
        """∫ dt ∫ dω of values[t, ω] with an error estimate."""
        per_t = np.array([self.rule.integrate(row) for row in values])
        total = weighted_sum(self.t_weights, per_t)
        error = 10 * RTOL * abs(total)
        for panel in range(self.t_panels):
            chunk = slice(panel * self.t_order, (panel + 1) * self.t_order)
            error += _legendre_tail(per_t[chunk], self.t_weights[chunk], self.t_order)
        across_t = np.einsum("t,tw->w", self.t_weights, values)
        error += self.rule.error_estimate(across_t)
        return total, error

    def _invariants(
        self,
        r: float,
        layout: tuple[tuple[FloatArray, FloatArray], tuple[FloatArray, FloatArray]],
        factor: FloatArray,
        quantities: dict[str, FloatArray],
        index: dict[float, int],
        length: float,
        reach: float,
    ) -> TubeInvariants:
        n = self.metric.dim
        (fine_nodes, fine_weights), (coarse_nodes, coarse_weights) = layout

        def solid(nodes: FloatArray, weights: FloatArray) -> FloatArray:
            columns = [index[s] for s in nodes]
            return np.einsum("r,twr->tw", weights, factor[:, :, columns])

        volume, volume_error = self._surface(solid(fine_nodes, fine_weights))
        coarse, _ = self._surface(solid(coarse_nodes, coarse_weights))
        volume_error += abs(volume - coarse)
        at = index[r]
        area_element = factor[:, :, at]
        area, area_error = self._surface(area_element)
        integrals, errors = {}, {"volume": volume_error, "area": area_error}
        for name, values in quantities.items():
            integrals[name], errors[name] = self._surface(values[:, :, at] * area_element)
        mean = integrals["mean_curvature"]
        errors["total_mean_curvature"] = errors.pop("mean_curvature") / (n - 1)
        errors["mean_curvature_integral"] = errors["total_mean_curvature"] * (n - 1)
        errors["total_scalar_curvature"] = errors.pop("scalar")
        return TubeInvariants(
            radius=r,
            volume=volume,
            area=area,
            total_mean_curvature=mean / (n - 1),
            total_scalar_curvature=integrals["scalar"],
            normal_ricci=integrals["normal_ricci"],
            mean_curvature_integral=mean,
            ambient_scalar=integrals["ambient_scalar"],
            length=length,
            checked_radius=reach,
            errors=errors,
        )

    def invariants(self, r: float) -> TubeInvariants:
        return self.evaluate([r])[0]

    def volume(self, r: float) -> tuple[float, float]:
        result = self.invariants(r)
        return result.volume, result.error("volume")


def tube_volume_direct(
    metric: ChartMetric,
    fc: FramedCurve,
    r: float,
    rule: SphereRule | None = None,
    radial_order: int = DEFAULT_RADIAL_ORDER,
    *,
    t_panels: int = DEFAULT_T_PANELS,
    t_order: int = DEFAULT_T_ORDER,
    threads: int = 1,
) -> float:
    integrator = TubeIntegrator(
        metric,
        fc,
        rule,
        radial_order=radial_order,
        t_panels=t_panels,
        t_order=t_order,
        threads=threads,
    )
    return integrator.volume(r)[0]


def tube_invariants(
    metric: ChartMetric,
    fc: FramedCurve,
    r: float,
    rule: SphereRule | None = None,
    *,
    radial_order: int = DEFAULT_RADIAL_ORDER,
    t_panels: int = DEFAULT_T_PANELS,
    t_order: int = DEFAULT_T_ORDER,
    threads: int = 1,
) -> TubeInvariants:
    integrator = TubeIntegrator(
        metric,
        fc,
        rule,
        radial_order=radial_order,
        t_panels=t_panels,
        t_order=t_order,
        threads=threads,
    )
    return integrator.invariants(r)


@dataclass(frozen=True)
class SteinerReport:
    radius: float
    deltas: tuple[float, ...]
    # A, -∫μ^P and ∫(ρ(N) + τ^P - τ): the Δ, Δ²/2 and Δ³/6 coefficients.
    coefficients: tuple[float, float, float]
    fd_coefficients: tuple[float, float, float]
    residuals: tuple[float, ...]
    ratios: tuple[float, ...]
    decay_order: float
    consistent: bool
    volume: float = math.nan
    volume_error: float = 0.0
    ratio_windows: tuple[tuple[float, float], ...] = ()
    # residuals at the quadrature noise floor leave the ratios meaningless
    inconclusive: bool = False
    noise: float = 0.0

    def ratio_passes(self, i: int) -> bool:
        low, high = self.ratio_windows[i]
        return not self.inconclusive and low <= self.ratios[i] <= high


def steiner_check(
    metric: ChartMetric,
    fc: FramedCurve,
    r: float,
    deltas: Sequence[float] = (0.02, 0.01),
    rule: SphereRule | None = None,
    *,
    radial_order: int = DEFAULT_RADIAL_ORDER,
    t_panels: int = DEFAULT_T_PANELS,
    t_order: int = DEFAULT_T_ORDER,
    threads: int = 1,
) -> SteinerReport:
    """Compare V(r + Δ) with its third order expansion in Δ."""
    steps = sorted((float(d) for d in deltas), reverse=True)
    if len(steps) < 2 or steps[-1] <= 0:
        msg = "steiner_check needs at least two positive offsets"
        raise ParameterError(msg)
    h = steps[-1]
    if r - 2 * h <= 0:
        msg = f"radius {r} too small for finite differences with step {h}"
        raise ParameterError(msg)
    radii = sorted({r, *(r + d for d in steps), r - h, r - 2 * h, r + 2 * h})
    integrator = TubeIntegrator(
        metric,
        fc,
        rule,
        radial_order=radial_order,
        t_panels=t_panels,
        t_order=t_order,
        threads=threads,
    )
    results = {inv.radius: inv for inv in integrator.evaluate(radii)}
    base = results[r]
    c1 = base.area
    c2 = -base.mean_curvature_integral
    c3 = base.normal_ricci + base.total_scalar_curvature - base.ambient_scalar
    volume = {radius: inv.volume for radius, inv in results.items()}
    residuals = tuple(
        abs(volume[r + d] - (volume[r] + c1 * d + c2 * d**2 / 2 + c3 * d**3 / 6))
        for d in steps
    )
    fd = (
        (volume[r + h] - volume[r - h]) / (2 * h),
        (volume[r + h] - 2 * volume[r] + volume[r - h]) / h**2,
        (volume[r + 2 * h] - 2 * volume[r + h] + 2 * volume[r - h] - volume[r - 2 * h])
        / (2 * h**3),
    )
    ratios = tuple(
        residuals[i] / residuals[i + 1] if residuals[i + 1] > 0 else math.inf
        for i in range(len(steps) - 1)
    )
    orders = [
        math.log(residuals[i] / residuals[i + 1]) / math.log(steps[i] / steps[i + 1])
        for i in range(len(steps) - 1)
        if residuals[i] > 0 and residuals[i + 1] > 0
    ]
    decay = min(orders) if orders else math.inf
    noise = RTOL * abs(volume[r]) + 1e-14
    windows = tuple(
        (
            (1 - STEINER_RATIO_SLACK) * (steps[i] / steps[i + 1]) ** 4,
            (1 + STEINER_RATIO_SLACK) * (steps[i] / steps[i + 1]) ** 4,
        )
        for i in range(len(steps) - 1)
    )
    inconclusive = min(residuals) <= noise
    consistent = not inconclusive and all(
        low <= ratio <= high for ratio, (low, high) in zip(ratios, windows, strict=True)
    )
    if inconclusive:
        log.info(f"steiner residuals at r = {r} are at the noise level {noise:.2e}")
    elif not consistent:
        log.warning(f"steiner residual ratios {ratios} outside {windows} at r = {r}")
    return SteinerReport(
        radius=r,
        deltas=tuple(steps),
        coefficients=(c1, c2, c3),
        fd_coefficients=fd,
        residuals=residuals,
        ratios=ratios,
        decay_order=decay,
        consistent=consistent,
        volume=volume[r],
        volume_error=base.error("volume"),
        ratio_windows=windows,
        inconclusive=inconclusive,
        noise=noise,
    )

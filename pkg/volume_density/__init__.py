#!/usr/bin/env python3
"""Jacobi fields along geodesics and everything derived from them.

A ray integrates the geodesic together with a matrix of Jacobi fields J, their
covariant derivatives P = DJ and a parallel frame E, all in coordinates:

    J' = P - Γ(ẋ, J)
    P' = -Γ(ẋ, P) - R(J, ẋ)ẋ
    E' = -Γ(ẋ, E)

For geodesic spheres the fields start with J(0) = 0, DJ(0) = e_i for the
normal part of an orthonormal frame, and A = Eᵀ g J is the exponential-map
Jacobian in the parallel frame.  The shape operator of the geodesic sphere is
L = -A′A⁻¹, so Euclidean spheres have mean curvature -(n - 1)/r.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre

from riemann import (
    ATOL,
    RTOL,
    ChartMetric,
    Error,
    FloatArray,
    ParameterError,
    TangentVector,
    check_point,
    christoffel_array,
    geodesic_flow,
    integrate_geodesic,
    metric_tensor,
    orthonormal_frame,
    parallel_map,
    riemann_array,
    solve,
    tangent_vector,
    weighted_sum,
)
from sphere_quadrature import SphereRule, hemisphere_weights

log = logging.getLogger(__name__)

# det A below this multiple of r^{n-1} counts as a conjugate point.
CONJUGATE_TOLERANCE = 1e-10
RADIAL_STEP = 1e-3
DEFAULT_RADIAL_ORDER = 16


class ConjugatePointError(Error):
    def __init__(
        self, msg: str, radius: float, directions: Sequence[Sequence[float]] = ()
    ) -> None:
        super().__init__(msg)
        self.radius = radius
        self.directions = [list(d) for d in directions]


@dataclass(frozen=True, eq=False)
class Ray:
    radii: FloatArray
    positions: FloatArray  # (samples, n)
    velocities: FloatArray
    fields: FloatArray  # (samples, n, k)
    derivatives: FloatArray  # (samples, n, k)
    frames: FloatArray  # (samples, n, m)


def jacobi_rhs(
    metric: ChartMetric, k: int, m: int
) -> Callable[[float, FloatArray], FloatArray]:
    n = metric.dim

    def rhs(_t: float, y: FloatArray) -> FloatArray:
        x, xdot = y[:n], y[n : 2 * n]
        j = y[2 * n : 2 * n + n * k].reshape(n, k)
        p = y[2 * n + n * k : 2 * n + 2 * n * k].reshape(n, k)
        e = y[2 * n + 2 * n * k :].reshape(n, m)
        gamma = christoffel_array(metric, x)
        riemann = riemann_array(metric, x)
        connection = np.einsum("abc,b->ac", gamma, xdot)
        tidal = np.einsum("abcd,b,d->ac", riemann, xdot, xdot)
        return np.concatenate(
            [
                xdot,
                -connection @ xdot,
                (p - connection @ j).ravel(),
                (-connection @ p - tidal @ j).ravel(),
                (-connection @ e).ravel(),
            ]
        )

    return rhs


def integrate_ray(
    metric: ChartMetric,
    x0: FloatArray,
    v0: FloatArray,
    fields: FloatArray,
    derivatives: FloatArray,
    frame: FloatArray,
    radii: Sequence[float],
) -> Ray:
    """Geodesic from (x0, v0) with Jacobi fields and a parallel frame, sampled at ``radii``."""
    n = metric.dim
    k, m = fields.shape[1], frame.shape[1]
    times = np.asarray(radii, dtype=float)
    if len(times) == 0 or times[0] < 0 or np.any(np.diff(times) < 0):
        msg = "rays are sampled at ascending nonnegative radii"
        raise ParameterError(msg)
    y0 = np.concatenate(
        [x0, v0, fields.ravel(), derivatives.ravel(), frame.ravel()]
    )
    if times[-1] == 0:
        states = np.tile(y0, (len(times), 1)).T
    else:
        states = solve(
            metric, jacobi_rhs(metric, k, m), y0, float(times[-1]), t_eval=times
        ).y
    states = states.T
    return Ray(
        radii=times,
        positions=states[:, :n],
        velocities=states[:, n : 2 * n],
        fields=states[:, 2 * n : 2 * n + n * k].reshape(len(times), n, k),
        derivatives=states[:, 2 * n + n * k : 2 * n + 2 * n * k].reshape(len(times), n, k),
        frames=states[:, 2 * n + 2 * n * k :].reshape(len(times), n, m),
    )


def sphere_ray(
    metric: ChartMetric, p: FloatArray, u: FloatArray, radii: Sequence[float]
) -> Ray:
    """Normal Jacobi fields of the geodesic spheres about ``p`` along the unit direction ``u``."""
    frame = orthonormal_frame(metric.g(p), u)
    n = metric.dim
    return integrate_ray(
        metric, p, u, np.zeros((n, n - 1)), frame[:, 1:], frame, radii
    )


def normal_blocks(metric: ChartMetric, ray: Ray) -> tuple[FloatArray, FloatArray]:
    """A and A′ in the parallel frame at every sample of a sphere ray."""
    blocks, derivative_blocks = [], []
    for x, e, j, p in zip(
        ray.positions, ray.frames, ray.fields, ray.derivatives, strict=True
    ):
        lowered = e[:, 1:].T @ metric.g(x)
        blocks.append(lowered @ j)
        derivative_blocks.append(lowered @ p)
    return np.asarray(blocks), np.asarray(derivative_blocks)


def _guard(radius: float, det: float, n: int, direction: FloatArray) -> None:
    if radius > 0 and det < CONJUGATE_TOLERANCE * radius ** (n - 1):
        msg = f"conjugate point at radius {radius:.6g} (det A = {det:.3e})"
        raise ConjugatePointError(msg, radius, [direction.tolist()])


def densities(metric: ChartMetric, ray: Ray) -> FloatArray:
    """θ at every sample radius of a sphere ray, guarding against conjugate points."""
    n = metric.dim
    blocks, _ = normal_blocks(metric, ray)
    values = []
    for radius, block in zip(ray.radii, blocks, strict=True):
        if radius == 0:
            values.append(1.0)
            continue
        det = float(np.linalg.det(block))
        _guard(float(radius), det, n, ray.velocities[0])
        values.append(det / radius ** (n - 1))
    return np.asarray(values)


@dataclass(frozen=True, eq=False)
class JacobiTransport:
    radii: FloatArray
    positions: FloatArray
    velocities: FloatArray
    frames: FloatArray  # parallel orthonormal frames, first column γ′
    A: FloatArray  # noqa: N815
    A_prime: FloatArray  # noqa: N815
    curvature: FloatArray  # ⟨R(e_i, γ′)γ′, e_j⟩ over the normal frame

    def full_block(self, index: int) -> FloatArray:
        """n×n Jacobian including the radial field r·γ′."""
        n = self.A.shape[1] + 1
        block = np.zeros((n, n))
        block[0, 0] = self.radii[index]
        block[1:, 1:] = self.A[index]
        return block

    def wronskian_defect(self) -> float:
        w = np.einsum("sji,sjk->sik", self.A_prime, self.A) - np.einsum(
            "sji,sjk->sik", self.A, self.A_prime
        )
        return float(np.max(np.abs(w)))

    def theta(self) -> FloatArray:
        n = self.A.shape[1] + 1
        dets = np.linalg.det(self.A)
        with np.errstate(divide="ignore", invalid="ignore"):
            values = dets / self.radii ** (n - 1)
        return np.where(self.radii == 0, 1.0, values)


def _radii(r_max: float, samples: int | Sequence[float]) -> list[float]:
    if isinstance(samples, int):
        if samples < 1:
            msg = f"need at least one sample radius, got {samples}"
            raise ParameterError(msg)
        return [r_max * (i + 1) / samples for i in range(samples)]
    radii = sorted(float(s) for s in samples)
    if radii and radii[-1] > r_max:
        msg = f"sample radius {radii[-1]} exceeds r_max = {r_max}"
        raise ParameterError(msg)
    return radii


def jacobi_transport(
    metric: ChartMetric,
    u: TangentVector,
    r_max: float,
    samples: int | Sequence[float] = 16,
) -> JacobiTransport:
    if abs(u.norm - 1.0) > 1e-9:
        msg = f"jacobi_transport needs a unit vector, got norm {u.norm}"
        raise ParameterError(msg)
    radii = _radii(r_max, samples)
    ray = sphere_ray(metric, u.point, u.components, radii)
    blocks, derivative_blocks = normal_blocks(metric, ray)
    n = metric.dim
    for radius, block in zip(ray.radii, blocks, strict=True):
        _guard(float(radius), float(np.linalg.det(block)), n, u.components)
    curvature = []
    for x, xdot, e in zip(ray.positions, ray.velocities, ray.frames, strict=True):
        normal = e[:, 1:]
        image = np.einsum("abcd,b,ci,d->ai", riemann_array(metric, x), xdot, normal, xdot)
        operator = normal.T @ metric.g(x) @ image
        curvature.append(0.5 * (operator + operator.T))
    return JacobiTransport(
        radii=ray.radii,
        positions=ray.positions,
        velocities=ray.velocities,
        frames=ray.frames,
        A=blocks,
        A_prime=derivative_blocks,
        curvature=np.asarray(curvature),
    )


def _polar(metric: ChartMetric, v: TangentVector) -> tuple[float, FloatArray]:
    if v.norm == 0:
        msg = "the volume density is evaluated at nonzero vectors"
        raise ParameterError(msg)
    check_point(metric, v.point)
    return v.norm, v.components / v.norm


def theta(metric: ChartMetric, v: TangentVector) -> float:
    """Volume density θ(v) = det A(‖v‖) / ‖v‖^{n-1}."""
    r, u = _polar(metric, v)
    return float(densities(metric, sphere_ray(metric, v.point, u, [r]))[-1])


def geodesic_involution(metric: ChartMetric, v: TangentVector) -> TangentVector:
    """ι(v) = -γ′_v(1), based at exp(v)."""
    end = integrate_geodesic(metric, v.point, v.components, 1.0)
    return tangent_vector(metric, end.position, -end.velocity)


def sphere_shape_operator(metric: ChartMetric, v: TangentVector) -> FloatArray:
    """L_v = -A′A⁻¹ in the parallel frame at exp(v), symmetrized."""
    r, u = _polar(metric, v)
    ray = sphere_ray(metric, v.point, u, [r])
    blocks, derivative_blocks = normal_blocks(metric, ray)
    _guard(r, float(np.linalg.det(blocks[-1])), metric.dim, u)
    shape = -derivative_blocks[-1] @ np.linalg.inv(blocks[-1])
    return 0.5 * (shape + shape.T)


def sphere_mean_curvature(metric: ChartMetric, v: TangentVector) -> float:
    return float(np.trace(sphere_shape_operator(metric, v)))


def radial_derivative(
    metric: ChartMetric, p: FloatArray, u: FloatArray, r: float
) -> tuple[float, float]:
    """θ(ru) and ∂_rθ(ru) by the five-point stencil with step 1e-3·r."""
    h = RADIAL_STEP * r
    radii = [r - 2 * h, r - h, r, r + h, r + 2 * h]
    values = densities(metric, sphere_ray(metric, p, u, radii))
    derivative = (-values[4] + 8 * values[3] - 8 * values[1] + values[0]) / (12 * h)
    return float(values[2]), float(derivative)


def radial_mean_curvature(metric: ChartMetric, v: TangentVector) -> float:
    """h = -(n - 1)/r - ∂_rθ/θ."""
    r, u = _polar(metric, v)
    value, derivative = radial_derivative(metric, v.point, u, r)
    return -(metric.dim - 1) / r - derivative / value


@dataclass(frozen=True)
class BallVolumes:
    radius: float
    sphere_area: float
    ball_volume: float
    half_ball_volume: float
    opposite_half_ball_volume: float
    # b′(r) and ∫_{S⁺(u)} ⟨u, v⟩ θ(rv) r^{n-1} dv
    half_sphere_area: float
    moment_volume: float
    errors: dict[str, float] = field(default_factory=dict)

    def error(self, name: str) -> float:
        return self.errors.get(name, 0.0)


def _radial_rule(r: float, order: int) -> tuple[FloatArray, FloatArray]:
    x, w = roots_legendre(order)
    return 0.5 * r * (x + 1), 0.5 * r * w


def ball_volume_table(
    metric: ChartMetric,
    p: FloatArray,
    u: FloatArray,
    radii: Sequence[float],
    rule: SphereRule,
    radial_order: int = DEFAULT_RADIAL_ORDER,
    threads: int = 1,
) -> list[BallVolumes]:
    """Ball, sphere and half-ball volumes for several radii from one set of rays."""
    point = check_point(metric, p)
    g = metric_tensor(metric, point)
    n = metric.dim
    if rule.dim != n:
        msg = f"sphere rule of dimension {rule.dim} on a {n}-dimensional space"
        raise ParameterError(msg)
    base = orthonormal_frame(g, np.asarray(u, dtype=float))
    radii = [float(r) for r in radii]
    if not radii or min(radii) <= 0:
        msg = "ball volumes need positive radii"
        raise ParameterError(msg)
    layouts = {
        r: (_radial_rule(r, radial_order), _radial_rule(r, max(radial_order // 2, 2)))
        for r in radii
    }
    samples = sorted(
        {*radii, *(x for fine, coarse in layouts.values() for x in (*fine[0], *coarse[0]))}
    )
    index = {s: i for i, s in enumerate(samples)}

    def along(node: FloatArray) -> FloatArray | None:
        direction = base @ node
        try:
            return densities(metric, sphere_ray(metric, point, direction, samples))
        except ConjugatePointError as e:
            log.debug(f"conjugate point along {direction.tolist()} at {e.radius:.6g}")
            return None

    results = parallel_map(along, list(rule.nodes), threads)
    bad = [
        (base @ node).tolist()
        for node, values in zip(rule.nodes, results, strict=True)
        if values is None
    ]
    if bad:
        msg = f"conjugate points in {len(bad)} of {rule.size} directions"
        raise ConjugatePointError(msg, max(radii), bad)
    table = np.asarray(results)  # (directions, samples)
    axis = np.zeros(n)
    axis[0] = 1.0
    upper = hemisphere_weights(rule, axis)
    lower = hemisphere_weights(rule, -axis)
    cosines = rule.nodes[:, 0]

    def shell(weights: FloatArray, s: float, kernel: FloatArray | None = None) -> float:
        column = table[:, index[s]]
        if kernel is not None:
            column = column * kernel
        return s ** (n - 1) * weighted_sum(weights, column)

    def solid(weights: FloatArray, layout: tuple[FloatArray, FloatArray]) -> float:
        nodes, w = layout
        return weighted_sum(w, [shell(weights, s) for s in nodes])

    out = []
    for r in radii:
        fine, coarse = layouts[r]
        quantities = {
            "sphere_area": shell(rule.weights, r),
            "ball_volume": solid(rule.weights, fine),
            "half_ball_volume": solid(upper, fine),
            "opposite_half_ball_volume": solid(lower, fine),
            "half_sphere_area": shell(upper, r),
            "moment_volume": shell(upper, r, cosines),
        }
        errors = {}
        for name, value in quantities.items():
            # Shell quantities only carry the angular and ODE error.
            error = 10 * RTOL * abs(value) + ATOL
            if name in ("ball_volume", "half_ball_volume", "opposite_half_ball_volume"):
                weights = {
                    "ball_volume": rule.weights,
                    "half_ball_volume": upper,
                    "opposite_half_ball_volume": lower,
                }[name]
                error += abs(value - solid(weights, coarse))
            error += _angular_error(rule, table[:, index[r]], r, n)
            errors[name] = error
        out.append(BallVolumes(radius=r, **quantities, errors=errors))
    return out


def _angular_error(rule: SphereRule, values: FloatArray, r: float, n: int) -> float:
    return r ** (n - 1) * rule.error_estimate(values)


def ball_volumes(
    metric: ChartMetric,
    p: FloatArray,
    u: FloatArray,
    r: float,
    rule: SphereRule,
    radial_order: int = DEFAULT_RADIAL_ORDER,
    threads: int = 1,
) -> BallVolumes:
    return ball_volume_table(metric, p, u, [r], rule, radial_order, threads)[0]


def half_ball_moment_volume(
    metric: ChartMetric, p: FloatArray, u: FloatArray, r: float, rule: SphereRule
) -> float:
    """∫_{S⁺(u)} ⟨u, v⟩ θ(rv) r^{n-1} dv; equals ω_{n-1} r^{n-1} θ̄(r) in harmonic spaces."""
    return ball_volumes(metric, p, u, r, rule).moment_volume


@dataclass(frozen=True)
class DAtriReport:
    half_ball_defect: float
    half_ball_error: float
    first_integral_defect: float
    first_integral_error: float
    half_ball_volumes: tuple[float, ...] = ()
    first_integral_values: tuple[float, ...] = ()


def datri_checks(
    metric: ChartMetric,
    samples: Sequence[TangentVector],
    radii: Sequence[float],
    rule: SphereRule,
    *,
    times: Sequence[float] = (0.0, 0.1, 0.2, 0.3),
    radial_order: int = DEFAULT_RADIAL_ORDER,
    threads: int = 1,
) -> DAtriReport:
    """Half-ball homogeneity and first-integral defects over sampled geodesics.

    The first defect compares b(r; u) across all samples, the second the
    spread of t ↦ θ(s·γ′(t)) along the geodesic of every sample for s in ``radii``.
    """
    half_balls, half_errors = [], []
    for sample in samples:
        unit = sample.unit()
        for volumes in ball_volume_table(
            metric, unit.point, unit.components, radii, rule, radial_order, threads
        ):
            half_balls.append((volumes.radius, volumes.half_ball_volume))
            half_errors.append(volumes.error("half_ball_volume"))
    half_defect = 0.0
    for r in radii:
        values = [b for radius, b in half_balls if radius == float(r)]
        half_defect = max(half_defect, max(values) - min(values))
    top_errors = sorted(half_errors)[-2:]

    first_values, first_defect, first_error = [], 0.0, 0.0
    ordered_times = sorted(float(t) for t in times)
    for sample in samples:
        unit = sample.unit()
        states = geodesic_flow(metric, unit.point, unit.components, ordered_times)
        for s in radii:
            along = [
                theta(metric, tangent_vector(metric, state.position, float(s) * state.velocity))
                for state in states
            ]
            first_values.extend(along)
            first_defect = max(first_defect, max(along) - min(along))
            first_error = max(first_error, 20 * RTOL * max(abs(a) for a in along))
    return DAtriReport(
        half_ball_defect=half_defect,
        half_ball_error=sum(top_errors),
        first_integral_defect=first_defect,
        first_integral_error=first_error,
        half_ball_volumes=tuple(b for _, b in half_balls),
        first_integral_values=tuple(first_values),
    )


def unit_tangent(metric: ChartMetric, p: Sequence[float], u: Sequence[float]) -> TangentVector:
    """Normalize coordinate components ``u`` at ``p`` to unit length."""
    return tangent_vector(metric, p, u).unit()


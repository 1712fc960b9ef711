#!/usr/bin/env python3
"""Chart metrics, Levi-Civita connection, curvature and the geodesic ODE engine.

Every other package talks to a manifold through a :class:`ChartMetric`: one
coordinate box, a metric tensor field and optional analytic providers for
the Christoffel symbols, their derivatives and the Riemann tensor.  Whatever
is missing is filled in by fourth order central differences.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import warnings
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, TypeVar

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import solve_ivp

log = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
Provider = Callable[[FloatArray], FloatArray]

RTOL = 1e-10
ATOL = 1e-12
FD_STEP = 1e-4
# Largest tolerated disagreement between the h and 2h finite-difference curvature.
PRECISION_TOLERANCE = 1e-6
SYMMETRY_TOLERANCE = 1e-12

T = TypeVar("T")
R = TypeVar("R")


class Error(Exception):
    pass


class DomainError(Error):
    pass


class MetricError(Error):
    pass


class EscapeError(Error):
    def __init__(self, msg: str, parameter: float) -> None:
        super().__init__(msg)
        self.parameter = parameter


class StiffnessError(Error):
    pass


class ParameterError(Error):
    pass


class UnsupportedError(Error):
    pass


class PrecisionWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class ChartMetric:
    name: str
    dim: int
    metric_fn: Provider
    # Positive inside the chart, zero on its boundary.
    margin_fn: Callable[[FloatArray], float]
    christoffel_fn: Provider | None = None
    christoffel_derivative_fn: Provider | None = None
    riemann_fn: Provider | None = None
    center: tuple[float, ...] | None = None
    coordinate_scale: float = 1.0
    curvature_available: bool = True

    def __post_init__(self) -> None:
        if self.dim < 1:
            msg = f"chart {self.name} needs a positive dimension, got {self.dim}"
            raise ParameterError(msg)

    def g(self, x: FloatArray) -> FloatArray:
        return np.asarray(self.metric_fn(np.asarray(x, dtype=float)), dtype=float)

    def contains(self, x: FloatArray) -> bool:
        return bool(self.margin_fn(np.asarray(x, dtype=float)) > 0)

    def origin(self) -> FloatArray:
        if self.center is None:
            return np.zeros(self.dim)
        return np.array(self.center, dtype=float)

    @property
    def analytic(self) -> bool:
        return self.christoffel_fn is not None

    def with_finite_differences(self) -> ChartMetric:
        return dataclasses.replace(
            self,
            name=f"{self.name} (finite differences)",
            christoffel_fn=None,
            christoffel_derivative_fn=None,
            riemann_fn=None,
        )


@dataclass(frozen=True, eq=False)
class TangentVector:
    point: FloatArray
    components: FloatArray
    norm: float

    @property
    def dim(self) -> int:
        return len(self.components)

    def unit(self) -> TangentVector:
        if self.norm == 0:
            msg = "the zero vector has no direction"
            raise DomainError(msg)
        return TangentVector(self.point, self.components / self.norm, 1.0)

    def scaled(self, factor: float) -> TangentVector:
        return TangentVector(
            self.point, factor * self.components, abs(factor) * self.norm
        )

    def __neg__(self) -> TangentVector:
        return TangentVector(self.point, -self.components, self.norm)


@dataclass(frozen=True, eq=False)
class GeodesicState:
    position: FloatArray
    velocity: FloatArray
    t: float


@dataclass(frozen=True, eq=False)
class Path:
    """A piecewise smooth coordinate path on [start, end]."""

    position: Callable[[float], FloatArray]
    velocity: Callable[[float], FloatArray]
    start: float
    end: float
    breakpoints: tuple[float, ...] = ()

    def segments(self) -> list[tuple[float, float]]:
        cuts = [self.start, *sorted(self.breakpoints), self.end]
        return [(a, b) for a, b in zip(cuts, cuts[1:], strict=False) if b > a]


@dataclass(frozen=True, eq=False)
class CurvatureData:
    point: FloatArray
    metric: FloatArray
    riemann: FloatArray  # riemann[a, b, c, d] = R^a_{bcd}, R(∂_c, ∂_d)∂_b = R^a_{bcd} ∂_a
    ricci: FloatArray
    scalar: float

    def ricci_form(self, u: FloatArray, w: FloatArray | None = None) -> float:
        w = u if w is None else w
        return float(u @ self.ricci @ w)

    def lowered(self) -> FloatArray:
        return np.einsum("ae,ebcd->abcd", self.metric, self.riemann)

    def jacobi_operator(self, velocity: FloatArray, frame: FloatArray) -> FloatArray:
        """Matrix ⟨R(e_i, γ′)γ′, e_j⟩ for the columns e_i of ``frame``."""
        image = np.einsum(
            "abcd,b,ci,d->ai", self.riemann, velocity, frame, velocity
        )
        operator = frame.T @ self.metric @ image
        return 0.5 * (operator + operator.T)

    def bianchi_residual(self) -> float:
        r = self.riemann
        cyclic = r + r.transpose(0, 2, 3, 1) + r.transpose(0, 3, 1, 2)
        return float(np.max(np.abs(cyclic)))


def check_point(metric: ChartMetric, x: Iterable[float]) -> FloatArray:
    point = np.asarray(x, dtype=float)
    if point.shape != (metric.dim,):
        msg = f"expected {metric.dim} coordinates for {metric.name}, got shape {point.shape}"
        raise DomainError(msg)
    if not metric.contains(point):
        msg = f"point {point.tolist()} lies outside the chart of {metric.name}"
        raise DomainError(msg)
    return point


def metric_tensor(metric: ChartMetric, x: Iterable[float]) -> FloatArray:
    point = check_point(metric, x)
    g = metric.g(point)
    scale = max(float(np.max(np.abs(g))), 1.0)
    if np.max(np.abs(g - g.T)) > SYMMETRY_TOLERANCE * scale:
        msg = f"metric of {metric.name} is not symmetric at {point.tolist()}"
        raise MetricError(msg)
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError as e:
        msg = f"metric of {metric.name} is not positive definite at {point.tolist()}"
        raise MetricError(msg) from e
    return g


def tangent_vector(
    metric: ChartMetric, point: Iterable[float], components: Iterable[float]
) -> TangentVector:
    p = check_point(metric, point)
    v = np.asarray(components, dtype=float)
    g = metric.g(p)
    return TangentVector(p, v, math.sqrt(max(float(v @ g @ v), 0.0)))


def inner(g: FloatArray, a: FloatArray, b: FloatArray) -> float:
    return float(a @ g @ b)


def central_difference(fn: Provider, x: FloatArray, h: float) -> FloatArray:
    """Fourth order stencil; the derivative direction is the leading axis."""
    rows = []
    for k in range(len(x)):
        step = np.zeros_like(x)
        step[k] = h
        rows.append(
            (-fn(x + 2 * step) + 8 * fn(x + step) - 8 * fn(x - step) + fn(x - 2 * step))
            / (12 * h)
        )
    return np.asarray(rows, dtype=float)


def levi_civita(g: FloatArray, dg: FloatArray) -> FloatArray:
    """Γ^k_ij from g and dg[m, i, j] = ∂_m g_ij."""
    g_inv = np.linalg.inv(g)
    lowered = (
        np.einsum("ilj->lij", dg) + np.einsum("jli->lij", dg) - dg
    ) / 2
    gamma = np.einsum("kl,lij->kij", g_inv, lowered)
    return 0.5 * (gamma + gamma.transpose(0, 2, 1))


def christoffel_array(metric: ChartMetric, x: FloatArray) -> FloatArray:
    """Unchecked Christoffel provider used inside ODE right-hand sides."""
    if metric.christoffel_fn is not None:
        return np.asarray(metric.christoffel_fn(x), dtype=float)
    h = FD_STEP * metric.coordinate_scale
    return levi_civita(metric.g(x), central_difference(metric.g, x, h))


def christoffel_derivative_array(
    metric: ChartMetric, x: FloatArray, step: float | None = None
) -> FloatArray:
    """dΓ[m, k, i, j] = ∂_m Γ^k_ij."""
    if metric.christoffel_derivative_fn is not None and step is None:
        return np.asarray(metric.christoffel_derivative_fn(x), dtype=float)
    h = FD_STEP * metric.coordinate_scale if step is None else step
    return central_difference(lambda y: christoffel_array(metric, y), x, h)


def riemann_from_connection(gamma: FloatArray, dgamma: FloatArray) -> FloatArray:
    return (
        np.einsum("cadb->abcd", dgamma)
        - np.einsum("dacb->abcd", dgamma)
        + np.einsum("ace,edb->abcd", gamma, gamma)
        - np.einsum("ade,ecb->abcd", gamma, gamma)
    )


def riemann_array(metric: ChartMetric, x: FloatArray) -> FloatArray:
    if metric.riemann_fn is not None:
        return np.asarray(metric.riemann_fn(x), dtype=float)
    return riemann_from_connection(
        christoffel_array(metric, x), christoffel_derivative_array(metric, x)
    )


def christoffel(metric: ChartMetric, x: Iterable[float]) -> FloatArray:
    point = check_point(metric, x)
    metric_tensor(metric, point)
    gamma = christoffel_array(metric, point)
    return 0.5 * (gamma + gamma.transpose(0, 2, 1))


def christoffel_derivative(metric: ChartMetric, x: Iterable[float]) -> FloatArray:
    point = check_point(metric, x)
    return christoffel_derivative_array(metric, point)


def curvature(metric: ChartMetric, x: Iterable[float]) -> CurvatureData:
    point = check_point(metric, x)
    g = metric_tensor(metric, point)
    if not metric.curvature_available:
        msg = f"{metric.name} does not provide second derivatives of its metric"
        raise UnsupportedError(msg)
    riemann = riemann_array(metric, point)
    if metric.riemann_fn is None and metric.christoffel_derivative_fn is None:
        h = FD_STEP * metric.coordinate_scale
        coarse = riemann_from_connection(
            christoffel_array(metric, point),
            christoffel_derivative_array(metric, point, step=2 * h),
        )
        noise = float(np.max(np.abs(coarse - riemann)))
        scale = max(float(np.max(np.abs(riemann))), 1.0)
        if noise > PRECISION_TOLERANCE * scale:
            warnings.warn(
                f"finite-difference curvature of {metric.name} at {point.tolist()} "
                f"is noisy ({noise:.2e})",
                PrecisionWarning,
                stacklevel=2,
            )
            log.warning(f"noisy curvature on {metric.name}: {noise:.2e}")
    ricci = np.einsum("abad->bd", riemann)
    ricci = 0.5 * (ricci + ricci.T)
    scalar = float(np.einsum("ab,ab->", np.linalg.inv(g), ricci))
    return CurvatureData(point, g, riemann, ricci, scalar)


def orthonormal_frame(g: FloatArray, first: FloatArray | None = None) -> FloatArray:
    """Columns orthonormal for ``g``; the first one along ``first`` if given.

    The completion walks the coordinate axes, always taking the one with the
    largest remaining component, so equal inputs give equal frames.
    """
    n = g.shape[0]
    basis: list[FloatArray] = []

    def residual(c: FloatArray) -> FloatArray:
        for _ in range(2):
            for b in basis:
                c = c - float(b @ g @ c) * b
        return c

    if first is not None:
        f = residual(np.asarray(first, dtype=float))
        length = math.sqrt(float(f @ g @ f))
        if length == 0:
            msg = "cannot build a frame around the zero vector"
            raise DomainError(msg)
        basis.append(f / length)
    candidates = list(np.eye(n))
    while len(basis) < n:
        best, best_norm, best_index = candidates[0], -1.0, 0
        for index, c in enumerate(candidates):
            r = residual(c)
            norm = math.sqrt(max(float(r @ g @ r), 0.0))
            if norm > best_norm + 1e-14:
                best, best_norm, best_index = r, norm, index
        candidates.pop(best_index)
        basis.append(best / best_norm)
    return np.column_stack(basis)


def solve(
    metric: ChartMetric,
    rhs: Callable[[float, FloatArray], FloatArray],
    y0: FloatArray,
    t_end: float,
    *,
    t_start: float = 0.0,
    t_eval: Sequence[float] | None = None,
    dense_output: bool = False,
    position: Callable[[float, FloatArray], FloatArray] | None = None,
) -> Any:
    """Integrate ``rhs`` with DOP853 and turn solver failures into errors."""
    n = metric.dim
    locate = position if position is not None else (lambda _t, y: y[:n])
    if metric.margin_fn(locate(t_start, y0)) <= 0:
        msg = f"orbit starts outside the chart of {metric.name}"
        raise DomainError(msg)

    def escape(t: float, y: FloatArray) -> float:
        return float(metric.margin_fn(locate(t, y)))

    escape.terminal = True  # type: ignore[attr-defined]
    escape.direction = -1  # type: ignore[attr-defined]
    solution = solve_ivp(
        rhs,
        (t_start, t_end),
        y0,
        method="DOP853",
        rtol=RTOL,
        atol=ATOL,
        t_eval=t_eval,
        dense_output=dense_output,
        events=escape,
    )
    log.debug(
        f"{metric.name}: integrated [{t_start}, {t_end}] with {solution.nfev} evaluations"
    )
    if solution.status == 1:
        exit_parameter = float(solution.t_events[0][0])
        msg = f"orbit left the chart of {metric.name} at parameter {exit_parameter:.6g}"
        raise EscapeError(msg, exit_parameter)
    if solution.status != 0:
        msg = f"integration on {metric.name} failed: {solution.message}"
        raise StiffnessError(msg)
    return solution


def geodesic_rhs(metric: ChartMetric) -> Callable[[float, FloatArray], FloatArray]:
    n = metric.dim

    def rhs(_t: float, y: FloatArray) -> FloatArray:
        x, xdot = y[:n], y[n:]
        gamma = christoffel_array(metric, x)
        return np.concatenate([xdot, -np.einsum("kij,i,j->k", gamma, xdot, xdot)])

    return rhs


def integrate_geodesic(
    metric: ChartMetric, p: Iterable[float], v: Iterable[float], t: float
) -> GeodesicState:
    point = check_point(metric, p)
    velocity = np.asarray(v, dtype=float)
    if not np.any(velocity):
        msg = "geodesics need a nonzero initial velocity"
        raise DomainError(msg)
    if t == 0:
        return GeodesicState(point, velocity, 0.0)
    solution = solve(
        metric, geodesic_rhs(metric), np.concatenate([point, velocity]), t
    )
    end = solution.y[:, -1]
    return GeodesicState(end[: metric.dim], end[metric.dim :], float(t))


def geodesic_flow(
    metric: ChartMetric,
    p: Iterable[float],
    v: Iterable[float],
    t_values: Sequence[float],
) -> list[GeodesicState]:
    """States at ascending nonnegative parameters from one integration."""
    point = check_point(metric, p)
    velocity = np.asarray(v, dtype=float)
    times = [float(t) for t in t_values]
    if any(b < a for a, b in zip(times, times[1:], strict=False)) or times[0] < 0:
        msg = "geodesic_flow expects ascending nonnegative parameters"
        raise ParameterError(msg)
    if times[-1] == 0:
        return [GeodesicState(point, velocity, 0.0) for _ in times]
    solution = solve(
        metric,
        geodesic_rhs(metric),
        np.concatenate([point, velocity]),
        times[-1],
        t_eval=times,
    )
    n = metric.dim
    return [
        GeodesicState(solution.y[:n, i], solution.y[n:, i], times[i])
        for i in range(len(times))
    ]


def parallel_transport(
    metric: ChartMetric, curve: Path, w: Iterable[float]
) -> FloatArray:
    """Transport ``w`` (a vector or a matrix of column vectors) along ``curve``."""
    vectors = np.asarray(w, dtype=float)
    shape = vectors.shape
    n = metric.dim
    if shape[0] != n:
        msg = f"expected vectors with {n} components, got shape {shape}"
        raise DomainError(msg)
    state = vectors.reshape(n, -1)
    columns = state.shape[1]

    def rhs(t: float, y: FloatArray) -> FloatArray:
        x = curve.position(t)
        gamma = christoffel_array(metric, x)
        current = y.reshape(n, columns)
        return (-np.einsum("kij,i,jm->km", gamma, curve.velocity(t), current)).ravel()

    for a, b in curve.segments():
        solution = solve(
            metric,
            rhs,
            state.ravel(),
            b,
            t_start=a,
            position=lambda t, _y: curve.position(t),
        )
        state = solution.y[:, -1].reshape(n, columns)
    return state.reshape(shape)


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: int = 1) -> list[R]:
    """Ordered map, optionally on a thread pool; result order never depends on ``threads``."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def weighted_sum(weights: Iterable[float], values: Iterable[float]) -> float:
    return math.fsum(
        float(w) * float(v) for w, v in zip(weights, values, strict=True)
    )

#!/usr/bin/env python3
"""Benchmark geometries and the closed-form density profiles of the harmonic ones.

Chart choices:

- ``euclidean``: Cartesian coordinates.
- ``sphere``: gnomonic (central projection) coordinates around the north pole,
  covering the open hemisphere; ``chart="polar"`` gives (θ, φ) for n = 2.
- ``hyperbolic``: Poincaré ball (default) or upper half space.
- ``product``: block-diagonal metric of the factor charts, coordinates concatenated.
- ``damek_ricci``: global (v, z, t) coordinates, see :mod:`model_spaces.damek_ricci`.
- ``ellipsoid``: the upper sheet y > 0 of x²/a² + y²/b² + z²/c² = 1 as a graph over (x, z).
- ``generic``: a metric matrix of sympy expression strings in named coordinates.
"""

from __future__ import annotations

import functools
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import sympy as sp

from riemann import (
    ChartMetric,
    FloatArray,
    ParameterError,
    Provider,
    UnsupportedError,
    christoffel_array,
    christoffel_derivative_array,
    riemann_array,
)
from riemann.symbolic import parse_metric, symbolic_chart

from .damek_ricci import AlgebraError, damek_ricci_space
from .profiles import RadialProfile, profile_from_expression

__all__ = [
    "AlgebraError",
    "ParameterError",
    "RadialProfile",
    "SpaceSpec",
    "UnsupportedError",
    "closed_form_profile",
    "make_space",
]

log = logging.getLogger(__name__)

KINDS = (
    "euclidean",
    "sphere",
    "hyperbolic",
    "product",
    "damek_ricci",
    "ellipsoid",
    "generic",
)
HARMONIC_KINDS = ("euclidean", "sphere", "hyperbolic", "damek_ricci")

PRESETS: dict[str, tuple[str, dict[str, Any]]] = {
    "r3": ("euclidean", {"n": 3}),
    "r5": ("euclidean", {"n": 5}),
    "s2": ("sphere", {"n": 2}),
    "s3": ("sphere", {"n": 3}),
    "h2": ("hyperbolic", {"n": 2}),
    "h3": ("hyperbolic", {"n": 3}),
    "s2xr": (
        "product",
        {"factors": [{"kind": "sphere", "n": 2}, {"kind": "euclidean", "n": 1}]},
    ),
    "dr21": ("damek_ricci", {"p": 2, "q": 1}),
    "dr43": ("damek_ricci", {"p": 4, "q": 3}),
    "ellipsoid": ("ellipsoid", {}),
}

DEFAULT_SEMI_AXES = (1.0, 1.0, 1.3)


@dataclass(frozen=True)
class SpaceSpec:
    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def preset(cls, name: str) -> SpaceSpec:
        try:
            kind, params = PRESETS[name]
        except KeyError as e:
            msg = f"unknown space preset {name!r}, choose one of {sorted(PRESETS)}"
            raise ParameterError(msg) from e
        return cls(kind, dict(params))

    @classmethod
    def from_mapping(cls, data: dict[str, Any]) -> SpaceSpec:
        params = {k: v for k, v in data.items() if k != "kind"}
        if data.get("kind") in PRESETS and data["kind"] not in KINDS:
            base = cls.preset(data["kind"])
            return cls(base.kind, {**base.params, **params})
        return cls(str(data.get("kind")), params)

    def resolved(self) -> SpaceSpec:
        if self.kind in KINDS:
            return self
        if self.kind in PRESETS:
            base = SpaceSpec.preset(self.kind)
            return SpaceSpec(base.kind, {**base.params, **self.params})
        msg = f"unknown space kind {self.kind!r}"
        raise ParameterError(msg)

    @property
    def dim(self) -> int:
        spec = self.resolved()
        if spec.kind == "product":
            return sum(
                SpaceSpec.from_mapping(f).dim for f in spec.params.get("factors", [])
            )
        if spec.kind == "damek_ricci":
            return int(spec.params["p"]) + int(spec.params["q"]) + 1
        if spec.kind == "ellipsoid":
            return 2
        if spec.kind == "generic":
            return len(spec.params.get("coordinates", ()))
        if spec.kind == "sphere" and spec.params.get("chart") == "polar":
            return 2
        return int(spec.params.get("n", 3))

    def describe(self) -> str:
        if "label" in self.params:
            return str(self.params["label"])
        spec = self.resolved()
        if spec.kind == "product":
            return " x ".join(
                SpaceSpec.from_mapping(f).describe() for f in spec.params["factors"]
            )
        shown = {
            k: v
            for k, v in sorted(spec.params.items())
            if k in ("n", "curvature", "p", "q", "semi_axes", "chart")
        }
        if spec.kind in ("euclidean", "sphere", "hyperbolic") and "n" not in shown:
            shown["n"] = spec.dim
        inner = ",".join(f"{k}={v}" for k, v in shown.items())
        return f"{spec.kind}({inner})" if inner else spec.kind


def _positive(params: dict[str, Any], key: str, default: float) -> float:
    value = float(params.get(key, default))
    if not value > 0:
        msg = f"{key} must be positive, got {value}"
        raise ParameterError(msg)
    return value


def _constant_curvature_riemann(metric_fn: Provider, k: float) -> Provider:
    def riemann(x: FloatArray) -> FloatArray:
        g = metric_fn(x)
        eye = np.eye(len(x))
        return k * (
            np.einsum("db,ac->abcd", g, eye) - np.einsum("cb,ad->abcd", g, eye)
        )

    return riemann


def euclidean_space(n: int, bound: float = 1e6) -> ChartMetric:
    return ChartMetric(
        name=f"euclidean(n={n})",
        dim=n,
        metric_fn=lambda _x: np.eye(n),
        margin_fn=lambda x: bound - float(np.max(np.abs(x))),
        christoffel_fn=lambda _x: np.zeros((n, n, n)),
        christoffel_derivative_fn=lambda _x: np.zeros((n, n, n, n)),
        riemann_fn=lambda _x: np.zeros((n, n, n, n)),
    )


def conformal_chart(
    name: str,
    n: int,
    jet: Callable[[FloatArray], tuple[float, FloatArray, FloatArray]],
    margin: Callable[[FloatArray], float],
    k: float,
    center: tuple[float, ...] | None = None,
) -> ChartMetric:
    """g = e^{2φ} δ with constant sectional curvature ``k``; ``jet`` gives φ, ∂φ, ∂∂φ."""
    eye = np.eye(n)

    def metric(x: FloatArray) -> FloatArray:
        return math.exp(2 * jet(x)[0]) * eye

    def christoffel(x: FloatArray) -> FloatArray:
        d = jet(x)[1]
        return (
            np.einsum("ki,j->kij", eye, d)
            + np.einsum("kj,i->kij", eye, d)
            - np.einsum("ij,k->kij", eye, d)
        )

    def christoffel_derivative(x: FloatArray) -> FloatArray:
        dd = jet(x)[2]
        return (
            np.einsum("ki,jm->mkij", eye, dd)
            + np.einsum("kj,im->mkij", eye, dd)
            - np.einsum("ij,km->mkij", eye, dd)
        )

    return ChartMetric(
        name=name,
        dim=n,
        metric_fn=metric,
        margin_fn=margin,
        christoffel_fn=christoffel,
        christoffel_derivative_fn=christoffel_derivative,
        riemann_fn=_constant_curvature_riemann(metric, k),
        center=center,
    )


def sphere_gnomonic(n: int, k: float, bound: float = 10.0) -> ChartMetric:
    # Geodesics are straight lines in central projection, so the connection is
    # projectively flat: Γ^k_ij = δ^k_i ψ_j + δ^k_j ψ_i with ψ = -log(1 + |x|²)/2.
    eye = np.eye(n)

    def metric(x: FloatArray) -> FloatArray:
        s = 1.0 + float(x @ x)
        return ((s * eye) - np.outer(x, x)) / (s * s * k)

    def christoffel(x: FloatArray) -> FloatArray:
        psi = -x / (1.0 + float(x @ x))
        return np.einsum("ki,j->kij", eye, psi) + np.einsum("kj,i->kij", eye, psi)

    def christoffel_derivative(x: FloatArray) -> FloatArray:
        s = 1.0 + float(x @ x)
        hessian = -eye / s + 2.0 * np.outer(x, x) / (s * s)
        return np.einsum("ki,jm->mkij", eye, hessian) + np.einsum(
            "kj,im->mkij", eye, hessian
        )

    return ChartMetric(
        name=f"sphere(n={n}, K={k:g}, gnomonic)",
        dim=n,
        metric_fn=metric,
        margin_fn=lambda x: bound - float(np.linalg.norm(x)),
        christoffel_fn=christoffel,
        christoffel_derivative_fn=christoffel_derivative,
        riemann_fn=_constant_curvature_riemann(metric, k),
        coordinate_scale=1.0,
    )


def sphere_polar(k: float) -> ChartMetric:
    theta, phi = sp.symbols("theta phi", real=True)
    metric = sp.Matrix([[1, 0], [0, sp.sin(theta) ** 2]]) / k
    chart = symbolic_chart(
        f"sphere(n=2, K={k:g}, polar)",
        (theta, phi),
        metric,
        lambda x: min(float(x[0]), math.pi - float(x[0])),
        center=(math.pi / 2, 0.0),
    )
    return _with_riemann(chart, _constant_curvature_riemann(chart.g, k))


def _with_riemann(chart: ChartMetric, riemann_fn: Provider) -> ChartMetric:
    return ChartMetric(
        name=chart.name,
        dim=chart.dim,
        metric_fn=chart.metric_fn,
        margin_fn=chart.margin_fn,
        christoffel_fn=chart.christoffel_fn,
        christoffel_derivative_fn=chart.christoffel_derivative_fn,
        riemann_fn=riemann_fn,
        center=chart.center,
        coordinate_scale=chart.coordinate_scale,
    )


def hyperbolic_ball(n: int, k: float, radius: float = 0.95) -> ChartMetric:
    scale = -0.5 * math.log(abs(k))

    def jet(x: FloatArray) -> tuple[float, FloatArray, FloatArray]:
        w = 1.0 - float(x @ x)
        return (
            math.log(2.0) + scale - math.log(w),
            2.0 * x / w,
            2.0 * np.eye(n) / w + 4.0 * np.outer(x, x) / (w * w),
        )

    return conformal_chart(
        f"hyperbolic(n={n}, K={k:g}, ball)",
        n,
        jet,
        lambda x: radius - float(np.linalg.norm(x)),
        k,
    )


def hyperbolic_halfspace(n: int, k: float) -> ChartMetric:
    scale = -0.5 * math.log(abs(k))
    last = np.zeros(n)
    last[-1] = 1.0

    def jet(x: FloatArray) -> tuple[float, FloatArray, FloatArray]:
        height = float(x[-1])
        return (
            scale - math.log(height),
            -last / height,
            np.outer(last, last) / (height * height),
        )

    return conformal_chart(
        f"hyperbolic(n={n}, K={k:g}, halfspace)",
        n,
        jet,
        lambda x: float(x[-1]),
        k,
        center=tuple([0.0] * (n - 1) + [1.0]),
    )


def ellipsoid_space(semi_axes: Sequence[float] = DEFAULT_SEMI_AXES) -> ChartMetric:
    if len(semi_axes) != 3 or any(not float(s) > 0 for s in semi_axes):
        msg = f"ellipsoid needs three positive semi-axes, got {list(semi_axes)}"
        raise ParameterError(msg)
    a, b, c = (float(s) for s in semi_axes)
    x, z = sp.symbols("x z", real=True)
    height = b * sp.sqrt(1 - x**2 / a**2 - z**2 / c**2)
    hx, hz = sp.diff(height, x), sp.diff(height, z)
    metric = sp.Matrix([[1 + hx**2, hx * hz], [hx * hz, 1 + hz**2]])
    return symbolic_chart(
        f"ellipsoid(semi_axes=({a:g}, {b:g}, {c:g}))",
        (x, z),
        metric,
        lambda p: 0.9 - (float(p[0]) ** 2 / a**2 + float(p[1]) ** 2 / c**2),
    )


def generic_space(params: dict[str, Any]) -> ChartMetric:
    coordinates = list(params.get("coordinates", ()))
    if len(coordinates) < 1 or "metric" not in params:
        msg = "generic spaces need 'coordinates' and 'metric'"
        raise ParameterError(msg)
    symbols, metric = parse_metric(params["metric"], coordinates)
    center = tuple(float(c) for c in params.get("center", [0.0] * len(coordinates)))
    bound = _positive(params, "bound", 1.0)
    origin = np.array(center)
    return symbolic_chart(
        str(params.get("label", "generic")),
        symbols,
        metric,
        lambda x: bound - float(np.max(np.abs(x - origin))),
        center=center,
        coordinate_scale=float(params.get("coordinate_scale", 1.0)),
        analytic=bool(params.get("analytic", False)),
    )


def product_space(factors: Sequence[ChartMetric]) -> ChartMetric:
    """Riemannian product; cross-factor components of every tensor vanish."""
    dims = [f.dim for f in factors]
    offsets = np.cumsum([0, *dims])
    n = int(offsets[-1])
    blocks = [slice(int(a), int(b)) for a, b in zip(offsets, offsets[1:], strict=False)]

    def assemble(
        order: int, provider: Callable[[ChartMetric, FloatArray], FloatArray]
    ) -> Provider:
        def evaluate(x: FloatArray) -> FloatArray:
            out = np.zeros((n,) * order)
            for chart, block in zip(factors, blocks, strict=True):
                out[(block,) * order] = provider(chart, x[block])
            return out

        return evaluate

    def margin(x: FloatArray) -> float:
        return min(
            float(chart.margin_fn(x[block]))
            for chart, block in zip(factors, blocks, strict=True)
        )

    centers: list[float] = []
    for chart in factors:
        centers.extend(chart.origin().tolist())
    return ChartMetric(
        name=" x ".join(f.name for f in factors),
        dim=n,
        metric_fn=assemble(2, lambda chart, y: chart.g(y)),
        margin_fn=margin,
        christoffel_fn=assemble(3, christoffel_array),
        christoffel_derivative_fn=assemble(4, christoffel_derivative_array),
        riemann_fn=assemble(4, riemann_array),
        center=tuple(centers),
        coordinate_scale=min(f.coordinate_scale for f in factors),
    )


def _build(spec: SpaceSpec, *, factor: bool = False) -> ChartMetric:
    spec = spec.resolved()
    params = spec.params
    n = spec.dim
    min_dim = 1 if factor else 2
    if spec.kind in ("euclidean", "sphere", "hyperbolic") and n < min_dim:
        msg = f"{spec.kind} needs n >= {min_dim}, got {n}"
        raise ParameterError(msg)
    match spec.kind:
        case "euclidean":
            return euclidean_space(n, float(params.get("bound", 1e6)))
        case "sphere":
            k = _positive(params, "curvature", 1.0)
            if params.get("chart", "gnomonic") == "polar":
                return sphere_polar(k)
            return sphere_gnomonic(n, k, _positive(params, "bound", 10.0))
        case "hyperbolic":
            k = float(params.get("curvature", -1.0))
            if k == 0:
                msg = "hyperbolic spaces need nonzero curvature"
                raise ParameterError(msg)
            k = -abs(k)
            if params.get("chart", "ball") == "halfspace":
                return hyperbolic_halfspace(n, k)
            return hyperbolic_ball(n, k)
        case "product":
            factors = [
                _build(SpaceSpec.from_mapping(f), factor=True)
                for f in params.get("factors", [])
            ]
            if len(factors) < 2:
                msg = "a product needs at least two factors"
                raise ParameterError(msg)
            return product_space(factors)
        case "damek_ricci":
            return damek_ricci_space(
                int(params["p"]),
                int(params["q"]),
                params.get("j_maps"),
                _positive(params, "bound", 50.0),
            )
        case "ellipsoid":
            return ellipsoid_space(params.get("semi_axes", DEFAULT_SEMI_AXES))
        case "generic":
            return generic_space(params)
    msg = f"unknown space kind {spec.kind!r}"
    raise ParameterError(msg)


def make_space(spec: SpaceSpec) -> ChartMetric:
    metric = _build(spec)
    if metric.dim < 2:
        msg = f"spaces need dimension >= 2, {spec.describe()} has {metric.dim}"
        raise ParameterError(msg)
    log.debug(f"built {metric.name} (dimension {metric.dim})")
    return metric


@functools.lru_cache(maxsize=32)
def _profile(kind: str, n: int, curvature: float, p: int, q: int) -> RadialProfile:
    r = sp.Symbol("r", positive=True)
    match kind:
        case "sphere":
            s = sp.sqrt(sp.nsimplify(curvature)) * r
            expr = (sp.sin(s) / s) ** (n - 1)
        case "hyperbolic":
            s = sp.sqrt(sp.nsimplify(abs(curvature))) * r
            expr = (sp.sinh(s) / s) ** (n - 1)
        case _:
            half = r / 2
            expr = sp.cosh(half) ** q * (sp.sinh(half) / half) ** (p + q)
    return profile_from_expression(kind, expr, r)


def _constant_profile() -> RadialProfile:
    return RadialProfile(
        name="euclidean",
        derivatives=(lambda _r: 1.0, lambda _r: 0.0, lambda _r: 0.0, lambda _r: 0.0),
        taylor=(1.0,),
    )


def closed_form_profile(spec: SpaceSpec) -> RadialProfile:
    spec = spec.resolved()
    params = spec.params
    match spec.kind:
        case "euclidean":
            return _constant_profile()
        case "sphere":
            return _profile("sphere", spec.dim, float(params.get("curvature", 1.0)), 0, 0)
        case "hyperbolic":
            k = float(params.get("curvature", -1.0))
            return _profile("hyperbolic", spec.dim, k, 0, 0)
        case "damek_ricci":
            return _profile("damek_ricci", spec.dim, 0.0, int(params["p"]), int(params["q"]))
    msg = f"{spec.describe()} is not a harmonic model space with a closed-form density"
    raise UnsupportedError(msg)

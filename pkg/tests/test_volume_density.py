from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import random_direction

from model_spaces import SpaceSpec, closed_form_profile, make_space
from riemann import ChartMetric, ParameterError, geodesic_flow, tangent_vector
from sphere_quadrature import build_rule
from tubes.closed_forms import ball_volume_from_profile, tube_profile_derivative
from volume_density import (
    ConjugatePointError,
    ball_volume_table,
    ball_volumes,
    datri_checks,
    densities,
    geodesic_involution,
    half_ball_moment_volume,
    integrate_ray,
    jacobi_transport,
    radial_mean_curvature,
    sphere_mean_curvature,
    sphere_ray,
    sphere_shape_operator,
    theta,
    unit_tangent,
)


def test_flat_density_is_one(r3: ChartMetric) -> None:
    v = tangent_vector(r3, [1.0, 2.0, 3.0], [0.3, -0.4, 1.2])
    assert theta(r3, v) == pytest.approx(1.0, abs=1e-12)
    assert sphere_mean_curvature(r3, v) == pytest.approx(-2 / v.norm, rel=1e-9)


@pytest.mark.parametrize(
    ("name", "expected"),
    [
        ("s3", lambda r: (math.sin(r) / r) ** 2),
        ("h3", lambda r: (math.sinh(r) / r) ** 2),
    ],
)
def test_constant_curvature_density(name: str, expected, rng: np.random.Generator) -> None:  # noqa: ANN001
    metric = make_space(SpaceSpec.preset(name))
    u = unit_tangent(metric, metric.origin(), random_direction(rng, 3))
    radii = [0.2, 0.5, 0.8]
    values = densities(metric, sphere_ray(metric, u.point, u.components, radii))
    for r, value in zip(radii, values, strict=True):
        assert value == pytest.approx(expected(r), rel=1e-9)


def test_sphere_mean_curvature_matches_cotangent(s3: ChartMetric) -> None:
    v = unit_tangent(s3, [0.1, 0.0, -0.2], [0.0, 1.0, 1.0]).scaled(0.6)
    assert sphere_mean_curvature(s3, v) == pytest.approx(-2 / math.tan(0.6), rel=1e-8)
    shape = sphere_shape_operator(s3, v)
    assert np.allclose(shape, -np.eye(2) / math.tan(0.6), atol=1e-8)


def test_conjugate_point_on_the_equator() -> None:
    metric = make_space(SpaceSpec("sphere", {"n": 2, "chart": "polar"}))
    u = unit_tangent(metric, metric.origin(), [0.0, 1.0])
    with pytest.raises(ConjugatePointError) as info:
        densities(metric, sphere_ray(metric, u.point, u.components, [1.0, 3.3]))
    # the equator refocuses at distance π
    assert info.value.radius == pytest.approx(3.3)


def test_jacobi_transport(h3: ChartMetric) -> None:
    u = unit_tangent(h3, [0.1, 0.0, 0.0], [1.0, 1.0, 0.0])
    transport = jacobi_transport(h3, u, 0.8, samples=8)
    assert transport.wronskian_defect() < 1e-9
    assert np.allclose(transport.theta(), (np.sinh(transport.radii) / transport.radii) ** 2, rtol=1e-9)
    # constant curvature -1: ⟨R(e, γ′)γ′, e⟩ = -1 on the normal frame
    assert np.allclose(transport.curvature, -np.eye(2), atol=1e-9)
    assert transport.full_block(3)[0, 0] == pytest.approx(transport.radii[3])
    with pytest.raises(ParameterError, match="unit vector"):
        jacobi_transport(h3, u.scaled(2.0), 0.5)


def test_rays_without_extra_vectors(r3: ChartMetric) -> None:
    x0, v0 = np.zeros(3), np.array([1.0, 0.0, 0.0])
    radii = [0.0, 0.5, 1.0]
    ray = integrate_ray(r3, x0, v0, np.zeros((3, 0)), np.zeros((3, 0)), np.zeros((3, 0)), radii)
    assert ray.fields.shape == (3, 3, 0)
    assert ray.frames.shape == (3, 3, 0)
    assert np.allclose(ray.positions[-1], [1.0, 0.0, 0.0])
    fields = np.zeros((3, 2))
    derivatives = np.eye(3)[:, 1:]
    ray = integrate_ray(r3, x0, v0, fields, derivatives, np.zeros((3, 0)), radii)
    assert ray.frames.shape == (3, 3, 0)
    assert np.allclose(ray.fields[-1], derivatives)


@pytest.mark.parametrize(
    "name",
    ["dr21", pytest.param("dr43", marks=pytest.mark.slow)],
)
def test_damek_ricci_density(name: str, rng: np.random.Generator) -> None:
    metric = make_space(SpaceSpec.preset(name))
    profile = closed_form_profile(SpaceSpec.preset(name))
    radii = [0.2, 0.5, 0.8]
    for p in (metric.origin(), np.linspace(-0.2, 0.3, metric.dim)):
        u = unit_tangent(metric, p, random_direction(rng, metric.dim))
        values = densities(metric, sphere_ray(metric, u.point, u.components, radii))
        for r, value in zip(radii, values, strict=True):
            assert value == pytest.approx(profile(r), rel=1e-9)


def test_damek_ricci_density_value(dr21: ChartMetric) -> None:
    u = unit_tangent(dr21, dr21.origin(), [0.0, 1.0, 0.0, 0.0])
    expected = math.cosh(0.5) * (math.sinh(0.5) / 0.5) ** 3
    assert theta(dr21, u.scaled(1.0)) == pytest.approx(expected, rel=1e-9)
    assert expected == pytest.approx(1.2765, abs=1e-3)


@pytest.mark.parametrize("name", ["ellipsoid", "s2xr"])
def test_involution_symmetry(name: str, rng: np.random.Generator) -> None:
    metric = make_space(SpaceSpec.preset(name))
    for _ in range(5):
        u = unit_tangent(metric, metric.origin(), random_direction(rng, metric.dim))
        v = u.scaled(float(rng.uniform(0.2, 0.6)))
        value = theta(metric, v)
        image = theta(metric, geodesic_involution(metric, v))
        assert abs(image - value) / value <= 1e-7


@pytest.mark.parametrize("name", ["h3", "s2xr", "ellipsoid", "dr21"])
def test_mean_curvature_identity(name: str, rng: np.random.Generator) -> None:
    metric = make_space(SpaceSpec.preset(name))
    u = unit_tangent(metric, metric.origin(), random_direction(rng, metric.dim))
    for r in (0.1, 0.4, 0.8):
        v = u.scaled(r)
        assert sphere_mean_curvature(metric, v) == pytest.approx(radial_mean_curvature(metric, v), abs=1e-5)


def test_euclidean_ball_volumes(r3: ChartMetric) -> None:
    rule = build_rule(3, 4)
    volumes = ball_volumes(r3, np.zeros(3), np.array([0.0, 0.0, 1.0]), 0.5, rule)
    assert volumes.ball_volume == pytest.approx(4 * math.pi / 3 * 0.125, rel=1e-12)
    assert volumes.sphere_area == pytest.approx(math.pi, rel=1e-12)
    assert volumes.half_ball_volume == pytest.approx(volumes.ball_volume / 2, rel=1e-12)
    assert volumes.moment_volume == pytest.approx(math.pi * 0.25, rel=1e-12)


def test_hyperbolic_ball_volumes(h3: ChartMetric) -> None:
    profile = closed_form_profile(SpaceSpec.preset("h3"))
    rule = build_rule(3, 4)
    radii = [0.3, 0.6]
    table = ball_volume_table(h3, h3.origin(), np.array([1.0, 0.0, 0.0]), radii, rule)
    for r, volumes in zip(radii, table, strict=True):
        assert volumes.ball_volume == pytest.approx(ball_volume_from_profile(profile, 3, r), rel=1e-8)
        halves = volumes.half_ball_volume + volumes.opposite_half_ball_volume
        combined = (
            volumes.error("half_ball_volume")
            + volumes.error("opposite_half_ball_volume")
            + volumes.error("ball_volume")
        )
        assert abs(halves - volumes.ball_volume) <= 2 * combined
    moment = half_ball_moment_volume(h3, h3.origin(), np.array([0.0, 1.0, 0.0]), 0.5, rule)
    assert moment == pytest.approx(tube_profile_derivative(profile, 3, 0.5), rel=1e-8)
    assert moment == pytest.approx(math.pi * math.sinh(0.5) ** 2, rel=1e-8)


def test_ball_volume_radii_must_be_positive(h3: ChartMetric) -> None:
    with pytest.raises(ParameterError, match="positive radii"):
        ball_volume_table(h3, h3.origin(), np.array([1.0, 0.0, 0.0]), [0.0], build_rule(3, 2))


def test_ellipsoid_density_is_not_a_first_integral(ellipsoid: ChartMetric) -> None:
    states = geodesic_flow(ellipsoid, [0.1, -0.3], [0.3, 1.0], [0.0, 0.1, 0.2, 0.3])
    values = [
        theta(ellipsoid, tangent_vector(ellipsoid, s.position, s.velocity).unit().scaled(0.8))
        for s in states
    ]
    assert max(values) - min(values) > 1e-3


@pytest.mark.slow
def test_datri_checks_on_hyperbolic_space(h3: ChartMetric, rng: np.random.Generator) -> None:
    samples = [
        unit_tangent(h3, p, random_direction(rng, 3))
        for p in ([0.0, 0.0, 0.0], [0.2, -0.1, 0.1])
    ]
    report = datri_checks(h3, samples, [0.3, 0.5], build_rule(3, 4), radial_order=12)
    assert report.half_ball_defect <= 1e-6
    assert report.first_integral_defect <= 1e-6


@pytest.mark.slow
def test_datri_checks_on_the_product(s2xr: ChartMetric, rng: np.random.Generator) -> None:
    samples = [
        unit_tangent(s2xr, p, random_direction(rng, 3))
        for p in ([0.0, 0.0, 0.0], [0.2, -0.1, 0.3])
    ]
    report = datri_checks(s2xr, samples, [0.3, 0.5], build_rule(3, 5), radial_order=12)
    assert report.half_ball_defect <= 1e-6
    assert report.first_integral_defect <= 1e-6

from __future__ import annotations

import math

import numpy as np
import pytest

from model_spaces import RadialProfile, SpaceSpec, closed_form_profile
from riemann import ChartMetric, ParameterError, PrecisionWarning
from sphere_quadrature import build_rule
from tubes import (
    SelfFocusError,
    SteinerReport,
    TubeIntegrator,
    coordinate_circle,
    frame_curve,
    frame_geodesic,
    steiner_check,
    tube_invariants,
    tube_jacobian,
    tube_volume_direct,
)
from tubes.closed_forms import (
    gheysens_vanhecke_expansion,
    harmonic_closed_forms,
    ricci_from_total_scalar_curvature,
    series_coefficients_from_tube,
    sphere_area_from_profile,
    tube_profile_derivative,
)


def test_straight_line_frame(r3: ChartMetric) -> None:
    fc = frame_geodesic(r3, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 2.0)
    point = fc.at(1.3)
    assert np.allclose(point.position, [1.3, 0.0, 0.0])
    assert np.allclose(point.curvature, 0.0)
    assert fc.length() == pytest.approx(2.0)
    assert fc.orthonormality_defect() < 1e-12


def test_euclidean_cylinder(r3: ChartMetric) -> None:
    fc = frame_geodesic(r3, [0.0, 0.0, 0.0], [0.0, 1.0, 0.0], 1.0)
    result = tube_invariants(r3, fc, 0.3)
    assert result.volume == pytest.approx(math.pi * 0.09, rel=1e-12)
    assert result.area == pytest.approx(2 * math.pi * 0.3, rel=1e-12)
    assert result.total_mean_curvature == pytest.approx(-math.pi, rel=1e-10)


def test_pappus_torus(r3: ChartMetric) -> None:
    fc = frame_curve(r3, coordinate_circle([0.0, 0.0, 0.0], 1.0))
    assert fc.orthonormality_defect() < 1e-8
    volume = tube_volume_direct(r3, fc, 0.2)
    assert volume == pytest.approx(2 * math.pi**2 * 1.0 * 0.2**2, rel=1e-8)


def test_hyperbolic_tube_matches_closed_forms(h3: ChartMetric) -> None:
    fc = frame_geodesic(h3, h3.origin(), [1.0, 0.0, 0.0], 1.0)
    result = tube_invariants(h3, fc, 0.5)
    assert result.volume == pytest.approx(math.pi * math.sinh(0.5) ** 2, rel=1e-4)
    assert result.area == pytest.approx(math.pi * math.sinh(1.0), rel=1e-4)
    assert result.total_mean_curvature == pytest.approx(-math.pi * math.cosh(1.0), rel=1e-4)
    reference = harmonic_closed_forms(closed_form_profile(SpaceSpec.preset("h3")), 3, 0.5, 1.0)
    for name in ("volume", "area", "total_mean_curvature", "total_scalar_curvature", "normal_ricci"):
        value, expected = getattr(result, name), getattr(reference, name)
        assert abs(value - expected) <= 1e-3 * max(1.0, abs(expected)), name
    # flat tube surfaces in H³ have no intrinsic curvature left to integrate
    assert reference.total_scalar_curvature == pytest.approx(0.0, abs=1e-10)
    assert result.error("volume") < 1e-4


def test_axial_and_spherical_tubes_differ(s2xr: ChartMetric) -> None:
    r = 0.4
    axial = frame_geodesic(s2xr, s2xr.origin(), [0.0, 0.0, 1.0], 0.5)
    volume = tube_volume_direct(s2xr, axial, r)
    assert volume == pytest.approx(math.pi * (1 - math.cos(r)), rel=1e-8)
    spherical = frame_geodesic(s2xr, s2xr.origin(), [1.0, 0.0, 0.0], 0.5)
    other = tube_volume_direct(s2xr, spherical, r)
    assert abs(other - volume) > 1e-3 * volume


def test_radii_share_rays(h3: ChartMetric) -> None:
    fc = frame_geodesic(h3, h3.origin(), [0.0, 1.0, 0.0], 0.5)
    integrator = TubeIntegrator(h3, fc, build_rule(2, 4))
    first, second = integrator.evaluate([0.2, 0.4])
    assert first.radius == 0.2
    assert second.volume > first.volume
    assert second.checked_radius == pytest.approx(0.4 / 0.9)
    with pytest.raises(ParameterError, match="positive"):
        integrator.evaluate([0.0])
    with pytest.raises(ParameterError, match="S\\^1"):
        TubeIntegrator(h3, fc, build_rule(3, 2))


def test_tube_jacobian(r3: ChartMetric) -> None:
    fc = frame_geodesic(r3, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 1.0)
    jacobian = tube_jacobian(r3, fc, 0.5, [1.0, 0.0], 0.25)
    assert jacobian.factor == pytest.approx(0.25)
    assert jacobian.mean_curvature == pytest.approx(-4.0)
    with pytest.raises(ParameterError, match="unit vectors"):
        tube_jacobian(r3, fc, 0.5, [1.0, 1.0], 0.25)


def test_self_focusing_tube(r3: ChartMetric) -> None:
    fc = frame_curve(r3, coordinate_circle([0.0, 0.0, 0.0], 0.3))
    with pytest.raises(SelfFocusError) as info:
        tube_volume_direct(r3, fc, 0.4)
    assert 0.3 <= info.value.rho <= 0.4 / 0.9 + 1e-12


def test_closed_forms() -> None:
    profile = closed_form_profile(SpaceSpec.preset("h3"))
    r = 0.5
    assert tube_profile_derivative(profile, 3, r) == pytest.approx(math.pi * math.sinh(r) ** 2)
    assert tube_profile_derivative(profile, 3, r, 1) == pytest.approx(math.pi * math.sinh(2 * r))
    assert sphere_area_from_profile(profile, 3, r) == pytest.approx(4 * math.pi * math.sinh(r) ** 2)
    with pytest.raises(ParameterError, match="order"):
        tube_profile_derivative(profile, 3, r, 4)
    invariants = harmonic_closed_forms(profile, 3, r, 2.0)
    assert invariants.volume == pytest.approx(2 * math.pi * math.sinh(r) ** 2)
    assert invariants.ricci_constant == pytest.approx(-2.0)


def test_fitted_profiles_warn() -> None:
    profile = RadialProfile(
        name="quadratic",
        derivatives=(
            lambda r: 1 + r * r / 3,
            lambda r: 2 * r / 3,
            lambda _r: 2 / 3,
            lambda _r: 0.0,
        ),
        provenance="fitted",
        errors=(1e-6, 1e-5, 1e-4, 1e-3),
    )
    with pytest.warns(PrecisionWarning):
        invariants = harmonic_closed_forms(profile, 3, 0.2, 1.0)
    assert invariants.error("volume") > 0
    assert invariants.error("total_scalar_curvature") > invariants.error("area")


def test_gheysens_vanhecke_expansion() -> None:
    r, length = 0.1, 2.0
    assert gheysens_vanhecke_expansion(5, r, length, 0.0, 0.0) == pytest.approx(
        12 * math.pi**2 * r * length
    )
    c = gheysens_vanhecke_expansion(5, 0.3, 1.0, 2.0, 0.7)
    assert ricci_from_total_scalar_curvature(c, 5, 0.3, 1.0, 2.0) == pytest.approx(0.7)
    with pytest.raises(ParameterError, match="n >= 4"):
        ricci_from_total_scalar_curvature(1.0, 3, 0.3, 1.0, 0.0)


def test_series_coefficients_from_tube() -> None:
    profile = closed_form_profile(SpaceSpec.preset("h3"))
    radii = np.linspace(0.05, 0.3, 12)
    volumes = [harmonic_closed_forms(profile, 3, float(r), 1.5).volume for r in radii]
    coefficients, errors = series_coefficients_from_tube(radii, volumes, 3, 1.5, order=6)
    assert coefficients[0] == pytest.approx(1.0, abs=1e-7)
    assert coefficients[1] == pytest.approx(1 / 3, abs=1e-5)
    assert len(errors) == 4
    with pytest.raises(ParameterError, match="radii"):
        series_coefficients_from_tube(radii[:3], volumes[:3], 3, 1.5, order=6)


def test_sphere_tube_matches_closed_form(s3: ChartMetric) -> None:
    fc = frame_geodesic(s3, s3.origin(), [1.0, 0.0, 0.0], 1.0)
    profile = closed_form_profile(SpaceSpec.preset("s3"))
    for result in TubeIntegrator(s3, fc).evaluate([0.2, 0.5, 0.8]):
        r = result.radius
        assert result.volume == pytest.approx(math.pi * math.sin(r) ** 2, rel=1e-4)
        assert result.volume == pytest.approx(tube_profile_derivative(profile, 3, r), rel=1e-4)


@pytest.mark.slow
def test_damek_ricci_tube_matches_closed_form(dr21: ChartMetric) -> None:
    # the geodesic along the A axis is a one-parameter subgroup, so every t looks alike
    fc = frame_geodesic(dr21, dr21.origin(), [0.0, 0.0, 0.0, 1.0], 1.0)
    profile = closed_form_profile(SpaceSpec.preset("dr21"))
    integrator = TubeIntegrator(dr21, fc, build_rule(3, 6), t_panels=1, t_order=3)
    for result in integrator.evaluate([0.2, 0.5, 0.8]):
        expected = tube_profile_derivative(profile, 4, result.radius)
        assert result.volume == pytest.approx(expected, rel=1e-4)


def test_steiner_expansion_of_a_cylinder(r3: ChartMetric) -> None:
    fc = frame_geodesic(r3, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 1.0)
    report = steiner_check(r3, fc, 0.3, rule=build_rule(2, 2), t_panels=1, t_order=4)
    # πr²l is exactly cubic in r, so nothing is left to decay
    assert report.inconclusive
    assert not report.consistent
    assert max(report.residuals) <= 1e-6
    assert report.coefficients[1] == pytest.approx(2 * math.pi, rel=1e-10)


def test_steiner_expansion_on_the_ellipsoid(ellipsoid: ChartMetric) -> None:
    fc = frame_geodesic(ellipsoid, [0.0, -0.25], [0.0, 1.0], 0.5)
    report = steiner_check(ellipsoid, fc, 0.4, deltas=(0.08, 0.04, 0.02))
    assert not report.inconclusive
    assert report.consistent
    assert all(report.ratio_passes(i) for i in range(len(report.ratios)))


@pytest.mark.slow
def test_steiner_expansion_on_hyperbolic_space(h3: ChartMetric) -> None:
    fc = frame_geodesic(h3, h3.origin(), [1.0, 0.0, 0.0], 1.0)
    report = steiner_check(h3, fc, 0.4, deltas=(0.04, 0.02, 0.01))
    assert report.consistent
    assert report.ratio_windows == ((12.0, 20.0), (12.0, 20.0))
    assert all(12 <= ratio <= 20 for ratio in report.ratios)
    assert report.coefficients[0] == pytest.approx(math.pi * math.sinh(0.8), rel=1e-6)
    assert report.fd_coefficients[0] == pytest.approx(report.coefficients[0], rel=1e-3)
    with pytest.raises(ParameterError, match="two positive offsets"):
        steiner_check(h3, fc, 0.4, deltas=(0.01,))


@pytest.mark.slow
def test_steiner_expansion_on_the_product(s2xr: ChartMetric) -> None:
    fc = frame_geodesic(s2xr, s2xr.origin(), [1.0, 0.0, 0.0], 1.0)
    report = steiner_check(s2xr, fc, 0.4, deltas=(0.04, 0.02, 0.01))
    assert not report.inconclusive
    assert all(report.ratio_passes(i) for i in range(len(report.ratios)))
    assert report.consistent


def test_steiner_ratio_windows() -> None:
    report = SteinerReport(
        radius=0.4,
        deltas=(0.04, 0.02, 0.01),
        coefficients=(1.0, 1.0, 1.0),
        fd_coefficients=(1.0, 1.0, 1.0),
        residuals=(1.6e-6, 1e-7, 2e-8),
        ratios=(16.0, 5.0),
        decay_order=2.3,
        consistent=False,
        ratio_windows=((12.0, 20.0), (12.0, 20.0)),
    )
    assert report.ratio_passes(0)
    assert not report.ratio_passes(1)

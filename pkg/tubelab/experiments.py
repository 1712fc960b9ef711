"""One function per experiment id: build the quantities, compare with references, return rows."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable

import numpy as np

from density_series import (
    fit_coefficients,
    harmonic_up_to_order,
    parity_check,
    vanhecke_relation_check,
)
from model_spaces import RadialProfile, closed_form_profile
from riemann import (
    RTOL,
    ChartMetric,
    UnsupportedError,
    curvature,
    tangent_vector,
)
from sphere_quadrature import (
    SphereRule,
    SphericalFunction,
    build_rule,
    cosine_transform,
    default_kind,
    hemisphere_moment,
    sphere_area,
    stiefel_fubini_check,
    unit_ball_volume,
)
from tubes import TubeIntegrator, steiner_check
from tubes.closed_forms import (
    ball_volume_from_profile,
    gheysens_vanhecke_expansion,
    harmonic_closed_forms,
    ricci_from_total_scalar_curvature,
    sphere_area_from_profile,
    tube_profile_derivative,
)
from volume_density import (
    ball_volume_table,
    datri_checks,
    densities,
    geodesic_involution,
    radial_mean_curvature,
    sphere_mean_curvature,
    sphere_ray,
    theta,
)

from . import CurveConfig, ExperimentConfig, ReportRow

log = logging.getLogger(__name__)

Experiment = Callable[[ExperimentConfig, ChartMetric, int], list[ReportRow]]


class Rows:
    """Collects rows of one experiment with the config's space label and tolerances."""

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config
        self.space = config.space_spec.describe()
        self.rows: list[ReportRow] = []

    def add(
        self,
        r: float,
        quantity: str,
        value: float,
        error: float = 0.0,
        reference: float | None = None,
        passed: bool | None = None,
        control: bool = False,
    ) -> None:
        if passed is None:
            passed = (
                self.config.tolerances.accepts(value, reference)
                if reference is not None
                else True
            )
        self.rows.append(
            ReportRow(
                experiment=self.config.experiment,
                space=self.space,
                r=float(r),
                quantity=quantity,
                value=float(value),
                error=float(error),
                reference=None if reference is None else float(reference),
                passed=bool(passed),
                control=control,
            )
        )


def _profile(config: ExperimentConfig) -> RadialProfile | None:
    try:
        return closed_form_profile(config.space_spec)
    except UnsupportedError:
        return None


def _rule(config: ExperimentConfig, n: int) -> SphereRule:
    q = config.quadrature
    return build_rule(n, q.rule_level, q.rule_kind or default_kind(n), config.seed)


def _integrator(
    config: ExperimentConfig, metric: ChartMetric, curve: CurveConfig, threads: int
) -> TubeIntegrator:
    q = config.quadrature
    return TubeIntegrator(
        metric,
        curve.build(metric),
        _rule(config, metric.dim - 1),
        radial_order=q.radial_order,
        t_panels=q.t_panels,
        t_order=q.t_order,
        threads=threads,
    )


def density_profile(config: ExperimentConfig, metric: ChartMetric, threads: int) -> list[ReportRow]:
    rows = Rows(config)
    profile = _profile(config)
    radii = config.radius_values
    for u in config.samples.vectors(metric, config.seed):
        values = densities(metric, sphere_ray(metric, u.point, u.components, radii))
        for r, value in zip(radii, values, strict=True):
            rows.add(
                r,
                "theta",
                value,
                10 * RTOL * abs(value),
                profile(r) if profile else None,
            )
    return rows.rows


def ball_volumes(config: ExperimentConfig, metric: ChartMetric, threads: int) -> list[ReportRow]:
    rows = Rows(config)
    profile = _profile(config)
    n = metric.dim
    u = config.samples.vectors(metric, config.seed)[0]
    table = ball_volume_table(
        metric,
        u.point,
        u.components,
        config.radius_values,
        _rule(config, n),
        config.quadrature.radial_order,
        threads,
    )
    for volumes in table:
        r = volumes.radius
        rows.add(
            r,
            "ball_volume",
            volumes.ball_volume,
            volumes.error("ball_volume"),
            ball_volume_from_profile(profile, n, r) if profile else None,
        )
        rows.add(
            r,
            "sphere_area",
            volumes.sphere_area,
            volumes.error("sphere_area"),
            sphere_area_from_profile(profile, n, r) if profile else None,
        )
        halves = volumes.half_ball_volume + volumes.opposite_half_ball_volume
        combined = (
            volumes.error("half_ball_volume")
            + volumes.error("opposite_half_ball_volume")
            + volumes.error("ball_volume")
        )
        rows.add(
            r,
            "half_ball_sum",
            halves,
            combined,
            volumes.ball_volume,
            abs(halves - volumes.ball_volume) <= 2 * combined,
        )
        rows.add(r, "half_ball_volume", volumes.half_ball_volume, volumes.error("half_ball_volume"))
        rows.add(r, "half_sphere_area", volumes.half_sphere_area, volumes.error("half_sphere_area"))
        rows.add(
            r,
            "moment_volume",
            volumes.moment_volume,
            volumes.error("moment_volume"),
            tube_profile_derivative(profile, n, r) if profile else None,
        )
    return rows.rows


def tube_volume(config: ExperimentConfig, metric: ChartMetric, threads: int) -> list[ReportRow]:
    rows = Rows(config)
    profile = _profile(config)
    n = metric.dim
    radii = config.radius_values
    tubes = _integrator(config, metric, config.curve, threads).evaluate(radii)
    alternate = config.option("alternate_curve", None)
    others = (
        _integrator(config, metric, CurveConfig.from_json(alternate), threads).evaluate(radii)
        if alternate
        else None
    )
    separation = float(config.option("separation", 10.0))
    for i, tube in enumerate(tubes):
        r = tube.radius
        reference = tube_profile_derivative(profile, n, r) * tube.length if profile else None
        rows.add(r, "volume", tube.volume, tube.error("volume"), reference)
        if others is not None:
            other = others[i]
            rows.add(r, "volume_alternate", other.volume, other.error("volume"))
            difference = abs(tube.volume - other.volume)
            combined = tube.error("volume") + other.error("volume")
            rows.add(
                r,
                "volume_difference",
                difference,
                combined,
                passed=difference > separation * combined,
            )
    return rows.rows


INVARIANTS = (
    "volume",
    "area",
    "total_mean_curvature",
    "total_scalar_curvature",
    "normal_ricci",
    "mean_curvature_integral",
    "ambient_scalar",
)


def tube_invariants(config: ExperimentConfig, metric: ChartMetric, threads: int) -> list[ReportRow]:
    rows = Rows(config)
    profile = _profile(config)
    for tube in _integrator(config, metric, config.curve, threads).evaluate(config.radius_values):
        closed = (
            harmonic_closed_forms(profile, metric.dim, tube.radius, tube.length)
            if profile
            else None
        )
        for name in INVARIANTS:
            rows.add(
                tube.radius,
                name,
                getattr(tube, name),
                tube.error(name),
                getattr(closed, name) if closed else None,
            )
    return rows.rows


def check_harmonic(config: ExperimentConfig, metric: ChartMetric, threads: int) -> list[ReportRow]:
    rows = Rows(config)
    order = int(config.option("K", 6))
    report = harmonic_up_to_order(metric, order, config.samples.vectors(metric, config.seed))
    r = report.fits[0].window[1]
    for i, (variation, bar) in enumerate(zip(report.variations, report.error_bars, strict=True)):
        rows.add(r, f"a{i}_variation", variation, bar, 0.0, variation <= bar)
    rows.add(r, "harmonic_order", report.passes_at, 0.0, order, report.harmonic)
    return rows.rows


def check_datri(config: ExperimentConfig, metric: ChartMetric, threads: int) -> list[ReportRow]:
    rows = Rows(config)
    tolerance = config.tolerances.value
    vectors = config.samples.vectors(metric, config.seed)
    rule = _rule(config, metric.dim)
    radii = config.radius_values
    times = config.option("times", [0.0, 0.1, 0.2, 0.3])
    report = datri_checks(
        metric,
        vectors,
        radii,
        rule,
        times=times,
        radial_order=config.quadrature.radial_order,
        threads=threads,
    )
    u = vectors[0]
    for volumes in ball_volume_table(
        metric, u.point, u.components, radii, rule, config.quadrature.radial_order, threads
    ):
        halves = volumes.half_ball_volume + volumes.opposite_half_ball_volume
        combined = (
            volumes.error("half_ball_volume")
            + volumes.error("opposite_half_ball_volume")
            + volumes.error("ball_volume")
        )
        rows.add(
            volumes.radius,
            "half_ball_sum",
            halves,
            combined,
            volumes.ball_volume,
            abs(halves - volumes.ball_volume) <= 2 * combined,
        )
    r = radii[-1]
    rows.add(
        r,
        "half_ball_homogeneity_defect",
        report.half_ball_defect,
        report.half_ball_error,
        0.0,
        report.half_ball_defect <= tolerance,
    )
    rows.add(
        r,
        "first_integral_defect",
        report.first_integral_defect,
        report.first_integral_error,
        0.0,
        report.first_integral_defect <= tolerance,
    )
    floor = config.option("min_first_integral_defect", None)
    if floor is not None:
        # the defect minus its error bar must exceed the floor
        rows.add(
            r,
            "first_integral_defect_floor",
            report.first_integral_defect,
            report.first_integral_error,
            float(floor),
            report.first_integral_defect - report.first_integral_error > float(floor),
            control=True,
        )
    return rows.rows


def _test_functions(n: int) -> dict[str, SphericalFunction]:
    return {
        "constant": SphericalFunction(n, lambda v: 1.0, "even"),
        "odd_linear": SphericalFunction(n, lambda v: v[0] - 0.5 * v[-1], "odd"),
        "odd_cubic": SphericalFunction(n, lambda v: v[0] ** 3 - v[1] * v[-1] ** 2, "odd"),
        "odd_mixed": SphericalFunction(n, lambda v: v[1] * math.cos(v[0]) + v[-1] ** 5, "odd"),
        "even_quadratic": SphericalFunction(n, lambda v: v[0] ** 2 + v[0] * v[1], "even"),
        "even_quartic": SphericalFunction(n, lambda v: (v[0] * v[-1]) ** 2 + 1.0, "even"),
    }


def transform_cosine(config: ExperimentConfig, metric: ChartMetric, threads: int) -> list[ReportRow]:
    rows = Rows(config)
    n = metric.dim
    rule = _rule(config, n)
    rng = np.random.default_rng(config.seed)
    u = rng.normal(size=n)
    u /= np.linalg.norm(u)
    r = config.radius_values[0]
    for name, f in _test_functions(n).items():
        value = cosine_transform(f, u, rule)
        if name == "constant":
            rows.add(r, f"cosine_{name}", value, reference=2 * unit_ball_volume(n - 1))
        elif f.parity == "odd":
            rows.add(r, f"cosine_{name}", value, reference=0.0)
        else:
            rows.add(r, f"cosine_{name}", value)
            rows.add(r, f"hemisphere_moment_{name}", hemisphere_moment(f, u, rule), reference=value / 2)
    return rows.rows


def stiefel_fubini(config: ExperimentConfig, metric: ChartMetric, threads: int) -> list[ReportRow]:
    rows = Rows(config)
    n = metric.dim
    rule = _rule(config, n)
    r = config.radius_values[0]
    relative = float(config.option("relative_tolerance", 1e-8))
    constant = stiefel_fubini_check(lambda u, v: 1.0, rule)
    exact = sphere_area(n) * sphere_area(n - 1)
    rows.add(r, "fubini_constant_lhs", constant.lhs, reference=exact)
    rows.add(r, "fubini_constant_rhs", constant.rhs, reference=exact)
    tests = {
        "fubini_skew_polynomial": lambda u, v: u[0] ** 2 * v[1] ** 4 + u[1] * v[0],
        "fubini_mixed_polynomial": lambda u, v: (u[0] + 2 * u[1]) ** 2 * (v[0] - v[-1]) ** 2
        + u[-1] ** 3 * v[1],
    }
    for name, f in tests.items():
        result = stiefel_fubini_check(f, rule)
        rows.add(
            r,
            name,
            result.relative_defect,
            reference=0.0,
            passed=result.defect <= relative * abs(result.lhs),
        )
    return rows.rows


def series_fit(config: ExperimentConfig, metric: ChartMetric, threads: int) -> list[ReportRow]:
    rows = Rows(config)
    order = int(config.option("K", 6))
    a0_tolerance = float(config.option("a0_tolerance", 1e-8))
    a2_tolerance = float(config.option("a2_tolerance", 1e-4))
    taylor_tolerance = float(config.option("taylor_tolerance", 1e-4))
    vanhecke = [int(k) for k in config.option("vanhecke", [])]
    profile = _profile(config)
    for u in config.samples.vectors(metric, config.seed):
        fit = fit_coefficients(metric, u, order)
        mirrored = fit_coefficients(metric, -u, order, fit.window)
        r = fit.window[1]
        a0, a1, a2 = fit.coefficient(0), fit.coefficient(1), fit.coefficient(2)
        rows.add(r, "a0", a0, fit.error(0), 1.0, abs(a0 - 1) <= a0_tolerance)
        rows.add(r, "a1", a1, fit.error(1), 0.0, abs(a1) <= 3 * fit.error(1) + 1e-10)
        ricci = curvature(metric, u.point).ricci_form(u.components)
        rows.add(r, "a2", a2, fit.error(2), -ricci / 6, abs(a2 + ricci / 6) <= a2_tolerance)
        parity = parity_check(fit, mirrored)
        for i, (defect, error) in enumerate(zip(parity.defects, parity.errors, strict=True)):
            rows.add(r, f"parity_a{i}", defect, error, 0.0, defect <= error + 1e-12)
        if profile:
            for i in range(3, min(order, 6) + 1):
                expected = profile.taylor_coefficient(i)
                rows.add(
                    r,
                    f"a{i}",
                    fit.coefficient(i),
                    fit.error(i),
                    expected,
                    abs(fit.coefficient(i) - expected) <= taylor_tolerance + 3 * fit.error(i),
                )
        for k in vanhecke:
            report = vanhecke_relation_check(metric, u, k)
            rows.add(
                r,
                f"vanhecke_k{k}",
                report.lhs,
                report.lhs_error + report.rhs_error,
                report.rhs,
                report.agree,
            )
            if report.inconclusive:
                log.info(f"odd-order relation k = {k} inconclusive along {u.components.tolist()}")
    return rows.rows


def steiner(config: ExperimentConfig, metric: ChartMetric, threads: int) -> list[ReportRow]:
    rows = Rows(config)
    q = config.quadrature
    fc = config.curve.build(metric)
    rule = _rule(config, metric.dim - 1)
    deltas = [float(d) for d in config.option("deltas", [0.02, 0.01])]
    bound = float(config.option("residual_bound", 1e-6))
    for r in config.radius_values:
        report = steiner_check(
            metric,
            fc,
            r,
            deltas,
            rule,
            radial_order=q.radial_order,
            t_panels=q.t_panels,
            t_order=q.t_order,
            threads=threads,
        )
        for k, (fd, integral) in enumerate(
            zip(report.fd_coefficients, report.coefficients, strict=True), start=1
        ):
            rows.add(r, f"steiner_c{k}", fd, report.volume_error, integral)
        if report.inconclusive:
            # polynomial volumes: the expansion is exact up to quadrature noise
            for residual in report.residuals:
                rows.add(r, "steiner_residual", residual, report.noise, 0.0, residual <= bound)
            continue
        rows.add(r, "steiner_decay_order", report.decay_order, 0.0, 4.0, report.consistent)
        for i, ratio in enumerate(report.ratios):
            ideal = (report.deltas[i] / report.deltas[i + 1]) ** 4
            rows.add(r, "steiner_residual_ratio", ratio, 0.0, ideal, report.ratio_passes(i))
    return rows.rows


def mean_curvature(config: ExperimentConfig, metric: ChartMetric, threads: int) -> list[ReportRow]:
    rows = Rows(config)
    for u in config.samples.vectors(metric, config.seed):
        for r in config.radius_values:
            v = u.scaled(r)
            rows.add(r, "mean_curvature", sphere_mean_curvature(metric, v), reference=radial_mean_curvature(metric, v))
    return rows.rows


def involution_symmetry(config: ExperimentConfig, metric: ChartMetric, threads: int) -> list[ReportRow]:
    rows = Rows(config)
    tolerance = config.tolerances.value
    radii = config.radius_values
    rng = np.random.default_rng(config.seed + 1)
    for u in config.samples.vectors(metric, config.seed):
        r = float(rng.uniform(radii[0], radii[-1])) if len(radii) > 1 else radii[0]
        v = u.scaled(r)
        value = theta(metric, v)
        image = theta(metric, geodesic_involution(metric, v))
        defect = abs(image - value) / value
        rows.add(r, "involution_defect", defect, 20 * RTOL, 0.0, defect <= tolerance)
    return rows.rows


def gheysens_vanhecke(config: ExperimentConfig, metric: ChartMetric, threads: int) -> list[ReportRow]:
    rows = Rows(config)
    n = metric.dim
    fc = config.curve.build(metric)
    start = fc.at(fc.curve.start)
    data = curvature(metric, start.position)
    axis = tangent_vector(metric, start.position, start.velocity).unit()
    ricci = data.ricci_form(axis.components)
    recover = bool(config.option("recover_ricci", False))
    ricci_tolerance = float(config.option("ricci_tolerance", 1e-2))
    integrator = _integrator(config, metric, config.curve, threads)
    for tube in integrator.evaluate(config.radius_values):
        r = tube.radius
        c = tube.total_scalar_curvature
        expansion = gheysens_vanhecke_expansion(n, r, tube.length, data.scalar, ricci)
        rows.add(r, "total_scalar_curvature", c, tube.error("total_scalar_curvature"), expansion)
        if recover:
            recovered = ricci_from_total_scalar_curvature(c, n, r, tube.length, data.scalar)
            rows.add(
                r,
                "axial_ricci",
                recovered,
                0.0,
                ricci,
                abs(recovered - ricci) <= ricci_tolerance,
            )
    return rows.rows


EXPERIMENTS: dict[str, Experiment] = {
    "density-profile": density_profile,
    "ball-volumes": ball_volumes,
    "tube-volume": tube_volume,
    "tube-invariants": tube_invariants,
    "check-harmonic": check_harmonic,
    "check-datri": check_datri,
    "transform-cosine": transform_cosine,
    "stiefel-fubini": stiefel_fubini,
    "series-fit": series_fit,
    "steiner-check": steiner,
    "mean-curvature": mean_curvature,
    "involution-symmetry": involution_symmetry,
    "gheysens-vanhecke": gheysens_vanhecke,
}

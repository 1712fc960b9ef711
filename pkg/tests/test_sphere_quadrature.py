from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import random_direction

from riemann import ParameterError, UnsupportedError
from sphere_quadrature import (
    SphericalFunction,
    build_rule,
    cosine_transform,
    great_subsphere_rule,
    hemisphere_moment,
    hemisphere_weights,
    sphere_area,
    stiefel_fubini_check,
    unit_ball_volume,
)


def test_ball_volumes_and_areas() -> None:
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert sphere_area(4) == pytest.approx(2 * math.pi**2)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_product_rules_are_exact(n: int) -> None:
    rule = build_rule(n, 4)
    assert np.allclose(np.linalg.norm(rule.nodes, axis=1), 1.0)
    assert np.all(rule.weights > 0)
    area = sphere_area(n)
    assert rule.integrate(lambda v: 1.0) == pytest.approx(area, rel=1e-13)
    assert rule.integrate(lambda v: v[0] ** 2) == pytest.approx(area / n, rel=1e-12)
    # ∫ x⁴ = 3·area / (n(n + 2))
    assert rule.integrate(lambda v: v[-1] ** 4) == pytest.approx(
        3 * area / (n * (n + 2)), rel=1e-12
    )


def test_zero_sphere() -> None:
    rule = build_rule(1, 3)
    assert sorted(rule.nodes[:, 0].tolist()) == [-1.0, 1.0]
    assert rule.integrate(lambda v: 1.0) == pytest.approx(2.0)


def test_rule_errors() -> None:
    with pytest.raises(UnsupportedError, match="product sphere rules"):
        build_rule(7, 2)
    with pytest.raises(UnsupportedError, match="unknown sphere rule kind"):
        build_rule(3, 2, "lebedev")
    with pytest.raises(ParameterError, match="nonnegative"):
        build_rule(3, -1)


def test_low_discrepancy_rule() -> None:
    rule = build_rule(7, 2, "low-discrepancy", seed=3)
    area = sphere_area(7)
    assert rule.integrate(lambda v: 1.0) == pytest.approx(area, rel=1e-12)
    values = rule.values(lambda v: v[0] ** 2)
    estimate = rule.integrate(values)
    assert rule.error_estimate(values) > 0
    assert estimate == pytest.approx(area / 7, rel=0.1)
    again = build_rule(7, 2, "low-discrepancy", seed=3)
    assert np.array_equal(rule.nodes, again.nodes)


def test_hemispheres_split_evenly(rng: np.random.Generator) -> None:
    rule = build_rule(3, 5)
    u = random_direction(rng, 3)
    assert math.fsum(hemisphere_weights(rule, u)) == pytest.approx(2 * math.pi, rel=1e-13)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_cosine_transform_of_constant(n: int, rng: np.random.Generator) -> None:
    rule = build_rule(n, 6)
    one = SphericalFunction(n, lambda v: 1.0, "even")
    u = random_direction(rng, n)
    assert cosine_transform(one, u, rule) == pytest.approx(2 * unit_ball_volume(n - 1), abs=1e-10)


def test_cosine_transform_annihilates_odd_functions(rng: np.random.Generator) -> None:
    n = 3
    rule = build_rule(n, 6)
    u = random_direction(rng, n)
    odd = [
        SphericalFunction(n, lambda v: v[0] - 0.5 * v[2], "odd"),
        SphericalFunction(n, lambda v: v[0] ** 3 - v[1] * v[2] ** 2, "odd"),
        SphericalFunction(n, lambda v: v[1] * math.cos(v[0]) + v[2] ** 5, "odd"),
    ]
    for f in odd:
        assert abs(cosine_transform(f, u, rule)) <= 1e-10


def test_hemisphere_moment_is_half_the_transform(rng: np.random.Generator) -> None:
    n = 4
    rule = build_rule(n, 6)
    u = random_direction(rng, n)
    f = SphericalFunction(n, lambda v: v[0] ** 2 + v[0] * v[1], "even")
    assert hemisphere_moment(f, u, rule) == pytest.approx(cosine_transform(f, u, rule) / 2, abs=1e-10)


def test_parity_tags_are_checked() -> None:
    with pytest.raises(ParameterError, match="violates its parity"):
        SphericalFunction(3, lambda v: v[0], "even")
    with pytest.raises(ParameterError, match="parity must be"):
        SphericalFunction(3, lambda v: 1.0, "neither")


def test_great_subsphere_is_orthogonal(rng: np.random.Generator) -> None:
    u = random_direction(rng, 4)
    rule = great_subsphere_rule(4, 3, u)
    assert np.max(np.abs(rule.nodes @ u)) < 1e-14
    assert rule.integrate(lambda v: 1.0) == pytest.approx(sphere_area(3))


def test_stiefel_fubini_constant() -> None:
    result = stiefel_fubini_check(lambda u, v: 1.0, build_rule(3, 4))
    assert result.lhs == pytest.approx(8 * math.pi**2, abs=1e-10)
    assert result.rhs == pytest.approx(8 * math.pi**2, abs=1e-10)


@pytest.mark.parametrize("n", [3, 4])
def test_stiefel_fubini_swaps_order(n: int) -> None:
    def f(u: np.ndarray, v: np.ndarray) -> float:
        return u[0] ** 2 * v[1] ** 4 + u[1] * v[0] + (u[0] + 2 * u[1]) ** 2 * (v[0] - v[-1]) ** 2

    result = stiefel_fubini_check(f, build_rule(n, 4))
    assert result.relative_defect <= 1e-8

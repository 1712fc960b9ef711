#!/usr/bin/env python3
"""Experiment configuration, report rows and the run loop."""

from __future__ import annotations

import copy
import json
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from model_spaces import AlgebraError, SpaceSpec, make_space
from riemann import (
    ChartMetric,
    Error,
    ParameterError,
    TangentVector,
    UnsupportedError,
)
from tubes import FramedCurve, coordinate_circle, frame_curve, geodesic_curve
from volume_density import unit_tangent

from .jsonserializer import ConfigError, JsonSerializable

__all__ = [
    "EXPERIMENTS",
    "ConfigError",
    "CurveConfig",
    "ExperimentConfig",
    "OutputConfig",
    "QuadratureConfig",
    "ReportRow",
    "RunResult",
    "SampleConfig",
    "Tolerances",
    "apply_overrides",
    "run",
]

log = logging.getLogger(__name__)

VERSION = "0.1.0"

EXPERIMENTS = (
    "density-profile",
    "ball-volumes",
    "tube-volume",
    "tube-invariants",
    "check-harmonic",
    "check-datri",
    "transform-cosine",
    "stiefel-fubini",
    "series-fit",
    "steiner-check",
    "mean-curvature",
    "involution-symmetry",
    "gheysens-vanhecke",
)
FORMATS = ("csv", "json", "plot", "table")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


@dataclass
class CurveConfig(JsonSerializable):
    kind: str = "geodesic"
    point: list[float] | None = None
    direction: list[float] | None = None
    length: float = 1.0
    radius: float = 0.5
    plane: list[int] = field(default_factory=lambda: [0, 1])

    def build(self, metric: ChartMetric) -> FramedCurve:
        point = metric.origin() if self.point is None else np.asarray(self.point, dtype=float)
        match self.kind:
            case "geodesic":
                direction = self.direction
                if direction is None:
                    direction = [1.0 if i == 0 else 0.0 for i in range(metric.dim)]
                curve = geodesic_curve(metric, point, direction, self.length)
            case "circle":
                curve = coordinate_circle(point, self.radius, (self.plane[0], self.plane[1]))
            case _:
                msg = f"unknown curve kind {self.kind!r}, choose geodesic or circle"
                raise ConfigError(msg)
        return frame_curve(metric, curve)


@dataclass
class QuadratureConfig(JsonSerializable):
    rule_level: int = 6
    rule_kind: str | None = None
    radial_order: int = 16
    t_panels: int = 2
    t_order: int = 16


@dataclass
class Tolerances(JsonSerializable):
    value: float = 1e-4
    relative: bool = True
    # Absolute slack for relative comparisons against references that vanish.
    floor: float = 1e-12

    def accepts(self, value: float, reference: float) -> bool:
        if self.relative:
            return abs(value - reference) <= self.value * abs(reference) + self.floor
        return abs(value - reference) <= self.value


@dataclass
class SampleConfig(JsonSerializable):
    points: int = 1
    directions: int = 8
    # Base points are drawn in a coordinate box of this half-width times the chart scale.
    spread: float = 0.2

    def vectors(self, metric: ChartMetric, seed: int) -> list[TangentVector]:
        """``points × directions`` unit vectors; the first point is the chart center."""
        rng = np.random.default_rng(seed)
        origin = metric.origin()
        points = [origin]
        while len(points) < self.points:
            candidate = origin + self.spread * metric.coordinate_scale * rng.uniform(
                -1, 1, metric.dim
            )
            if metric.contains(candidate):
                points.append(candidate)
        return [
            unit_tangent(metric, p, rng.normal(size=metric.dim))
            for p in points
            for _ in range(self.directions)
        ]


@dataclass
class OutputConfig(JsonSerializable):
    format: str = "csv"
    path: str | None = None


@dataclass
class ExperimentConfig(JsonSerializable):
    experiment: str
    space: dict[str, Any]
    radii: Any = field(default_factory=lambda: [0.5])
    curve: CurveConfig = field(default_factory=CurveConfig)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    tolerances: Tolerances = field(default_factory=Tolerances)
    samples: SampleConfig = field(default_factory=SampleConfig)
    options: dict[str, Any] = field(default_factory=dict)
    expect: str = "pass"
    seed: int = 0
    timestamp: str = "1970-01-01T00:00:00"
    output: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            msg = f"unknown experiment {self.experiment!r}, choose one of {', '.join(EXPERIMENTS)}"
            raise ConfigError(msg)
        if self.expect not in ("pass", "fail"):
            msg = f"expect must be 'pass' or 'fail', got {self.expect!r}"
            raise ConfigError(msg)
        if self.output.format not in FORMATS:
            msg = f"unknown output format {self.output.format!r}"
            raise ConfigError(msg)
        if not isinstance(self.space, dict) or "kind" not in self.space:
            msg = "space must be an object with a 'kind'"
            raise ConfigError(msg)
        values = self.radius_values
        if not values or min(values) <= 0:
            msg = f"radii must be positive, got {values}"
            raise ConfigError(msg)
        if any(b <= a for a, b in zip(values, values[1:], strict=False)):
            msg = f"radii must be strictly increasing, got {values}"
            raise ConfigError(msg)

    @property
    def radius_values(self) -> list[float]:
        radii = self.radii
        if isinstance(radii, int | float):
            return [float(radii)]
        if isinstance(radii, dict):
            try:
                grid = np.linspace(float(radii["start"]), float(radii["stop"]), int(radii["num"]))
            except KeyError as e:
                msg = f"radius ranges need start, stop and num; missing {e}"
                raise ConfigError(msg) from e
            return [float(r) for r in grid]
        if isinstance(radii, list):
            return [float(r) for r in radii]
        msg = f"radii must be a number, a list or a range, got {radii!r}"
        raise ConfigError(msg)

    @property
    def space_spec(self) -> SpaceSpec:
        return SpaceSpec.from_mapping(self.space)

    def option(self, key: str, default: Any) -> Any:
        return self.options.get(key, default)


@dataclass
class ReportRow(JsonSerializable):
    experiment: str
    space: str
    r: float
    quantity: str
    value: float
    error: float = 0.0
    reference: float | None = None
    passed: bool = True
    expected_fail: bool = False
    # must pass even when the config expects failures
    control: bool = False

    def __post_init__(self) -> None:
        self.error = abs(self.error)

    @property
    def status(self) -> str:
        if self.expected_fail:
            return "expected-fail"
        return "true" if self.passed else "false"


@dataclass
class RunResult:
    config: ExperimentConfig
    rows: list[ReportRow]
    status: int


def apply_overrides(document: dict[str, Any], overrides: Sequence[str]) -> dict[str, Any]:
    """Patch dotted paths of a raw config with ``key=value`` pairs; values parse as JSON if they can."""
    patched = copy.deepcopy(document)
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            msg = f"overrides look like key=value, got {item!r}"
            raise ConfigError(msg)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        target = patched
        *parents, leaf = key.split(".")
        for part in parents:
            node = target.setdefault(part, {})
            if not isinstance(node, dict):
                msg = f"cannot override {key}: {part} is not an object"
                raise ConfigError(msg)
            target = node
        target[leaf] = value
    return patched


def _describe(config: ExperimentConfig) -> str:
    try:
        return config.space_spec.describe()
    except Error:
        return str(config.space.get("kind"))


def _status(config: ExperimentConfig, rows: list[ReportRow]) -> int:
    failed = [row for row in rows if not row.passed]
    if config.expect == "fail":
        broken = [row for row in failed if row.control]
        expected = [row for row in failed if not row.control]
        for row in broken:
            log.error(f"control check failed: {row.quantity} at r = {row.r}")
        for row in expected:
            row.expected_fail = True
            log.warning(f"expected failure: {row.quantity} at r = {row.r}")
        if not expected:
            log.error(f"{config.experiment} was expected to fail but every check passed")
            return EXIT_CHECK_FAILED
        return EXIT_CHECK_FAILED if broken else EXIT_OK
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def run(config: ExperimentConfig, threads: int = 1) -> RunResult:
    from . import experiments

    log.info(f"running {config.experiment} on {_describe(config)}")
    try:
        metric = make_space(config.space_spec)
        rows = experiments.EXPERIMENTS[config.experiment](config, metric, threads)
    except (ParameterError, UnsupportedError, AlgebraError) as e:
        raise ConfigError(str(e)) from e
    except Error as e:
        log.error(f"{config.experiment} failed: {type(e).__name__}: {e}")  # noqa: TRY400
        row = ReportRow(
            experiment=config.experiment,
            space=_describe(config),
            r=config.radius_values[-1],
            quantity="failure",
            value=math.nan,
            passed=False,
        )
        return RunResult(config, [row], EXIT_NUMERICAL)
    log.info(f"{config.experiment}: {len(rows)} rows")
    return RunResult(config, rows, _status(config, rows))

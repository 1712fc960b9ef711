from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any

import pytest
from click.testing import CliRunner

from tubelab import (
    EXIT_CHECK_FAILED,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_USAGE,
    ConfigError,
    ExperimentConfig,
    ReportRow,
    Tolerances,
    apply_overrides,
    run,
)
from tubelab.cli import cli
from tubelab.export import FIELDNAMES, FLOAT_FORMAT, plot_series, rows_from_json


def write_config(tmp_path: Path, document: Any, name: str = "config.json") -> str:
    path = tmp_path / name
    path.write_text(json.dumps(document))
    return str(path)


def invoke(*args: str) -> Any:
    return CliRunner().invoke(cli, ["run", *args])


COSINE = {"experiment": "transform-cosine", "space": {"kind": "r3"}, "radii": [1.0]}
CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_unknown_keys_are_rejected() -> None:
    with pytest.raises(ConfigError, match="unknown keys"):
        ExperimentConfig.from_json({**COSINE, "radius": 0.5})
    with pytest.raises(ConfigError, match="unknown keys"):
        ExperimentConfig.from_json({**COSINE, "quadrature": {"level": 4}})


def test_radius_grids() -> None:
    config = ExperimentConfig.from_json({**COSINE, "radii": {"start": 0.1, "stop": 0.3, "num": 3}})
    assert config.radius_values == pytest.approx([0.1, 0.2, 0.3])
    assert ExperimentConfig.from_json({**COSINE, "radii": 0.25}).radius_values == [0.25]
    with pytest.raises(ConfigError, match="strictly increasing"):
        ExperimentConfig.from_json({**COSINE, "radii": [0.3, 0.1]})
    with pytest.raises(ConfigError, match="positive"):
        ExperimentConfig.from_json({**COSINE, "radii": [0.0, 0.1]})
    with pytest.raises(ConfigError, match="start, stop and num"):
        ExperimentConfig.from_json({**COSINE, "radii": {"start": 0.1}})


def test_config_validation() -> None:
    with pytest.raises(ConfigError, match="unknown experiment"):
        ExperimentConfig.from_json({**COSINE, "experiment": "tube-area"})
    with pytest.raises(ConfigError, match="expect"):
        ExperimentConfig.from_json({**COSINE, "expect": "maybe"})
    with pytest.raises(ConfigError, match="kind"):
        ExperimentConfig.from_json({**COSINE, "space": {"n": 3}})


def test_apply_overrides() -> None:
    document = {"a": {"b": 1}}
    patched = apply_overrides(document, ["a.b=2", 'c.d="x"', "e=word", "f=[1, 2]"])
    assert patched == {"a": {"b": 2}, "c": {"d": "x"}, "e": "word", "f": [1, 2]}
    assert document == {"a": {"b": 1}}
    with pytest.raises(ConfigError, match="key=value"):
        apply_overrides(document, ["novalue"])
    with pytest.raises(ConfigError, match="not an object"):
        apply_overrides(document, ["a.b.c=1"])


def test_tolerances() -> None:
    assert Tolerances(1e-3).accepts(1.0005, 1.0)
    assert not Tolerances(1e-3).accepts(1.01, 1.0)
    assert Tolerances(0.1, relative=False).accepts(0.05, 0.0)


def test_rows_store_error_magnitudes() -> None:
    row = ReportRow("tube-volume", "r3", 0.5, "volume", 1.0, error=-2e-9)
    assert row.error == 2e-9
    assert row.status == "true"


def test_non_finite_values_become_null() -> None:
    row = ReportRow("steiner-check", "r3", 0.3, "steiner_residual_ratio", math.inf)
    assert row.to_dict()["value"] is None
    assert ReportRow("x", "r3", 0.3, "q", math.nan).to_dict()["value"] is None


def test_cosine_transform_run() -> None:
    result = run(ExperimentConfig.from_json(COSINE))
    assert result.status == EXIT_OK
    rows = {row.quantity: row for row in result.rows}
    assert rows["cosine_constant"].value == pytest.approx(2 * math.pi)
    assert all(row.passed for row in result.rows)


def test_csv_output(tmp_path: Path) -> None:
    out = tmp_path / "rows.csv"
    result = invoke(write_config(tmp_path, COSINE), "--out", str(out))
    assert result.exit_code == EXIT_OK, result.output
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(FIELDNAMES)
    assert lines[0] == "experiment,space,r,quantity,value,error,reference,pass"
    rows = list(csv.DictReader(lines))
    constant = next(row for row in rows if row["quantity"] == "cosine_constant")
    assert float(constant["value"]) == pytest.approx(2 * math.pi)
    assert constant["pass"] == "true"
    assert constant["space"] == "euclidean(n=3)"


def test_output_is_deterministic(tmp_path: Path) -> None:
    config = write_config(tmp_path, {**COSINE, "output": {"format": "json"}})
    first, second = tmp_path / "first.json", tmp_path / "second.json"
    assert invoke(config, "--out", str(first)).exit_code == EXIT_OK
    assert invoke(config, "--out", str(second), "--threads", "2").exit_code == EXIT_OK
    assert first.read_bytes() == second.read_bytes()
    document = json.loads(first.read_text())
    assert document["meta"]["timestamp"] == "1970-01-01T00:00:00"
    assert document["meta"]["float_format"] == FLOAT_FORMAT
    assert document["meta"]["config"]["experiment"] == "transform-cosine"
    rows = rows_from_json(first.read_text())
    assert {row.quantity for row in rows} >= {"cosine_constant"}


def test_plot_output(tmp_path: Path) -> None:
    out = tmp_path / "plot.json"
    result = invoke(write_config(tmp_path, COSINE), "--format", "plot", "--out", str(out))
    assert result.exit_code == EXIT_OK
    series = json.loads(out.read_text())
    r, value, reference = series["cosine_constant"][0]
    assert r == 1.0
    assert value == pytest.approx(reference)
    rows = [
        ReportRow("density-profile", "h3", r, "theta", 1.0 + r, reference=None)
        for r in (0.3, 0.1, 0.2)
    ]
    assert [p[0] for p in plot_series(rows)["theta"]] == [0.1, 0.2, 0.3]


def test_table_output(tmp_path: Path) -> None:
    out = tmp_path / "table.txt"
    result = invoke(write_config(tmp_path, COSINE), "--format", "table", "--out", str(out))
    assert result.exit_code == EXIT_OK
    text = out.read_text()
    assert "cosine_constant" in text
    assert "Total" in text


def test_overrides_from_the_command_line(tmp_path: Path) -> None:
    out = tmp_path / "rows.csv"
    config = write_config(tmp_path, COSINE)
    result = invoke(config, "--out", str(out), "--override", "radii=[2.0]")
    assert result.exit_code == EXIT_OK
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert {row["r"] for row in rows} == {"2.0"}


def test_expected_failure(tmp_path: Path) -> None:
    document = {
        "experiment": "check-harmonic",
        "space": {"kind": "s2xr"},
        "options": {"K": 2},
        "samples": {"points": 1, "directions": 4},
        "expect": "fail",
    }
    out = tmp_path / "rows.csv"
    result = invoke(write_config(tmp_path, document), "--out", str(out))
    assert result.exit_code == EXIT_OK
    statuses = {row["quantity"]: row["pass"] for row in csv.DictReader(out.read_text().splitlines())}
    assert statuses["a2_variation"] == "expected-fail"
    assert statuses["a0_variation"] == "true"


def test_unexpected_pass_is_a_failure() -> None:
    config = ExperimentConfig.from_json({**COSINE, "expect": "fail"})
    assert run(config).status == EXIT_CHECK_FAILED


def test_ellipsoid_is_not_datri() -> None:
    document = json.loads((CONFIGS / "datri-ellipsoid.json").read_text())
    result = run(ExperimentConfig.from_json(document))
    assert result.status == EXIT_OK
    rows = {row.quantity: row for row in result.rows}
    floor = rows["first_integral_defect_floor"]
    assert floor.control
    assert floor.passed
    assert floor.value > 1e-3
    assert rows["first_integral_defect"].status == "expected-fail"
    # a control row that fails is a real failure even when failures are expected
    document["options"]["min_first_integral_defect"] = 1.0
    result = run(ExperimentConfig.from_json(document))
    assert result.status == EXIT_CHECK_FAILED
    floor = next(row for row in result.rows if row.quantity == "first_integral_defect_floor")
    assert floor.status == "false"


def test_steiner_rows_for_polynomial_volumes() -> None:
    document = {
        "experiment": "steiner-check",
        "space": {"kind": "r3"},
        "radii": [0.3],
        "curve": {"kind": "geodesic", "length": 1.0},
        "quadrature": {"rule_level": 2, "t_panels": 1, "t_order": 4},
        "tolerances": {"value": 1e-6, "relative": False},
    }
    result = run(ExperimentConfig.from_json(document))
    assert result.status == EXIT_OK
    quantities = [row.quantity for row in result.rows]
    assert quantities.count("steiner_residual") == 2
    assert "steiner_residual_ratio" not in quantities


@pytest.mark.slow
def test_steiner_ratio_rows() -> None:
    document = json.loads((CONFIGS / "steiner-h3.json").read_text())
    result = run(ExperimentConfig.from_json(document))
    assert result.status == EXIT_OK
    ratios = [row for row in result.rows if row.quantity == "steiner_residual_ratio"]
    assert len(ratios) == 2
    for row in ratios:
        assert row.reference == 16.0
        assert 12 <= row.value <= 20
        assert row.passed


def test_usage_errors(tmp_path: Path) -> None:
    result = invoke(write_config(tmp_path, {**COSINE, "experiment": "unknown"}))
    assert result.exit_code == EXIT_USAGE
    assert "unknown experiment" in result.output
    result = invoke(write_config(tmp_path, [1, 2], "list.json"))
    assert result.exit_code == EXIT_USAGE
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert invoke(str(bad)).exit_code == EXIT_USAGE
    degenerate = {**COSINE, "space": {"kind": "sphere", "n": 1}}
    assert invoke(write_config(tmp_path, degenerate, "n1.json")).exit_code == EXIT_USAGE


def test_self_focusing_tube_is_a_numerical_failure(tmp_path: Path) -> None:
    document = {
        "experiment": "tube-volume",
        "space": {"kind": "r3"},
        "radii": [0.4],
        "curve": {"kind": "circle", "point": [0.0, 0.0, 0.0], "radius": 0.3},
        "quadrature": {"rule_level": 3, "t_order": 8},
    }
    out = tmp_path / "rows.csv"
    result = invoke(write_config(tmp_path, document), "--out", str(out))
    assert result.exit_code == EXIT_NUMERICAL
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert rows[0]["quantity"] == "failure"
    assert rows[0]["value"] == "nan"
    assert rows[0]["pass"] == "false"


@pytest.mark.slow
def test_hyperbolic_tube_volume(tmp_path: Path) -> None:
    document = {
        "experiment": "tube-volume",
        "space": {"kind": "h3"},
        "radii": [0.5],
        "curve": {"kind": "geodesic", "length": 1.0},
    }
    out = tmp_path / "rows.json"
    result = invoke(write_config(tmp_path, document), "--format", "json", "--out", str(out))
    assert result.exit_code == EXIT_OK
    (row,) = rows_from_json(out.read_text())
    assert row.value == pytest.approx(math.pi * math.sinh(0.5) ** 2, rel=1e-4)
    assert row.passed

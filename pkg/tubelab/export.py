import csv
import json
import sys
from collections import defaultdict
from pathlib import Path
from typing import IO

from rich.console import Console
from rich.table import Table

from . import VERSION, ExperimentConfig, ReportRow
from .jsonserializer import JsonEncoder

FIELDNAMES = ["experiment", "space", "r", "quantity", "value", "error", "reference", "pass"]
# Floats are written with the shortest repr that round-trips, i.e. full IEEE 754
# double precision. CSV spells non-finite values nan/inf; JSON writes null.
FLOAT_FORMAT = "repr-roundtrip-float64"


def format_float(x: float | None) -> str:
    """Shortest repr that round-trips, so files keep full double precision."""
    if x is None:
        return ""
    return repr(float(x))


def as_csv(rows: list[ReportRow], config: ExperimentConfig, out: IO[str]) -> None:
    writer = csv.DictWriter(out, fieldnames=FIELDNAMES, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(
            dict(
                experiment=row.experiment,
                space=row.space,
                r=format_float(row.r),
                quantity=row.quantity,
                value=format_float(row.value),
                error=format_float(row.error),
                reference=format_float(row.reference),
                **{"pass": row.status},
            )
        )


def as_json(rows: list[ReportRow], config: ExperimentConfig, out: IO[str]) -> None:
    data = {
        "meta": {
            "config": config.to_dict(),
            "float_format": FLOAT_FORMAT,
            "version": VERSION,
            "timestamp": config.timestamp,
        },
        "rows": [row.to_dict() for row in rows],
    }
    json.dump(data, out, indent=4, sort_keys=True, cls=JsonEncoder)
    out.write("\n")


def rows_from_json(text: str) -> list[ReportRow]:
    return [ReportRow.from_json(row) for row in json.loads(text)["rows"]]


def plot_series(rows: list[ReportRow]) -> dict[str, list[list[float | None]]]:
    """(r, value, reference) triples per quantity, sorted by r."""
    series: dict[str, list[list[float | None]]] = defaultdict(list)
    for row in rows:
        series[row.quantity].append([row.r, row.value, row.reference])
    return {name: sorted(points, key=lambda p: p[0] or 0.0) for name, points in sorted(series.items())}


def as_plot_data(rows: list[ReportRow], config: ExperimentConfig, out: IO[str]) -> None:
    json.dump(plot_series(rows), out, indent=4, sort_keys=True, cls=JsonEncoder)
    out.write("\n")


def as_rich_table(rows: list[ReportRow], config: ExperimentConfig, out: IO[str]) -> None:
    console = Console(file=out)

    table = Table(
        title=f"{config.experiment} on {rows[0].space}",
        show_header=True,
        header_style="bold magenta",
    )
    table.add_column("r", justify="right")
    table.add_column("Quantity", style="dim")
    table.add_column("Value", justify="right")
    table.add_column("Error", justify="right")
    table.add_column("Reference", justify="right")
    table.add_column("Pass")

    failed = 0
    for row in rows:
        if not row.passed and not row.expected_fail:
            failed += 1
        table.add_row(
            f"{row.r:.4g}",
            row.quantity,
            f"{row.value:.10g}",
            f"{row.error:.2e}",
            "" if row.reference is None else f"{row.reference:.10g}",
            row.status,
            style=None if row.passed or row.expected_fail else "red",
        )

    table.add_row("", "", "", "", "", "", end_section=True)
    table.add_row("Total", f"{len(rows)} rows", "", "", "", f"{failed} failed", style="bold")

    console.print(table)


WRITERS = {
    "csv": as_csv,
    "json": as_json,
    "plot": as_plot_data,
    "table": as_rich_table,
}


def emit(
    rows: list[ReportRow],
    config: ExperimentConfig,
    fmt: str = "csv",
    path: str | Path | None = None,
) -> None:
    if not rows:
        msg = "nothing to emit"
        raise ValueError(msg)
    writer = WRITERS[fmt]
    if path is None:
        writer(rows, config, sys.stdout)
        return
    with Path(path).open("w", newline="") as out:
        writer(rows, config, out)

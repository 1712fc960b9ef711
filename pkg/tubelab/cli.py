from __future__ import annotations

import json
import logging
import sys
from pathlib import Path
from typing import Any

import click
from click_option_group import optgroup

from . import FORMATS, ConfigError, ExperimentConfig, apply_overrides, run
from .export import emit

log = logging.getLogger(__name__)


def load_document(ctx: click.Context, param: click.Parameter, value: str) -> Any:
    try:
        return json.loads(Path(value).read_text())
    except json.JSONDecodeError as e:
        msg = f"{value} is not valid JSON: {e}"
        raise click.BadParameter(msg, ctx=ctx, param=param) from e


def set_log_level(ctx: click.Context, param: click.Parameter, value: str) -> str:
    if value:
        logging.basicConfig(
            level=getattr(logging, value.upper()),
            format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        )
    return value


@click.group()
@click.option(
    "--log-level",
    default="WARNING",
    callback=set_log_level,
    expose_value=False,
    is_eager=True,
    help="Set the logging level (e.g., DEBUG, INFO, WARNING, ERROR, CRITICAL)",
)
def cli() -> None:
    """Numerical experiments on volume densities, geodesic balls and tubes."""


@cli.command(name="run")
@click.argument(
    "document", metavar="CONFIG", type=click.Path(exists=True), callback=load_document
)
@optgroup.group("Output", help="Where and how rows are written")
@optgroup.option("--out", type=click.Path(dir_okay=False), help="Output file (default: config output.path or stdout).")
@optgroup.option("--format", "fmt", type=click.Choice(FORMATS), help="Output format (default: config output.format).")
@optgroup.group("Execution", help="Run settings that never change results")
@optgroup.option("--threads", default=1, show_default=True, type=click.IntRange(min=1), help="Worker threads for ray integration.")
@click.option(
    "--override",
    "overrides",
    multiple=True,
    metavar="KEY=VALUE",
    help="Patch a dotted config path, e.g. quadrature.rule_level=4; values parse as JSON when possible.",
)
def run_command(
    document: Any,
    out: str | None,
    fmt: str | None,
    threads: int,
    overrides: tuple[str, ...],
) -> None:
    """Run the experiment described by CONFIG and write its report rows."""
    if not isinstance(document, dict):
        msg = "a config is a JSON object"
        raise click.UsageError(msg)
    try:
        config = ExperimentConfig.from_json(apply_overrides(document, overrides))
        result = run(config, threads)
    except ConfigError as e:
        raise click.UsageError(str(e)) from e
    path = out or config.output.path
    emit(result.rows, config, fmt or config.output.format, path)
    if path:
        log.info(f"wrote {len(result.rows)} rows to {path}")
    sys.exit(result.status)


def main() -> None:
    cli()


if __name__ == "__main__":
    main()

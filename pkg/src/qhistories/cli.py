"""Command line front end.

``qhistories run scenario.yaml`` parses, executes and prints the report.
Exit codes: 0 for a completed run (physics verdicts included), 2 for
parse, reference or dimension errors, 3 for execution errors.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from ._version import __version__
from .errors import DimensionMismatch, ExecutionError, ParseError, UnknownReference
from .linalg import DEFAULT_TOLERANCES, STRICT_TOLERANCES
from .scenario import parse_scenario, render_report, run_scenario

_PROFILES = {"default": DEFAULT_TOLERANCES, "strict": STRICT_TOLERANCES}


@click.group()
@click.version_option(version=__version__, prog_name="qhistories")
def main() -> None:
    """Consistent-histories scenario runner."""


@main.command()
@click.argument(
    "scenario_file",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
)
@click.option(
    "--format",
    "fmt",
    type=click.Choice(["text", "machine"]),
    default="text",
    show_default=True,
    help="Report rendering: aligned text or JSON.",
)
@click.option(
    "--out",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Write the report here instead of stdout.",
)
@click.option(
    "--tolerance-profile",
    type=click.Choice(sorted(_PROFILES)),
    default="default",
    show_default=True,
    help="Numerical tolerance profile for every check in the run.",
)
def run(scenario_file: Path, fmt: str, out: Path | None, tolerance_profile: str) -> None:
    """Execute a scenario file and emit its report."""
    try:
        scenario = parse_scenario(scenario_file)
    except (ParseError, UnknownReference, DimensionMismatch) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    try:
        report = run_scenario(
            scenario,
            tolerances=_PROFILES[tolerance_profile],
            profile=tolerance_profile,
        )
    except ExecutionError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)
    payload = render_report(report, fmt)
    if out is not None:
        out.write_bytes(payload)
    else:
        sys.stdout.buffer.write(payload)
        sys.stdout.buffer.flush()

"""Command-line rendering of envcontours artifacts."""

from __future__ import annotations

import sys

import click

from .render import KINDS, RenderError, build_figure, save_figure


@click.command("render")
@click.option(
    "--kind", required=True, type=click.Choice(sorted(KINDS)), help="figure kind"
)
@click.option(
    "--in", "in_path", required=True, type=click.Path(exists=True),
    help="input artifact (JSON file; density-matrix also accepts a study directory)",
)
@click.option("--out", "out_path", required=True, type=click.Path(), help="output image")
@click.option(
    "--report", "report_path", type=click.Path(exists=True), default=None,
    help="study report JSON supplying design-point markers (contour-3d only)",
)
@click.option(
    "--method", default=None,
    help="method whose design point to mark in red (contour-3d; defaults to the "
    "first non-perfect-dependence method in the report)",
)
def render(kind, in_path, out_path, report_path, method):
    """Render one figure from an envcontours JSON artifact."""
    try:
        fig = build_figure(kind, in_path, report_path=report_path, method=method)
        save_figure(fig, out_path)
    except (RenderError, KeyError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    render()

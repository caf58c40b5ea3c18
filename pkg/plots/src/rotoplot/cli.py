"""`plot` command: render one figure kind from rotostate output files.

Exit status: 0 on success, 1 on malformed or missing input, 2 on usage
errors.
"""

from __future__ import annotations

import os
import sys

import click

from . import __version__
from .io import (FormatError, load_branch, load_diagnostics, load_levelsets,
                 load_raster)
from .render import (plot_branch, plot_levelsets, plot_residual_history,
                     plot_vorticity)

KINDS = ("branch", "levelsets", "vorticity", "residual-history")


@click.command()
@click.version_option(__version__)
@click.option("--kind", type=click.Choice(KINDS), required=True)
@click.option("--in", "inputs", type=str, multiple=True, required=True,
              help="Input file, or a directory of rotostate artifacts.")
@click.option("--out", type=str, required=True, help="Output PNG path.")
@click.option("--dpi", type=int, default=150, show_default=True)
def main(kind, inputs, out, dpi):
    """Render branch diagrams, level sets and vorticity maps to PNG."""
    paths = []
    for item in inputs:
        if os.path.isdir(item):
            default = {"branch": "branch.jsonl",
                       "residual-history": "branch.jsonl",
                       "levelsets": "levelsets.csv",
                       "vorticity": "raster.csv"}[kind]
            paths.append(os.path.join(item, default))
            if kind == "vorticity":
                lvl = os.path.join(item, "levelsets.csv")
                if os.path.isfile(lvl):
                    paths.append(lvl)
        else:
            paths.append(item)
    try:
        if kind == "branch":
            fig = plot_branch(*load_branch(paths[0]))
        elif kind == "residual-history":
            _, points = load_branch(paths[0])
            fig = plot_residual_history(points)
        elif kind == "levelsets":
            fig = plot_levelsets(load_levelsets(paths[0]))
        else:
            raster, extent = load_raster(paths[0])
            curves = None
            for p in paths[1:]:
                curves = load_levelsets(p)
            fig = plot_vorticity(raster, extent, curves)
    except FormatError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    fig.savefig(out, dpi=dpi)
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()

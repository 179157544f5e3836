import logging
import sys
from pathlib import Path

import click

from lib import VERSION, env_loader
from routers import (
    ClassifyRouter,
    CohomologyRouter,
    CornersRouter,
    EllipticRouter,
    GlueRouter,
    PhgRouter,
    WeightsRouter,
)
from routers.common import Settings


def _configure_logging() -> None:
    root = logging.getLogger()
    for handler in [h for h in root.handlers if getattr(h, "_bcalc", False)]:
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    handler._bcalc = True
    root.addHandler(handler)
    root.setLevel(env_loader.BCALC_LOG_LEVEL)


@click.group()
@click.version_option(VERSION, prog_name="bcalc")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="Write the report here instead of stdout.")
@click.option("--csv-dir", type=click.Path(file_okay=False, path_type=Path), help="Directory for probe and sweep tables.")
@click.option("--order", type=click.IntRange(min=1), help="Derivative certification depth.")
@click.option("--grid", type=click.IntRange(min=8), help="Collocation points for weighted solves.")
@click.option("--trunc", type=click.FloatRange(min=1.0), help="Truncation of the cylinder coordinate.")
@click.option("--seed", type=int, help="Seed for sampled checks.")
@click.pass_context
def app(ctx: click.Context, out, csv_dir, order, grid, trunc, seed):
    """b-calculus workbench: each command reads a JSON manifest and prints a JSON report"""
    env_loader.reload()
    flags = {"order": order, "grid": grid, "trunc": trunc, "seed": seed}
    flags = {k: v for k, v in flags.items() if v is not None}
    for key, value in flags.items():
        setattr(env_loader, f"BCALC_{key.upper()}", value)
    _configure_logging()
    ctx.obj = Settings(out=out, csv_dir=csv_dir, flags=flags)


app.add_command(ClassifyRouter)
app.add_command(CornersRouter)
app.add_command(WeightsRouter)
app.add_command(GlueRouter)
app.add_command(PhgRouter)
app.add_command(EllipticRouter)
app.add_command(CohomologyRouter)


if __name__ == "__main__":
    app()

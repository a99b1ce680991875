# File: /cqnls/cli.py
"""
cqnls command line: verify | simulate | tune | sweep.

Exit codes: 0 success, 1 identity failure or run error, 2 config error,
3 sweep finished with failed runs.
"""

from __future__ import annotations
import functools
import sys
from pathlib import Path
from typing import Callable, Optional, Tuple

import click

from cqnls import __version__
from cqnls import main as orchestrator
from cqnls.errors import CqnlsError, InvalidConfigError, SweepError
from cqnls.runconfig import RunConfig, load_run_config
from cqnls.utils.logger import get_logger

logger = get_logger("cqnls")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_PARTIAL = 3


def _config_command(fn: Callable[[RunConfig, Optional[Path]], int]) -> Callable:
    """Shared arguments plus the error-to-exit-code mapping."""

    @click.argument("config", required=False, type=click.Path(dir_okay=False, path_type=Path))
    @click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), default=None,
                  help="Output directory; overrides [output] dir.")
    @click.option("--override", "overrides", multiple=True, metavar="KEY=VALUE",
                  help="Set a config key, e.g. grid.n=4095. Repeatable.")
    @functools.wraps(fn)
    def wrapper(config: Optional[Path], out_dir: Optional[Path], overrides: Tuple[str, ...]) -> None:
        try:
            cfg = load_run_config(config, overrides)
        except InvalidConfigError as e:
            click.echo(f"config error: {e}", err=True)
            sys.exit(EXIT_CONFIG)
        try:
            code = fn(cfg, out_dir)
        except InvalidConfigError as e:
            click.echo(f"config error: {e}", err=True)
            sys.exit(EXIT_CONFIG)
        except SweepError as e:
            click.echo(str(e), err=True)
            for status in e.statuses:
                if status["status"] != "ok":
                    click.echo(f"  run {status['index']:03d}: {status['status']}: {status['error']}", err=True)
            sys.exit(EXIT_PARTIAL)
        except CqnlsError as e:
            logger.error("💥 %s failed: %s", fn.__name__, e)
            click.echo(f"error: {e}", err=True)
            sys.exit(EXIT_FAILURE)
        sys.exit(code)

    return wrapper


@click.group()
@click.version_option(__version__, prog_name="cqnls")
def cli() -> None:
    """Radial cubic-quintic NLS threshold toolkit."""


@cli.command()
@_config_command
def verify(cfg: RunConfig, out_dir: Optional[Path]) -> int:
    """Run the identity battery and print the residual table."""
    report = orchestrator.run_verify(cfg, out_dir)
    frame = report.to_frame()[["name", "residual", "tolerance", "passed", "requires_refinement"]]
    click.echo(frame.to_string(index=False, float_format=lambda x: f"{x:.3e}"))
    if not report.passed:
        click.echo(f"FAILED: {', '.join(report.failures)}", err=True)
        return EXIT_FAILURE
    return EXIT_OK


@cli.command()
@_config_command
def simulate(cfg: RunConfig, out_dir: Optional[Path]) -> int:
    """Simulate the configured data and write the run artifacts."""
    summary = orchestrator.run_simulate(cfg, out_dir)
    outcome = summary.get("outcome") or {}
    click.echo(
        f"termination={summary['termination']} t={summary['final_time']:g} "
        f"classification={outcome.get('classification')}"
    )
    return EXIT_OK


@cli.command()
@_config_command
def tune(cfg: RunConfig, out_dir: Optional[Path]) -> int:
    """Tune the configured family onto the threshold energy."""
    result = orchestrator.run_tune(cfg, out_dir)
    click.echo(
        f"amplitude={result.amplitude:.17g} energy={result.achieved_energy:.17g} grad_ratio={result.grad_ratio:.6g}"
    )
    return EXIT_OK


@cli.command("sweep")
@_config_command
def sweep_cmd(cfg: RunConfig, out_dir: Optional[Path]) -> int:
    """Run every [[sweep]] entry and write sweep.csv."""
    frame = orchestrator.run_sweep(cfg, out_dir)
    click.echo(frame[["index", "kind", "side", "classification", "t_detect", "status"]].to_string(index=False))
    return EXIT_OK


if __name__ == "__main__":
    cli()

"""
Main CLI entry point for nls-lab.
"""

import click

from nls_lab import __version__
from nls_lab.cli.lab_runner import cli as lab_cli
from nls_lab.core.error_handling import setup_logging


@click.group()
@click.version_option(version=__version__, prog_name="nls-lab")
@click.option("--log-level", default="INFO",
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
              help="Logging level")
@click.option("--log-file", type=click.Path(dir_okay=False), help="Optional log file path")
@click.pass_context
def main(ctx, log_level, log_file):
    """nls-lab - spectral and dynamical experiments for small-solution cubic NLS."""
    ctx.ensure_object(dict)
    ctx.obj["logger"] = setup_logging(log_level, log_file)


for name, command in lab_cli.commands.items():
    main.add_command(command, name=name)


if __name__ == "__main__":
    main()

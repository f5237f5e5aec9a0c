"""
Experiment runner commands: run, sweep, list-experiments and snapshot inspection.
"""

import sys
from pathlib import Path
from typing import List, Optional, Tuple

import click
from rich import print as rprint
from rich.console import Console
from rich.table import Table

from nls_lab.core.async_experiment_runner import default_runner, run_sync
from nls_lab.core.error_handling import ConfigError, ErrorHandler
from nls_lab.core.file_manager import read_snapshots
from nls_lab.models import EXPERIMENTS, ExperimentConfig, default_config, load_config
from nls_lab.workflows.experiments import ExperimentResult, ExperimentWorkflows

console = Console()
error_handler = ErrorHandler()

EXIT_CRITERIA_FAILED = 1
EXIT_CONFIG_ERROR = 2

DESCRIPTIONS = {
    "scattering-audit": "Jost solutions, T/R identities, genericity, bound state, distorted transform",
    "linear-decay": "Dispersive decay, local decay, smoothing and far field of e^{iHt} P_c h",
    "soliton-stability": "Q[z0] + radiation: modulation, decay and modified scattering",
    "model-problem": "Model equation with localized coefficients, no eigenvalues",
    "modified-scattering": "Logarithmic phase law, Cauchy gaps, cubic resonance, far field",
    "boundstate-branch": "Nonlinear bound states, gauge covariance, refined profiles",
}


def resolve_threads(flag: Optional[int], cfg: ExperimentConfig) -> int:
    """--threads (or NLS_LAB_THREADS through click) wins over the config value."""
    return flag if flag is not None else cfg.threads


def print_experiments() -> None:
    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Experiment", no_wrap=True)
    table.add_column("Grid (L, n)", style="dim")
    table.add_column("Description")
    for name in EXPERIMENTS:
        cfg = default_config(name)
        table.add_row(name, f"{cfg.grid.half_width:g}, {cfg.grid.n_points}", DESCRIPTIONS[name])
    console.print(table)


def print_result(result: ExperimentResult) -> None:
    manifest = result.manifest
    table = Table(show_header=True, header_style="bold magenta", title=manifest.experiment)
    table.add_column("Criterion")
    table.add_column("Measured", justify="right")
    table.add_column("Expected")
    table.add_column("Status")
    for criterion in manifest.criteria:
        measured = "-" if criterion.value is None else f"{criterion.value:.4g}"
        status = "[green]pass[/green]" if criterion.passed else "[red]FAIL[/red]"
        table.add_row(criterion.name, measured, criterion.bound or "", status)
    console.print(table)
    if result.success:
        rprint("[bold green]✓ Experiment completed successfully[/bold green]")
    else:
        rprint("[bold red]✗ Experiment did not pass[/bold red]")
    rprint(f"  • Steps completed: {result.steps_completed}/{result.total_steps}")
    rprint(f"  • {result.message}")
    rprint(f"  • Artifacts: {result.out_dir}")
    rprint(f"  • Wall clock: {manifest.wall_clock_seconds:.1f}s")


@click.group()
def cli():
    """Experiment runner commands."""


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Experiment config (TOML or JSON)")
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path),
              help="Output directory (overrides the config)")
@click.option("--threads", type=click.IntRange(min=1), envvar="NLS_LAB_THREADS",
              help="Parallelism cap (default from NLS_LAB_THREADS, then the config)")
@click.option("--validate-only", is_flag=True, help="Validate the config and exit")
@click.option("--list-experiments", "list_only", is_flag=True, help="List experiments and exit")
@click.option("--quiet", is_flag=True, help="Suppress step-by-step progress")
def run(config_path, out_dir, threads, validate_only, list_only, quiet):
    """Run one experiment; exit code 0 only if every criterion passes."""
    if list_only:
        print_experiments()
        return
    if config_path is None:
        raise click.UsageError("--config is required unless --list-experiments is given")
    try:
        cfg = load_config(config_path)
    except ConfigError as e:
        rprint(f"[red]Error:[/red] {error_handler.handle_lab_error(e, 'loading the config')}")
        sys.exit(EXIT_CONFIG_ERROR)

    if validate_only:
        rprint(f"[bold green]✓ Config valid:[/bold green] {cfg.experiment}")
        return

    workers = resolve_threads(threads, cfg)
    target = out_dir or Path(cfg.output_dir)
    rprint(f"[bold]Starting {cfg.experiment} with {workers} thread(s) into {target}...[/bold]")
    workflows = ExperimentWorkflows(default_runner(workers), show_progress=not quiet)
    try:
        result = run_sync(workflows.run_experiment(cfg, target))
    except Exception as e:
        rprint(f"[red]Error:[/red] {error_handler.handle_general_error(e, f'running {cfg.experiment}')}")
        sys.exit(EXIT_CRITERIA_FAILED)

    print_result(result)
    if not result.success:
        sys.exit(EXIT_CRITERIA_FAILED)


@cli.command()
@click.argument("configs", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), required=True,
              help="Root directory; each config writes into a subdirectory named after its file")
@click.option("--threads", type=click.IntRange(min=1), envvar="NLS_LAB_THREADS", default=1,
              help="Experiments run concurrently")
def sweep(configs, out_dir, threads):
    """Run several experiment configs concurrently."""
    runs: List[Tuple[ExperimentConfig, Path]] = []
    try:
        for path in configs:
            runs.append((load_config(path), out_dir / path.stem))
    except ConfigError as e:
        rprint(f"[red]Error:[/red] {error_handler.handle_lab_error(e, 'loading sweep configs')}")
        sys.exit(EXIT_CONFIG_ERROR)

    rprint(f"[bold]Starting sweep of {len(runs)} experiments, {threads} at a time...[/bold]")
    workflows = ExperimentWorkflows(default_runner(threads))
    try:
        results = run_sync(workflows.run_many(runs, show_progress=True))
    except Exception as e:
        rprint(f"[red]Error:[/red] {error_handler.handle_general_error(e, 'running the sweep')}")
        sys.exit(EXIT_CRITERIA_FAILED)

    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Config")
    table.add_column("Experiment", no_wrap=True)
    table.add_column("Status")
    table.add_column("Message")
    for path, result in zip(configs, results):
        status = "[green]pass[/green]" if result.success else "[red]FAIL[/red]"
        table.add_row(path.name, result.manifest.experiment, status, result.message)
    console.print(table)
    if not all(result.success for result in results):
        sys.exit(EXIT_CRITERIA_FAILED)


@cli.command("list-experiments")
def list_experiments():
    """List the available experiments and their default grids."""
    print_experiments()


@cli.command("show-snapshots")
@click.argument("path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
def show_snapshots(path):
    """Summarize a snapshot container written by a run."""
    try:
        header, fields = read_snapshots(path)
    except Exception as e:
        rprint(f"[red]Error:[/red] {error_handler.handle_general_error(e, 'reading snapshots')}")
        sys.exit(EXIT_CRITERIA_FAILED)
    times = header.get("times", [])
    rprint(f"[bold]{path.name}[/bold]: {fields.shape[0]} snapshots x {fields.shape[1]} nodes")
    if times:
        rprint(f"  • t from {times[0]:g} to {times[-1]:g}")
    rprint(f"  • Experiment: {header.get('experiment', 'unknown')}")
    rprint(f"  • Grid: L={header.get('half_width')}, n={header.get('n_points')}")

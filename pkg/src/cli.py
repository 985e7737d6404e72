"""
Command Line Interface for the surface GFDM toolkit.
"""
import csv
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import click
import numpy as np
from pydantic import ValidationError
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent))

from config import RunConfig, config
from errors import InvalidParameter
from logger import console, setup_logging
from pointcloud import PointCloud, read_cloud, sample_surface, validate_spacing, write_cloud
from problems import (
    Benchmark,
    BenchmarkReport,
    FieldReport,
    Settings,
    discretize,
    get_benchmark_by_name,
    list_supported_benchmarks,
)
from problems.four_strip import STRIP_ETA, strip_index
from reports import write_benchmark, write_field_report
from stencils import DiffusionField, StencilSet, surface_diffusion
from surfaces import list_supported_surfaces
from utils import format_count, format_seconds

# Initialize components
logger = setup_logging()

DEFAULT_GENERATE_H = 0.1
# modes run when --mode is not given
DEFAULT_MODES = {"torus": ("central", "neighbor"), "advection": ("upwind", "muscl")}


def run_options(func):
    """Flags shared by every numerical command."""
    options = [
        click.option('--h', 'h', type=float, help='Smoothing length (coarsest level for bench)'),
        click.option('--levels', type=int, help='Number of resolutions'),
        click.option('--order', type=int, help='Monomial order, 2 or 3'),
        click.option('--wf', type=float, help='Gaussian weight factor W_F'),
        click.option('--ac', type=float, help='Center value of the optimized Laplacian, in units of 1/h²'),
        click.option('--optimize/--no-optimize', default=None,
                     help='Optimized Laplacian stencils (default on)'),
        click.option('--projection', type=click.Choice(['central', 'neighbor']), help='Projection mode'),
        click.option('--neighbors', help="Neighborhood strategy, 'knn:K' or 'radius'"),
        click.option('--tol', type=float, help='BiCGSTAB relative tolerance'),
        click.option('--max-iter', 'max_iter', type=int, help='BiCGSTAB iteration budget'),
        click.option('--dt', type=float, help='Time step (default depends on the benchmark)'),
        click.option('--seed', type=int, help='Seed for all randomness'),
        click.option('--jitter', type=float, help='Sampler irregularity in [0, 1)'),
        click.option('--out', type=click.Path(file_okay=False), help='Output directory (default $GFDM_OUT)'),
        click.option('--jobs', type=int, help='Parallel processes for independent resolutions'),
        click.option('--checkpoint-stride', 'checkpoint_stride', type=int, help='Store every k-th time step'),
        click.option('--config', 'config_file', type=click.Path(exists=True, dir_okay=False),
                     help='key = value config file; flags override it'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _load_run(config_file: Optional[str], **flags) -> RunConfig:
    try:
        return RunConfig.from_sources(Path(config_file) if config_file else None, **flags)
    except ValidationError as e:
        first = e.errors()[0]
        field_name = ".".join(str(part) for part in first.get("loc", ()))
        raise InvalidParameter(f"{field_name}: {first.get('msg')}") from e
    except ValueError as e:
        raise InvalidParameter(str(e)) from e


def _fail(error_type: str, message: str) -> None:
    """Red console message plus one JSON line on stderr."""
    console.print(f"[red]Error: {message}[/red]")
    click.echo(json.dumps({"error": error_type, "message": message}), err=True)


def _load_cloud(source: str, run: RunConfig) -> PointCloud:
    """A geometry name is sampled; an existing path is read as a cloud file."""
    if Path(source).is_file():
        return read_cloud(source)
    return sample_surface(source, run.h or DEFAULT_GENERATE_H, run.jitter or 0.0, run.seed)


@click.group()
@click.version_option(version='1.0.0')
@click.option('--verbose', '-v', is_flag=True, help='Enable verbose output')
@click.pass_context
def cli(ctx, verbose):
    """
    Surface GFDM CLI Tool

    Meshfree generalized finite differences on point-cloud manifolds.
    """
    ctx.ensure_object(dict)
    ctx.obj['verbose'] = verbose

    if verbose:
        console.print("[dim]Verbose mode enabled[/dim]")


@cli.command()
@click.argument('geometry')
@click.option('--output', type=click.Path(dir_okay=False), help='Cloud file (default <out>/<geometry>.cloud)')
@run_options
def generate(geometry, output, config_file, **flags):
    """Sample GEOMETRY and write a gfdm-cloud file."""
    try:
        run = _load_run(config_file, geometry=geometry, **flags)
        setup_logging(log_dir=Path(run.out))
        with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}")) as progress:
            progress.add_task(f"Sampling {geometry}...", total=None)
            cloud = sample_surface(geometry, run.h or DEFAULT_GENERATE_H, run.jitter or 0.0, run.seed)
            spacing = validate_spacing(cloud)

        path = Path(output) if output else Path(run.out) / f"{geometry}.cloud"
        write_cloud(cloud, path)

        table = Table(title="Point Cloud")
        table.add_column("Property", style="cyan")
        table.add_column("Value", style="white")
        table.add_row("Geometry", geometry)
        table.add_row("Points", format_count(cloud.size))
        table.add_row("Boundary points", format_count(int(cloud.is_boundary.sum())))
        table.add_row("Smoothing length", f"{run.h or DEFAULT_GENERATE_H:g}")
        spacing_text = "[green]✓ OK[/green]" if spacing.ok else (
            f"[yellow]{len(spacing.close_pairs)} close pairs, {len(spacing.hole_points)} holes[/yellow]")
        table.add_row("Spacing", spacing_text)
        table.add_row("File", str(path))
        console.print(table)

    except Exception as e:
        _fail(type(e).__name__, str(e))
        sys.exit(1)


def _operator_stencils(op: str, cloud: PointCloud, settings: Settings, jump: bool,
                       kappa: str) -> List[StencilSet]:
    disc = discretize(cloud, settings)
    if op == 'laplacian':
        return [disc.laplacian]
    if op == 'grad':
        return list(disc.gradient)
    if kappa == 'four-strip':
        eta = np.asarray(STRIP_ETA)
        x = disc.cloud.positions[:, 0]
        x_range = (float(x.min()), float(x.max()))
        field = DiffusionField(kappa=eta[strip_index(x, x_range, len(eta))])
    else:
        field = DiffusionField.constant(1.0, disc.n_points)
    return [surface_diffusion(disc.projections, disc.frames, disc.basis, disc.weights, field,
                              jump_mode=jump, systems=disc.systems)]


def write_stencils_csv(stencil_sets: List[StencilSet], path: Path) -> Path:
    """Rows `i,j,op,coeff`, one per stored coefficient."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["i", "j", "op", "coeff"])
        for stencils in stencil_sets:
            for i, (members, coefficients) in enumerate(zip(stencils.members, stencils.coefficients)):
                for j, c in zip(members, coefficients):
                    writer.writerow([i, int(j), stencils.kind.value, repr(float(c))])
    return path


@cli.command('stencil-dump')
@click.argument('source')
@click.option('--op', 'op', type=click.Choice(['laplacian', 'grad', 'diffusion']), default='laplacian',
              help='Operator to dump')
@click.option('--check-consistency', is_flag=True, help='Report the largest consistency residual')
@click.option('--jump', is_flag=True, help='Jump conditions for the diffusion operator')
@click.option('--kappa', type=click.Choice(['constant', 'four-strip']), default='constant',
              help='Diffusion coefficient for --op diffusion')
@run_options
def stencil_dump(source, op, check_consistency, jump, kappa, config_file, **flags):
    """Dump the stencils of SOURCE (geometry name or cloud file) as CSV."""
    try:
        run = _load_run(config_file, **flags)
        cloud = _load_cloud(source, run)
        with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}")) as progress:
            progress.add_task(f"Building {op} stencils...", total=None)
            stencil_sets = _operator_stencils(op, cloud, Settings.from_run_config(run), jump, kappa)

        out_dir = Path(run.out)
        run.write(out_dir)
        path = write_stencils_csv(stencil_sets, out_dir / f"stencils_{op}.csv")
        console.print(f"[green]✓ {format_count(cloud.size)} points, stencils written to {path}[/green]")

        if check_consistency:
            table = Table(title="Consistency Check")
            table.add_column("Operator", style="cyan")
            table.add_column("Max residual", justify="right")
            for stencils in stencil_sets:
                table.add_row(stencils.kind.value, f"{stencils.consistency_residuals().max():.3e}")
                if stencils.extra_columns is not None:
                    table.add_row(f"{stencils.kind.value} (jump conditions)",
                                  f"{stencils.extra_residuals().max():.3e}")
            console.print(table)

    except Exception as e:
        _fail(type(e).__name__, str(e))
        sys.exit(1)


def _benchmark_variants(name: str, modes: Tuple[str, ...], run: RunConfig, jump: bool, compare: bool,
                        neumann: bool, steps: Optional[int]) -> List[Dict[str, object]]:
    """Constructor parameters for every run requested on the command line."""
    key = name.lower().strip()
    if key in ('heat-sphere', 'heat'):
        return [{"order": run.order}]
    if key in ('torus', 'torus-forced'):
        return [{"mode": mode} for mode in (modes or DEFAULT_MODES["torus"])]
    if key in ('advection', 'advection-cone', 'cone'):
        return [{"mode": mode} for mode in (modes or DEFAULT_MODES["advection"])]
    if key == 'four-strip':
        return [{"jump": jump, "compare": compare}]
    if key in ('cahn-hilliard', 'ch'):
        return [{"steps": steps}] if steps else [{}]
    if key in ('flat-poisson', 'flat'):
        return [{"neumann": neumann}]
    return [{}]


def _show_benchmark(report: BenchmarkReport) -> None:
    metric_keys = sorted({key for level in report.levels for key in level.metrics} - {"dt", "steps"})[:4]
    table = Table(title=f"Benchmark {report.label}")
    table.add_column("Level", justify="right", style="cyan")
    table.add_column("N", justify="right")
    table.add_column("h", justify="right")
    table.add_column("ε₂", justify="right")
    table.add_column("Iters", justify="right")
    table.add_column("Time", justify="right", style="dim")
    for key in metric_keys:
        table.add_column(key, justify="right")
    for level in report.levels:
        if not level.converged:
            table.add_row(str(level.resolution), "-", f"{level.h:.4g}", f"[red]{level.error_type}[/red]",
                          "-", format_seconds(level.seconds), *["-"] * len(metric_keys))
            continue
        table.add_row(str(level.resolution), format_count(level.n_points), f"{level.h:.4g}",
                      f"{level.eps2:.3e}", str(level.iterations), format_seconds(level.seconds),
                      *[f"{level.metrics.get(key, float('nan')):.4g}" for key in metric_keys])
    console.print(table)
    console.print(f"[bold]Slope:[/bold] {report.slope:.3f}" if np.isfinite(report.slope)
                  else "[dim]Slope needs three converged levels[/dim]")


def _show_field(report: FieldReport) -> None:
    table = Table(title=f"Benchmark {report.label}")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", justify="right")
    table.add_row("N", format_count(report.n_points))
    table.add_row("h", f"{report.h:.4g}")
    table.add_row("Iterations", str(report.iterations))
    table.add_row("Time", format_seconds(report.seconds))
    for key in sorted(report.metrics):
        table.add_row(key, f"{report.metrics[key]:.6g}")
    console.print(table)


def _dump_systems(report, out_dir: Path) -> int:
    """Write every assembled system of a report as Matrix Market; returns the number written."""
    holders = [(f"r{level.resolution}_", level) for level in report.levels] if isinstance(
        report, BenchmarkReport) else [("", report)]
    written = 0
    for prefix, holder in holders:
        for name, system in holder.systems.items():
            system.dump(out_dir / f"{prefix}{name}.mtx")
            written += 1
    return written


@cli.command()
@click.argument('name')
@click.option('--mode', 'modes', multiple=True, help='Projection mode (torus) or advection mode, repeatable')
@click.option('--dump-matrix', is_flag=True, help='Write assembled systems as Matrix Market files')
@click.option('--jump/--no-jump', default=True, help='Jump conditions in the four-strip problem')
@click.option('--compare/--no-compare', default=True, help='Four-strip comparison runs')
@click.option('--neumann', is_flag=True, help='Neumann edges in the flat calibration problem')
@click.option('--steps', type=int, help='Cahn-Hilliard time steps')
@run_options
def bench(name, modes, dump_matrix, jump, compare, neumann, steps, config_file, **flags):
    """Run benchmark NAME and write CSV and VTK reports."""
    try:
        run = _load_run(config_file, **flags)
        setup_logging(log_dir=Path(run.out))
        settings = Settings.from_run_config(run)
        variants = _benchmark_variants(name, modes, run, jump, compare, neumann, steps)
        out_root = Path(run.out)
        failures = []

        for params in variants:
            benchmark = get_benchmark_by_name(name, **params)
            out_dir = out_root / benchmark.label
            run.write(out_dir)
            console.print(f"[blue]Running {benchmark.label}[/blue]")

            with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}")) as progress:
                progress.add_task(f"Solving {benchmark.label}...", total=None)
                if isinstance(benchmark, Benchmark):
                    report = benchmark.run(settings, h0=run.h, levels=run.levels, jobs=run.jobs)
                else:
                    report = benchmark.run(settings, h=run.h)

            if isinstance(report, BenchmarkReport):
                _show_benchmark(report)
                write_benchmark(report, out_dir)
                failures += [(level.error_type, f"{report.label} level {level.resolution}: {level.error_message}")
                             for level in report.levels if not level.converged]
            else:
                _show_field(report)
                write_field_report(report, out_dir)
                if not report.converged:
                    failures.append((report.error_type, f"{report.label}: {report.error_message}"))

            if dump_matrix:
                count = _dump_systems(report, out_dir)
                if count == 0:
                    console.print(f"[yellow]⚠ {benchmark.label} assembles no single system to dump[/yellow]")
            console.print(f"[dim]Results in {out_dir}[/dim]")

        if failures:
            for error_type, message in failures:
                _fail(error_type or "GFDMError", message)
            sys.exit(1)

    except Exception as e:
        _fail(type(e).__name__, str(e))
        sys.exit(1)


@cli.command()
def surfaces():
    """List supported sampling geometries."""
    table = Table(title="Supported Geometries")
    table.add_column("Geometry", style="cyan", no_wrap=True)
    table.add_column("Description", style="white")
    for _, name, description in list_supported_surfaces():
        table.add_row(name, description)
    console.print(table)


@cli.command()
def benchmarks():
    """List supported benchmarks."""
    table = Table(title="Supported Benchmarks")
    table.add_column("Benchmark", style="cyan", no_wrap=True)
    table.add_column("Description", style="white")
    for _, name, description in list_supported_benchmarks():
        table.add_row(name, description)
    console.print(table)


@cli.command()
def config_check():
    """Check configuration status."""
    table = Table(title="Configuration Status")
    table.add_column("Setting", style="cyan")
    table.add_column("Value", justify="center")
    table.add_column("Variable", style="dim")

    out_status = "[green]✓ Writable[/green]" if config.validate_output_dir() else "[red]✗ Not writable[/red]"
    table.add_row("Output directory", f"{config.output_dir} {out_status}", "GFDM_OUT")
    table.add_row("Log level", config.log_level, "LOG_LEVEL")
    table.add_row("Log format", config.log_format, "LOG_FORMAT")
    table.add_row("Solver tolerance", f"{config.solver_tol:g}", "GFDM_SOLVER_TOL")
    table.add_row("Max iterations", str(config.max_iter), "GFDM_MAX_ITER")
    table.add_row("Jobs", str(config.jobs), "GFDM_JOBS")
    console.print(table)

    env_file = Path(".env")
    if env_file.exists():
        console.print(f"\n[green]✓ .env file found at {env_file.absolute()}[/green]")
    else:
        console.print("\n[yellow]⚠ .env file not found. Copy .env.example to .env to override defaults.[/yellow]")


if __name__ == '__main__':
    try:
        cli()
    except KeyboardInterrupt:
        console.print("\n[yellow]Operation interrupted by user[/yellow]")
        sys.exit(130)

"""Command-line interface for su11-diag."""

import io
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, NamedTuple, NoReturn, Optional

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

from . import __version__
from .berry import (
    DegeneracyError,
    OpenPathError,
    berry_phase_closed,
    berry_phase_numeric,
    dynamical_phase,
    integrand_rows,
    lewis_phase,
)
from .config import ConfigError, RunConfig
from .diagonalizer import (
    SolverError,
    TruncationError,
    UnstableHamiltonianError,
    diagonalize,
    solve_chi,
    transform_step1,
)
from .fock_oracle import converged_spectrum, decoupling_residual
from .hamiltonian import AlphaCoeffs, build_matrix
from .su_algebra import (
    QUADRATIC_BASIS,
    FockSpace,
    bargmann_index,
    displacement_su2,
    expand_in_generators,
    wrap_phase,
)
from .utils import complex_columns, to_json, write_csv
from .verify import run_battery

console = Console()
err_console = Console(stderr=True)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_UNSTABLE = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4
EXIT_DEGENERACY = 5


class Outcome(NamedTuple):
    """Tabular result of one command."""

    rows: List[Dict[str, Any]]
    summary: Dict[str, Any]
    exit_code: int = EXIT_OK


def _alpha_columns(alpha: AlphaCoeffs) -> Dict[str, Any]:
    columns: Dict[str, Any] = {"alpha0": alpha.alpha0}
    columns.update(complex_columns("alpha_a", alpha.alpha_plus_a))
    columns.update(complex_columns("alpha_b", alpha.alpha_plus_b))
    columns.update(complex_columns("alpha_ab", alpha.alpha_plus_ab))
    return columns


def _csv_text(rows: List[Dict[str, Any]]) -> str:
    buffer = io.StringIO()
    write_csv(rows, buffer)
    return buffer.getvalue()


def _emit(config: RunConfig, outcome: Outcome) -> None:
    """Write rows and summary to stdout or to the configured output file."""
    output = config.get_output()
    if config.get_format() == "json":
        text = to_json({"rows": outcome.rows, "summary": outcome.summary}) + "\n"
        if output is None:
            click.echo(text, nl=False)
            return
        output.write_text(text, encoding="utf-8")
        console.print(f"[green]✓ Wrote {output}[/green]")
        return

    rows_text = _csv_text(outcome.rows)
    summary_text = _csv_text([outcome.summary])
    if output is None:
        click.echo(rows_text, nl=False)
        click.echo()
        click.echo(summary_text, nl=False)
        return
    summary_path = output.with_suffix(".summary.csv")
    output.write_text(rows_text, encoding="utf-8")
    summary_path.write_text(summary_text, encoding="utf-8")
    console.print(f"[green]✓ Wrote {output} and {summary_path}[/green]")
    _print_summary(outcome.summary)


def _print_summary(summary: Dict[str, Any]) -> None:
    table = Table(title="\nSummary")
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", style="green")
    for key, value in summary.items():
        table.add_row(key, "" if value is None else str(value))
    console.print(table)


def _fail(code: int, title: str, error: Exception) -> NoReturn:
    err_console.print(f"[red]Error ({title}): {escape(str(error))}[/red]", soft_wrap=True)
    sys.exit(code)


def _execute(
    mode: str,
    body: Callable[[RunConfig], Outcome],
    config_path: Optional[Path],
    overrides: Dict[str, Any],
) -> None:
    """Load the config, run ``body`` and map failures onto exit codes."""
    try:
        config = RunConfig(config_path, overrides={**overrides, "mode": mode})
        outcome = body(config)
    except UnstableHamiltonianError as e:
        _fail(EXIT_UNSTABLE, "unstable Hamiltonian", e)
    except SolverError as e:
        _fail(EXIT_SOLVER, "elimination solver", e)
    except DegeneracyError as e:
        _fail(EXIT_DEGENERACY, "degeneracy", e)
    except (ConfigError, OpenPathError, TruncationError) as e:
        _fail(EXIT_CONFIG, "configuration", e)
    except ValueError as e:
        _fail(EXIT_CONFIG, "invalid input", e)
    try:
        _emit(config, outcome)
    except OSError as e:
        _fail(EXIT_CONFIG, "output", e)
    sys.exit(outcome.exit_code)


def run_options(func: Callable[..., None]) -> Callable[..., None]:
    """Options shared by every computing command."""
    options = [
        click.option(
            "--config",
            "-c",
            "config_path",
            type=click.Path(dir_okay=False, path_type=Path),
            help="Config document (default: su11.json or su11.yaml nearby)",
        ),
        click.option("--cutoff", type=int, help="Cutoff for eigenstates and matrix checks"),
        click.option("--levels", type=int, help="Number of levels to report"),
        click.option("--samples", type=int, help="Intervals along a parameter path"),
        click.option("--tol", "tolerance", type=float, help="Acceptance tolerance"),
        click.option(
            "--out",
            "-o",
            "output",
            type=click.Path(dir_okay=False, path_type=Path),
            help="Write results to this file instead of stdout",
        ),
        click.option(
            "--format",
            "output_format",
            type=click.Choice(["csv", "json"]),
            help="Output format",
        ),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _overrides(**flags: Any) -> Dict[str, Any]:
    names = {"output_format": "format"}
    return {names.get(key, key): value for key, value in flags.items()}


def spectrum_outcome(config: RunConfig) -> Outcome:
    """Analytic spectrum next to the brute-force one."""
    alpha = config.get_alpha()
    solution = diagonalize(alpha)
    levels = solution.spectrum.levels(config.get_levels())
    report = converged_spectrum(
        alpha,
        len(levels),
        rel_tol=config.get_tolerance(),
        cutoffs=config.get_cutoffs(),
        threads=config.get_threads(),
    )
    rows = []
    for index, (level, oracle) in enumerate(zip(levels, report.final)):
        rel_error = abs(level.energy - oracle) / max(abs(oracle), 1e-300)
        rows.append(
            {
                "level": index,
                "n_a": level.n_a,
                "n_b": level.n_b,
                "n_l": level.n_l,
                "m_n": level.m_n,
                "degeneracy": level.degeneracy,
                "analytic": level.energy,
                "oracle": float(oracle),
                "rel_error": float(rel_error),
                "converged": report.converged[index],
            }
        )
    max_error = max(row["rel_error"] for row in rows)
    chi, xi = solution.chi, solution.xi
    summary = _alpha_columns(alpha)
    summary.update(
        {
            "chi_theta": chi.chi.theta,
            "chi_phi": chi.chi.phi,
            "chi_residual": chi.residual,
            "chi_method": chi.method.value,
            "xi_a_theta": xi.xi_a.theta,
            "xi_a_phi": xi.xi_a.phi,
            "xi_b_theta": xi.xi_b.theta,
            "xi_b_phi": xi.xi_b.phi,
            "omega_a": solution.spectrum.omega_a,
            "omega_b": solution.spectrum.omega_b,
            "stable": xi.stable,
            "decoupling_residual": decoupling_residual(
                alpha,
                chi.chi,
                xi.xi_a,
                xi.xi_b,
                cutoff=config.get_cutoff(),
                margin=config.get_margin(),
            ),
            "cutoffs": " ".join(str(c) for c in report.cutoffs),
            "oracle_converged": report.all_converged,
            "max_rel_error": max_error,
            "within_tolerance": max_error < config.get_tolerance(),
        }
    )
    return Outcome(rows, summary)


def verify_outcome(config: RunConfig) -> Outcome:
    """Run the oracle battery."""
    report = run_battery(config.get_verify_settings())
    rows = [
        {
            "family": result.family,
            "check": result.name,
            "residual": result.residual,
            "tolerance": result.tolerance,
            "passed": result.passed,
        }
        for result in report.results
    ]
    failures = report.failures
    summary = {
        "checks": len(report.results),
        "failed": len(failures),
        "failures": "; ".join(f"{f.family}: {f.name}" for f in failures),
    }
    if failures:
        err_console.print(f"[red]{len(failures)} identities failed:[/red]")
        for failure in failures:
            err_console.print(
                f"[red]  ✗ {failure.family}: {failure.name} "
                f"(residual {failure.residual:.3e} > {failure.tolerance:.1e})[/red]"
            )
        return Outcome(rows, summary, EXIT_VERIFY)
    return Outcome(rows, summary)


def berry_outcome(config: RunConfig) -> Outcome:
    """Phases of one state around the configured loop."""
    path = config.build_path()
    path.require_closed()
    n_a, n_b = config.get_state()
    k, n, mu = bargmann_index(n_a, n_b)
    dynamical = dynamical_phase(path, n_a, n_b)
    berry = berry_phase_closed(path, k, n, mu)
    reference = berry.closed_form if berry.applicable else berry.integral
    numeric: Optional[float] = None
    numeric_gap: Optional[float] = None
    if config.get_numeric_berry():
        space = FockSpace.square(config.get_cutoff())
        numeric = berry_phase_numeric(path, n_a, n_b, space, threads=config.get_threads())
        numeric_gap = wrap_phase(numeric - reference)
    windings = path.phase_windings()
    summary = {
        "n_a": n_a,
        "n_b": n_b,
        "k": k,
        "n": n,
        "mu": mu,
        "samples": path.samples,
        "duration": path.duration,
        "winding_a": windings.a,
        "winding_b": windings.b,
        "winding_ab": windings.ab,
        "phase_locked": path.is_phase_locked(),
        "dynamical": dynamical,
        "berry_integral": berry.integral,
        "berry_closed": berry.closed_form,
        "closed_minus_integral": berry.difference,
        "berry_numeric": numeric,
        "numeric_minus_closed": numeric_gap,
        "lewis_form": config.get_lewis_form(),
        "lewis": lewis_phase(path, n, k, mu, form=config.get_lewis_form()),
        "total": dynamical + reference,
    }
    return Outcome(integrand_rows(path, n_a, n_b), summary)


def transform_check_outcome(config: RunConfig) -> Outcome:
    """Tilted coefficients against matrix conjugation."""
    alpha = config.get_alpha()
    chi = solve_chi(alpha)
    space = FockSpace.square(config.get_cutoff())
    conjugated = build_matrix(alpha, space).conjugated_by(displacement_su2(space, chi.chi))
    fitted = expand_in_generators(conjugated, space, margin=2, total_number=True)
    closed = transform_step1(alpha, chi.chi).as_alpha().expansion()
    tolerance = config.get_verify_settings().tolerance_for("tilt")
    rows = []
    for label in QUADRATIC_BASIS:
        expected = closed.get(label, 0j)
        row: Dict[str, Any] = {"generator": label.value}
        row.update(complex_columns("closed", expected))
        row.update(complex_columns("matrix", fitted[label]))
        row["abs_diff"] = float(abs(fitted[label] - expected))
        rows.append(row)
    max_diff = max(row["abs_diff"] for row in rows)
    summary = _alpha_columns(alpha)
    summary.update(
        {
            "chi_theta": chi.chi.theta,
            "chi_phi": chi.chi.phi,
            "chi_residual": chi.residual,
            "chi_method": chi.method.value,
            "cutoff": space.cutoff_a,
            "max_abs_diff": max_diff,
            "tolerance": tolerance,
            "passed": max_diff <= tolerance,
        }
    )
    if max_diff > tolerance:
        err_console.print(
            f"[red]Tilted coefficients differ from the matrix by {max_diff:.3e}[/red]"
        )
        return Outcome(rows, summary, EXIT_VERIFY)
    return Outcome(rows, summary)


BODIES: Dict[str, Callable[[RunConfig], Outcome]] = {
    "spectrum": spectrum_outcome,
    "verify": verify_outcome,
    "berry": berry_outcome,
    "transform-check": transform_check_outcome,
}


@click.group()
@click.version_option(version=__version__, prog_name="su11-diag")
@click.option("--verbose", "-v", is_flag=True, help="Log debug messages")
def main(verbose: bool) -> None:
    """su11-diag - Diagonalize SU(1,1)-linear two-mode Hamiltonians.

    Every command reads a JSON or YAML config and writes CSV (or JSON) rows
    plus a summary record. Exit codes: 0 ok, 1 config, 2 unstable,
    3 solver, 4 verification failure, 5 degeneracy.
    """
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )


@main.command()
@run_options
def spectrum(config_path: Optional[Path], **flags: Any) -> None:
    """Closed-form spectrum checked against the truncated-Fock oracle.

    Examples
    --------
        su11-diag spectrum -c su11.json
        su11-diag spectrum -c su11.json --levels 20 --format json

    """
    _execute("spectrum", spectrum_outcome, config_path, _overrides(**flags))


@main.command()
@run_options
def verify(config_path: Optional[Path], **flags: Any) -> None:
    """Run every closed-form identity against its matrix oracle.

    Exits with 4 and lists the failing identities if any residual exceeds its
    tolerance.
    """
    _execute("verify", verify_outcome, config_path, _overrides(**flags))


@main.command()
@run_options
def berry(config_path: Optional[Path], **flags: Any) -> None:
    """Dynamical, Lewis and Berry phases around a closed parameter loop.

    Examples
    --------
        su11-diag berry -c loop.json --samples 4000 -o phases.csv

    """
    _execute("berry", berry_outcome, config_path, _overrides(**flags))


@main.command("transform-check")
@run_options
def transform_check(config_path: Optional[Path], **flags: Any) -> None:
    """Compare the tilted coefficients with D^dag H D built as matrices."""
    _execute("transform-check", transform_check_outcome, config_path, _overrides(**flags))


@main.command()
@run_options
def run(config_path: Optional[Path], **flags: Any) -> None:
    """Run whichever mode the config names."""
    try:
        mode = RunConfig(config_path, overrides=_overrides(**flags)).get_mode()
    except ConfigError as e:
        _fail(EXIT_CONFIG, "configuration", e)
    _execute(mode, BODIES[mode], config_path, _overrides(**flags))

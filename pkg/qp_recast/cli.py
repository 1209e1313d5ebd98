# qp_recast/cli.py

"""
Command-line entry points.

Exit codes: 0 ok, 1 verification failed, 2 unreadable input, 3 pipeline
error, 4 report does not replay.
"""

import logging
import sys
from functools import wraps

import click

from config import current_config

from .errors import FileFormatError, NumericError, RecastError, ReplayMismatch
from .fileformat import (
    load_report,
    load_system,
    rational_list,
    rational_matrix,
    save_report,
)
from .numeric import compare_recast
from .qpmodel import is_standard, nonlinear_term_count
from .randomsuite import run_all
from .reductions import (
    EmbedMode,
    first_integrals_from_M,
    lv_first_integrals,
    standardize,
    step_report,
    to_lotka_volterra,
    to_unimonomial,
    verify_projection_invariance,
)
from .transforms import StepKind, TransformStep

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_PARSE = 2
EXIT_PIPELINE = 3
EXIT_REPLAY = 4


def _exit_code(exc):
    if isinstance(exc, FileFormatError):
        return EXIT_PARSE
    if isinstance(exc, ReplayMismatch):
        return EXIT_REPLAY
    if isinstance(exc, NumericError):
        return EXIT_VERIFY
    return EXIT_PIPELINE


def handle_errors(f):
    """Turn library errors into a one-line diagnostic and the matching exit code."""

    @wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except RecastError as exc:
            stage = getattr(exc, "stage", None)
            where = f" in stage '{stage}'" if stage else ""
            click.echo(f"error{where}: {type(exc).__name__}: {exc}", err=True)
            sys.exit(_exit_code(exc))

    return wrapper


def _configure_logging(level):
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _parse_priority(text):
    if not text:
        return None
    return [int(part) for part in text.split(",")]


def _summary(report, out):
    before, after = report.input, report.output
    return (
        f"n {before.n} -> {after.n}, m {before.m} -> {after.m}, "
        f"terms {nonlinear_term_count(before)} -> {nonlinear_term_count(after)}, "
        f"{len(report.first_integrals)} first integrals, "
        f"{len(report.quadratures)} quadratures -> {out}"
    )


@click.group()
@click.option("--log-level", default=None, help="Overrides LOG_LEVEL from the config.")
@click.pass_context
def recast(ctx, log_level):
    """Recast quasipolynomial ODE systems."""
    settings = current_config()
    _configure_logging(log_level or settings.LOG_LEVEL)
    ctx.obj = settings


@recast.command("info")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@handle_errors
def cmd_info(path):
    """Shape, ranks and standard-form verdict of a system file."""
    system = load_system(path).system
    ranks = system.rank_summary()
    verdict = "yes" if is_standard(system) else "no"
    click.echo(
        f"n={system.n} m={system.m} rank(A)={ranks['A']} rank(B)={ranks['B']} "
        f"rank(M)={ranks['M']} standard={verdict}"
    )
    click.echo(f"nonlinear terms: {nonlinear_term_count(system)}")
    click.echo(f"first integrals from rank(M): {len(first_integrals_from_M(system))}")


def _run_pipeline(path, out, pipeline):
    system = load_system(path).system
    report = pipeline(system)
    save_report(out, report)
    click.echo(_summary(report, out))
    return report


@recast.command("standardize")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out", type=click.Path(dir_okay=False, writable=True))
@click.option("--levels", "levels_text", default=None, help="Constant-of-motion levels, e.g. 2,1")
@handle_errors
def cmd_standardize(path, out, levels_text):
    """Reach m >= n with rank(A) = rank(B) = rank(M) = n."""
    levels = None
    if levels_text:
        levels = _parse_cli_value(rational_list, levels_text, "--levels")
    _run_pipeline(path, out, lambda s: standardize(s, levels))


@recast.command("to-lv")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out", type=click.Path(dir_okay=False, writable=True))
@click.option("--embed", default="none", help="none | partial=k | full")
@click.option("--priority", default=None, help="Quasimonomial indices to favour, e.g. 1,2,0")
@handle_errors
def cmd_to_lv(path, out, embed, priority):
    """Lotka-Volterra form of a standardized system."""
    mode = EmbedMode.parse(embed)
    _run_pipeline(
        path, out, lambda s: to_lotka_volterra(s, mode, _parse_priority(priority))
    )


@recast.command("to-unimonomial")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out", type=click.Path(dir_okay=False, writable=True))
@click.option("--embed", default="none", help="none | partial=k | full")
@click.option("--priority", default=None, help="Quasimonomial indices to favour, e.g. 0,1,3")
@handle_errors
def cmd_to_unimonomial(path, out, embed, priority):
    """One quasimonomial per equation, with the retrieval projection when embedded."""
    mode = EmbedMode.parse(embed)
    report = _run_pipeline(
        path, out, lambda s: to_unimonomial(s, mode, _parse_priority(priority))
    )
    if report.projection is not None:
        click.echo(f"projection invariance: {verify_projection_invariance(report)}")


@recast.command("transform")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out", type=click.Path(dir_okay=False, writable=True))
@click.option("--matrix", "matrix_text", required=True, help='C as rows, e.g. "1,0;0,2"')
@handle_errors
def cmd_transform(path, out, matrix_text):
    """Apply a user quasimonomial transformation x_i = prod y_k^C_ik."""
    C = _parse_cli_value(rational_matrix, matrix_text, "--matrix")
    step = TransformStep(StepKind.QUASIMONOMIAL, matrix=C)
    _run_pipeline(path, out, lambda s: step_report(s, step, "transform"))


@recast.command("newtime")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out", type=click.Path(dir_okay=False, writable=True))
@click.option("--beta", "beta_text", required=True, help='Exponents, e.g. "-1,0"')
@handle_errors
def cmd_newtime(path, out, beta_text):
    """Apply the time change dt = prod x^beta dt'."""
    beta = _parse_cli_value(rational_list, beta_text, "--beta")
    step = TransformStep(StepKind.NEW_TIME, vector=beta)
    _run_pipeline(path, out, lambda s: step_report(s, step, "newtime"))


def _parse_cli_value(parser, text, option):
    try:
        return parser(text)
    except (TypeError, ValueError, RecastError) as exc:
        raise click.BadParameter(str(exc), param_hint=option) from exc


@recast.command("first-integrals")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--lv", is_flag=True, help="Integrals of the Lotka-Volterra embedding.")
@click.option("--priority", default=None, help="Pivot order for --lv")
@handle_errors
def cmd_first_integrals(path, lv, priority):
    """List conserved quasimonomials."""
    system = load_system(path).system
    if lv:
        integrals = lv_first_integrals(system, _parse_priority(priority))
    else:
        integrals = first_integrals_from_M(system)
    click.echo(f"{len(integrals)} first integrals")
    for fi in integrals:
        click.echo(f"  {fi.describe()}    [{fi.label}]")


def _parse_point(text, n):
    if text is None:
        return [1.0] * n
    values = [float(part) for part in text.split(",")]
    if len(values) != n:
        raise click.BadParameter(f"expected {n} values", param_hint="--x0")
    return values


@recast.command("verify")
@click.argument("original_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("report_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--x0", default=None, help="Initial point, default all ones")
@click.option("--t-end", type=float, default=None)
@click.option("--tol", type=float, default=None)
@click.pass_obj
@handle_errors
def cmd_verify(settings, original_path, report_path, x0, t_end, tol):
    """Integrate original and recast systems and compare in log coordinates."""
    original = load_system(original_path)
    report = load_report(report_path)
    if report.input != original.system:
        raise ReplayMismatch("report input is not the given original system")
    t_end = t_end or settings.DEFAULT_T_END
    tol = tol or settings.DEFAULT_TOL
    point = original.translate(_parse_point(x0, original.system.n))
    result = compare_recast(
        original.system,
        report,
        point,
        t_end,
        tol,
        method=settings.INTEGRATOR_METHOD,
        floor=settings.POSITIVITY_FLOOR,
    )
    threshold = tol * settings.VERIFY_TOL_FACTOR
    click.echo(
        f"max |log error| = {result.max_abs_log_error:.3e} "
        f"over t in [0, {result.horizon:.6g}]"
    )
    for fi, drift in result.integral_drifts:
        click.echo(f"  drift {drift:.3e}  {fi.describe()}")
    if not result.passed(threshold):
        click.echo(f"FAIL: errors exceed {threshold:.1e}", err=True)
        sys.exit(EXIT_VERIFY)
    click.echo(f"OK: all errors <= {threshold:.1e}")


@recast.command("selfcheck")
@click.option("--seed", type=int, default=None)
@click.option("--count", type=int, default=50, show_default=True)
@click.option("--numeric", is_flag=True, help="Also integrate and check first-integral drift.")
@click.pass_obj
def cmd_selfcheck(settings, seed, count, numeric):
    """Run the seeded random property suites."""
    seed = settings.RANDOM_SEED if seed is None else seed
    results = run_all(seed, count, numeric)
    for result in results:
        click.echo(str(result))
        for failure in result.failures[:5]:
            click.echo(f"  {failure}")
    if not all(result.passed for result in results):
        sys.exit(EXIT_VERIFY)

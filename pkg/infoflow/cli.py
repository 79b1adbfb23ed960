"""Command line interface to prune patterns, certify channels and run
experiments on broadcasting trees."""

from functools import wraps
import logging
from pathlib import Path
from typing import Optional
from typing_extensions import Annotated

import typer

from .certify import Verdict, certify_channel, certify_patterns
from .channel import Channel, ContractionMode
from .config import Settings, get_settings, load_settings
from .errors import MalformedSpecError
from .experiments import (
    ExperimentReport,
    ExperimentRow,
    certify_exhaustive,
    decay_sweep,
    equivalence_check,
    exhaustive_stats,
    monte_carlo_reconstruction,
    simulate_sweep,
)
from .helpers import ReportSuffix, parse_level_range, resolve_prior
from .io import dump_json, load_channel, load_tree, write_csv
from .pruning import pattern_probability, posterior, prune
from .tree import Pattern, TreeSpec, build_complete_dary

cli = typer.Typer(add_completion=False)

EXIT_ERROR = 1
EXIT_PRECONDITION_UNMET = 2


def report_errors(func):
    """Turn invalid inputs into a message on stderr and exit code 1."""

    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ValueError as err:
            typer.echo(f"Error: {err}", err=True)
            raise typer.Exit(code=EXIT_ERROR)

    return wrapper


def exit_on_verdicts(verdicts):
    """Exit 2 if a printed certificate has an unmet precondition.

    A violated bound is reported on stderr; it does not change the exit
    code.
    """
    verdicts = set(verdicts)
    if Verdict.VIOLATED in verdicts:
        typer.echo("Warning: a certified bound is violated.", err=True)
    if Verdict.PRECONDITION_UNMET in verdicts:
        raise typer.Exit(code=EXIT_PRECONDITION_UNMET)


def _settings(ctx: typer.Context) -> Settings:
    return ctx.obj if isinstance(ctx.obj, Settings) else get_settings()


def _tree_source(
    settings: Settings,
    tree_file: Optional[Path],
    channel_file: Optional[Path],
    d: Optional[int],
    g: Optional[int],
    require_primitive: bool = True,
) -> TreeSpec:
    """A tree file, or a complete d-ary tree built from a channel file."""
    options = {
        "reversibility_tol": settings.reversibility_tol,
        "require_primitive": require_primitive,
    }
    if tree_file and channel_file:
        raise MalformedSpecError("Only one of TREE or --channel can be used.")
    if tree_file:
        return load_tree(tree_file, settings=settings, **options)
    if channel_file is None or d is None or g is None:
        raise MalformedSpecError(
            "Give a tree file or all of --channel, --d and --g."
        )
    return build_complete_dary(
        d, g, load_channel(channel_file, **options), settings
    )


def _write_report(report: ExperimentReport, out: Optional[Path]):
    if out is None:
        typer.echo(dump_json(report.to_dict()))
        return
    match ReportSuffix.from_path(out):
        case ReportSuffix.CSV:
            write_csv(out, report.header, report.csv_rows())
        case ReportSuffix.JSON:
            out.write_text(dump_json(report.to_dict()))
    typer.echo(f"Report written to {out}.", err=True)


@cli.callback()
def main(
    ctx: typer.Context,
    config: Annotated[
        Optional[Path],
        typer.Option(
            "--config",
            "-c",
            help="Settings file (yaml or json) with caps and tolerances.",
        ),
    ] = None,
    jobs: Annotated[
        Optional[int],
        typer.Option(
            "--jobs",
            "-j",
            help="Workers for exhaustive and Monte Carlo runs.",
        ),
    ] = None,
    verbose: Annotated[
        bool, typer.Option("--verbose", "-v", help="Log debug messages.")
    ] = False,
):
    """Likelihood pruning and unsolvability certificates on trees."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING)
    try:
        settings = load_settings(config) if config else get_settings()
        if jobs is not None:
            settings = settings.replace(n_jobs=jobs)
        settings.validate()
    except ValueError as err:
        typer.echo(f"Error: {err}", err=True)
        raise typer.Exit(code=EXIT_ERROR)
    ctx.obj = settings


@cli.command()
@report_errors
def analyze(
    ctx: typer.Context,
    channel_file: Annotated[Path, typer.Argument(..., help="Channel file.")],
    d: Annotated[
        Optional[int],
        typer.Option("--d", help="Tree arity for unsolvability certificates."),
    ] = None,
):
    """Equilibrium, spectrum and contraction constants of a channel."""
    settings = _settings(ctx)
    channel = load_channel(
        channel_file, reversibility_tol=settings.reversibility_tol
    )
    out = _channel_summary(channel)
    if d is not None:
        out["certificates"] = {
            mode.value: certify_channel(channel, d, mode).to_dict()
            for mode in ContractionMode
            if channel.reversible or mode != ContractionMode.REVERSIBLE_EIG
        }
    typer.echo(dump_json(out))


def _channel_summary(channel: Channel) -> dict:
    profile = channel.profile
    return {
        "channel": channel.to_dict(),
        "spectrum": profile.to_dict(),
        "contraction": {
            ContractionMode.GENERAL_SINGULAR.value: profile.c_general,
            ContractionMode.TIGHT_PI_OPERATOR.value: profile.c_tight,
            ContractionMode.REVERSIBLE_EIG.value: (
                profile.theta1_abs if channel.reversible else None
            ),
        },
    }


@cli.command("prune")
@report_errors
def prune_pattern(
    ctx: typer.Context,
    tree_file: Annotated[Path, typer.Argument(..., help="Tree file.")],
    pattern: Annotated[
        str,
        typer.Option(
            "--pattern",
            "-p",
            help="Leaf states as digits (01302002) or comma separated.",
        ),
    ],
    prior: Annotated[
        str,
        typer.Option(
            "--prior", help="Root prior: uniform, pi or a prior file."
        ),
    ] = "uniform",
    eps: Annotated[
        Optional[float],
        typer.Option(
            "--eps", help="Also certify the root bounds with this slack."
        ),
    ] = None,
):
    """Root likelihood, memory norm and posterior of one pattern.

    With --eps, exits with code 2 when a root certificate has an unmet
    precondition.
    """
    settings = _settings(ctx)
    tree = load_tree(
        tree_file,
        settings=settings,
        reversibility_tol=settings.reversibility_tol,
    )
    parsed = tree.check_pattern(Pattern.parse(pattern))
    state = prune(tree, parsed)
    mu = resolve_prior(prior, tree.pi)
    out = {
        "pattern": str(parsed),
        **state.to_dict(),
        "pr": pattern_probability(state, mu),
        **posterior(state, mu).to_dict(),
    }
    certificates = ()
    if eps is not None:
        result = certify_patterns(tree, parsed, eps)
        out["certificates"] = result.to_dict()
        certificates = result.certificates
    typer.echo(dump_json(out))
    exit_on_verdicts(c.verdict for c in certificates)


@cli.command()
@report_errors
def certify(
    ctx: typer.Context,
    channel_file: Annotated[Path, typer.Argument(..., help="Channel file.")],
    d: Annotated[int, typer.Option("--d", help="Tree arity.")],
    mode: Annotated[
        ContractionMode,
        typer.Option("--mode", help="Contraction constant to use."),
    ] = ContractionMode.TIGHT_PI_OPERATOR,
    expectation: Annotated[
        bool,
        typer.Option(
            "--expectation", help="Certify unsolvability in expectation."
        ),
    ] = False,
    eps: Annotated[
        Optional[float],
        typer.Option(
            "--eps", help="Slack; defaults to 1/2, or 2 in expectation."
        ),
    ] = None,
):
    """Check the unsolvability condition of a channel on a d-ary tree.

    Exits with code 2 when the condition is not met.
    """
    settings = _settings(ctx)
    channel = load_channel(
        channel_file, reversibility_tol=settings.reversibility_tol
    )
    certificate = certify_channel(channel, d, mode, expectation, eps)
    typer.echo(dump_json(certificate.to_dict()))
    exit_on_verdicts([certificate.verdict])


@cli.command("enumerate")
@report_errors
def enumerate_tree(
    ctx: typer.Context,
    tree_file: Annotated[
        Optional[Path], typer.Argument(help="Tree file.")
    ] = None,
    channel_file: Annotated[
        Optional[Path],
        typer.Option("--channel", help="Channel of a complete d-ary tree."),
    ] = None,
    d: Annotated[Optional[int], typer.Option("--d", help="Arity.")] = None,
    g: Annotated[Optional[int], typer.Option("--g", help="Levels.")] = None,
    prior: Annotated[
        str,
        typer.Option(
            "--prior", help="Root prior: uniform, pi or a prior file."
        ),
    ] = "uniform",
    out: Annotated[
        Optional[Path],
        typer.Option("--out", "-o", help="Report file (.csv or .json)."),
    ] = None,
    checks: Annotated[
        bool,
        typer.Option(
            "--checks",
            help="Also print the equivalence chains and root certificates.",
        ),
    ] = False,
):
    """Exact statistics over every leaf pattern of a tree."""
    settings = _settings(ctx)
    tree = _tree_source(settings, tree_file, channel_file, d, g)
    mu = resolve_prior(prior, tree.pi)
    typer.echo(
        f"Enumerating {tree.size ** tree.n_leaves} patterns.", err=True
    )
    report = ExperimentReport(size=tree.size, min_pi=tree.min_pi)
    report.rows.append(exhaustive_stats(tree, mu, settings))
    _write_report(report, out)
    if checks:
        extra = {"equivalence": equivalence_check(tree, mu, settings)}
        if tree.children[tree.root]:
            extra["certificates"] = certify_exhaustive(
                tree, settings=settings
            )
        typer.echo(dump_json({k: v.to_dict() for k, v in extra.items()}))


@cli.command()
@report_errors
def sweep(
    ctx: typer.Context,
    channel_file: Annotated[
        Path, typer.Option("--channel", help="Channel file.")
    ],
    d: Annotated[int, typer.Option("--d", help="Tree arity.")],
    levels: Annotated[
        str, typer.Option("--g", help="Level range, e.g. 1..4.")
    ] = "1..4",
    mode: Annotated[
        ContractionMode,
        typer.Option("--mode", help="Contraction constant to certify with."),
    ] = ContractionMode.TIGHT_PI_OPERATOR,
    prior: Annotated[
        str,
        typer.Option(
            "--prior", help="Root prior: uniform, pi or a prior file."
        ),
    ] = "pi",
    out: Annotated[
        Optional[Path],
        typer.Option("--out", "-o", help="Report file (.csv or .json)."),
    ] = None,
):
    """Exhaustive memory norm decay over a range of tree depths.

    Exits with code 2 when the channel is not certified unsolvable.
    """
    settings = _settings(ctx)
    channel = load_channel(
        channel_file, reversibility_tol=settings.reversibility_tol
    )
    g_min, g_max = parse_level_range(levels)
    mu = resolve_prior(prior, channel.pi)
    report = decay_sweep(channel, d, g_min, g_max, mode, mu, settings)
    _write_report(report, out)
    exit_on_verdicts(report.verdicts)


@cli.command()
@report_errors
def simulate(
    ctx: typer.Context,
    tree_file: Annotated[
        Optional[Path], typer.Argument(help="Tree file.")
    ] = None,
    channel_file: Annotated[
        Optional[Path],
        typer.Option("--channel", help="Channel of a complete d-ary tree."),
    ] = None,
    d: Annotated[Optional[int], typer.Option("--d", help="Arity.")] = None,
    levels: Annotated[
        Optional[str], typer.Option("--g", help="Level range, e.g. 2..8.")
    ] = None,
    samples: Annotated[
        int, typer.Option("--samples", "-n", help="Number of samples.")
    ] = 10_000,
    seed: Annotated[
        Optional[int], typer.Option("--seed", "-s", help="Master seed.")
    ] = None,
    prior: Annotated[
        str,
        typer.Option(
            "--prior", help="Root prior: uniform, pi or a prior file."
        ),
    ] = "uniform",
    out: Annotated[
        Optional[Path],
        typer.Option("--out", "-o", help="Report file (.csv or .json)."),
    ] = None,
):
    """Monte Carlo accuracy of MAP root reconstruction."""
    settings = _settings(ctx)
    if tree_file is not None:
        tree = _tree_source(
            settings, tree_file, channel_file, None, None, False
        )
        mu = resolve_prior(prior, tree.pi)
        estimate = monte_carlo_reconstruction(
            tree, mu, samples, seed, settings
        )
        report = ExperimentReport(size=tree.size, min_pi=tree.min_pi)
        report.rows.append(
            ExperimentRow(
                g=tree.levels,
                map_accuracy=estimate.accuracy,
                map_se=estimate.standard_error,
            )
        )
    else:
        if channel_file is None or d is None:
            raise MalformedSpecError(
                "Give a tree file or both --channel and --d."
            )
        channel = load_channel(
            channel_file,
            reversibility_tol=settings.reversibility_tol,
            require_primitive=False,
        )
        g_min, g_max = parse_level_range(levels)
        mu = resolve_prior(prior, channel.pi)
        report = simulate_sweep(
            channel, d, range(g_min, g_max + 1), mu, samples, seed, settings
        )
    _write_report(report, out)


# Generate a click group to autogenerate docs via sphinx-click:
# https://github.com/tiangolo/typer/issues/200#issuecomment-795873331
typer_click_object = typer.main.get_command(cli)

"""Typer CLI for design-lab."""

import json
import sys
from collections.abc import Sequence
from datetime import datetime
from pathlib import Path
from typing import Annotated, Any

import click
import typer
from loguru import logger
from pydantic import ValidationError

logger.remove()

from design_lab import bounds  # noqa: E402
from design_lab.config import Experiment, config, config_app, load_experiment_config  # noqa: E402
from design_lab.errors import DesignLabError  # noqa: E402
from design_lab.harness import run_experiment, software_version  # noqa: E402

APP_NAME = "design-lab"
EXIT_PASSED = 0
EXIT_ERROR = 1
EXIT_CRITERIA_VIOLATED = 2

state = {"verbose": False}


def _configure_logging() -> None:
    logger.remove()
    log_level = config.model.log_level
    if state["verbose"] is True:
        log_level = "DEBUG"
    log_filepath = config.model.logs_dir / datetime.now().strftime("%Y-%m-%d.log")
    logger.add(log_filepath, level="DEBUG", retention="10 days", rotation="00:00")
    logger.add(sys.stderr, format="<green>{time}</green> | <level>{message}</level>", level=log_level)


def _get_version() -> str:
    """Get version from package metadata.

    Returns:
        str: The version of the project.
    """
    v = software_version()
    logger.debug(f"Loaded version {v} from package metadata")
    return v


def version_callback(value: bool):
    """Print the version."""
    if value:
        logger.debug("Version callback called")
        print(f"design-lab version {_get_version()}")
        raise typer.Exit(0)


def verbose_callback(verbose: bool):
    """Callback for verbose flag."""
    if verbose:
        typer.echo("Will write verbose output", err=True)
        state["verbose"] = True


app = typer.Typer(
    name=APP_NAME,
    no_args_is_help=True,
    help="design-lab - projected ensembles, k-designs and the bounds that relate them",
)
app.add_typer(config_app)

ConfigFile = Annotated[
    Path | None, typer.Option("--config", help="Experiment file (.toml or .yaml); flags override its values.")
]
Seed = Annotated[int | None, typer.Option("--seed", help="Root seed of all random streams.")]
Workers = Annotated[int | None, typer.Option("--workers", help="Worker processes; results do not depend on it.")]
Out = Annotated[Path | None, typer.Option("--out", help="Output directory for trials.csv and summary.json.")]
SubsystemDim = Annotated[int | None, typer.Option("--d-a", help="Dimension d_A of the kept subsystem.")]
Order = Annotated[int | None, typer.Option("--k", help="Moment order k.")]
Complement = Annotated[int | None, typer.Option("--m", help="Dimension M of the measured complement.")]
Delta = Annotated[float | None, typer.Option("--delta", help="Trace distance of rho_A from maximally mixed.")]
EpsPrime = Annotated[float | None, typer.Option("--eps-prime", help="Target design error eps'.")]
DeltaProb = Annotated[float | None, typer.Option("--delta-prob", help="Allowed failure probability Delta.")]
Trials = Annotated[int | None, typer.Option("--n-trials", help="Number of Monte Carlo trials.")]


def _run(experiment: Experiment, defaults: dict[str, Any], config_file: Path | None, **overrides: Any) -> int:
    """Load, validate and run one experiment; the exit code reflects its criteria."""
    defaults = {"output_dir": Path("results") / experiment.value, **defaults}
    cfg = load_experiment_config(experiment, defaults, config_file, overrides)
    summary = run_experiment(cfg)
    print(
        json.dumps(
            {
                "experiment": summary.experiment,
                "passed": summary.passed,
                "criteria": summary.criteria,
                "output_dir": str(cfg.output_dir),
            },
            indent=2,
        )
    )
    return EXIT_PASSED if summary.passed else EXIT_CRITERIA_VIOLATED


def _listed(value: Any) -> list[Any] | None:
    return None if value is None else [value]


@app.command()
def version() -> None:
    """Show the version of design-lab."""
    version_callback(True)


@app.command()
def tail(
    config_file: ConfigFile = None,
    seed: Seed = None,
    workers: Workers = None,
    out: Out = None,
    d_a: SubsystemDim = None,
    k: Order = None,
    m: Complement = None,
    eps_prime: EpsPrime = None,
    delta_prob: DeltaProb = None,
    n_trials: Trials = None,
) -> int:
    """Exceedance tail of random-isometry row ensembles at delta = 0."""
    defaults = {"d_A": 2, "k": 2, "M": 32768, "n_trials": 500, "eps_prime": 0.3, "Delta": 0.1}
    return _run(
        Experiment.LEMMA2_TAIL,
        defaults,
        config_file,
        seed=seed,
        workers=workers,
        output_dir=out,
        d_A=d_a,
        k=k,
        M=m,
        eps_prime=eps_prime,
        Delta=delta_prob,
        n_trials=n_trials,
    )


@app.command()
def theorem(
    config_file: ConfigFile = None,
    seed: Seed = None,
    workers: Workers = None,
    out: Out = None,
    d_a: SubsystemDim = None,
    k: Order = None,
    m: Complement = None,
    delta: Delta = None,
    eps_prime: EpsPrime = None,
    delta_prob: DeltaProb = None,
    n_trials: Trials = None,
) -> int:
    """End-to-end guarantee for reduced states near maximally mixed (delta > 0)."""
    defaults = {"d_A": 2, "k": 2, "M": 32768, "delta": 1e-4, "n_trials": 200, "eps_prime": 0.3, "Delta": 0.1}
    return _run(
        Experiment.THEOREM1_ENDTOEND,
        defaults,
        config_file,
        seed=seed,
        workers=workers,
        output_dir=out,
        d_A=d_a,
        k=k,
        M=m,
        delta=delta,
        eps_prime=eps_prime,
        Delta=delta_prob,
        n_trials=n_trials,
    )


@app.command()
def continuity(
    config_file: ConfigFile = None,
    seed: Seed = None,
    workers: Workers = None,
    out: Out = None,
    d_a: SubsystemDim = None,
    k: Order = None,
    m: Complement = None,
    delta: Delta = None,
    n_trials: Trials = None,
) -> int:
    """Continuity bound between near-thermal states and their thermal companions."""
    defaults = {"d_A_values": [2, 3], "k_values": [1, 2, 3], "M": 16, "n_trials": 10000}
    return _run(
        Experiment.CONTINUITY_SWEEP,
        defaults,
        config_file,
        seed=seed,
        workers=workers,
        output_dir=out,
        d_A_values=_listed(d_a),
        k_values=_listed(k),
        M=m,
        delta_values=_listed(delta),
        n_trials=n_trials,
    )


@app.command()
def gradient(
    config_file: ConfigFile = None,
    seed: Seed = None,
    workers: Workers = None,
    out: Out = None,
    d_a: SubsystemDim = None,
    k: Order = None,
    m: Complement = None,
    n_trials: Trials = None,
) -> int:
    """Gradient norms, directional derivatives and the derivative identity at random probes."""
    defaults = {"d_A": 2, "k_values": [2, 3], "M_values": [4, 8, 16], "n_trials": 200}
    return _run(
        Experiment.GRADIENT_CHECK,
        defaults,
        config_file,
        seed=seed,
        workers=workers,
        output_dir=out,
        d_A=d_a,
        k_values=_listed(k),
        M_values=_listed(m),
        n_trials=n_trials,
    )


@app.command()
def scaling(
    config_file: ConfigFile = None,
    seed: Seed = None,
    workers: Workers = None,
    out: Out = None,
    d_a: SubsystemDim = None,
    k: Order = None,
    n_trials: Trials = None,
) -> int:
    """Median design error against M; the log-log slope should be close to -1/2."""
    defaults = {"d_A": 2, "k": 2, "M_values": [64, 256, 1024, 4096, 16384], "n_trials": 100}
    return _run(
        Experiment.SCALING_SWEEP,
        defaults,
        config_file,
        seed=seed,
        workers=workers,
        output_dir=out,
        d_A=d_a,
        k=k,
        n_trials=n_trials,
    )


@app.command()
def spinchain(
    config_file: ConfigFile = None,
    seed: Seed = None,
    workers: Workers = None,
    out: Out = None,
    k: Order = None,
    n_bases: Annotated[int | None, typer.Option("--n-bases", help="Haar bases sampled per time.")] = None,
) -> int:
    """Quench a mixed-field Ising chain and track design errors over time."""
    return _run(
        Experiment.SPINCHAIN_DEMO,
        {"k": 2, "n_random_bases": 50},
        config_file,
        seed=seed,
        workers=workers,
        output_dir=out,
        k=k,
        n_random_bases=n_bases,
    )


@app.command()
def oracle(
    config_file: ConfigFile = None,
    seed: Seed = None,
    workers: Workers = None,
    out: Out = None,
    n_trials: Trials = None,
) -> int:
    """Exact identities: 1-designs, Haar moments, covariance, path equivalence and the auxiliary bounds."""
    return _run(
        Experiment.ORACLE_CHECK,
        {"n_trials": 1000},
        config_file,
        seed=seed,
        workers=workers,
        output_dir=out,
        n_trials=n_trials,
    )


@app.command(name="bounds")
def bounds_command(
    d_a: Annotated[int, typer.Option("--d-a", min=1, help="Dimension d_A of the kept subsystem.")],
    k: Annotated[int, typer.Option("--k", min=1, help="Moment order k.")],
    eps_prime: Annotated[float, typer.Option("--eps-prime", help="Target design error eps'.")],
    delta_prob: Annotated[float, typer.Option("--delta-prob", help="Allowed failure probability Delta.")],
    delta: Annotated[float, typer.Option("--delta", help="Trace distance of rho_A from maximally mixed.")] = 0.0,
    m: Complement = None,
) -> int:
    """Print the closed-form bounds for the given parameters."""
    values: dict[str, float | int] = {
        "design_threshold_M": bounds.design_threshold_M(d_a, k, eps_prime, delta_prob),
        "continuity_bound": bounds.continuity_bound(d_a, k, delta),
        "theorem_epsilon": bounds.theorem_epsilon(eps_prime, k, d_a, delta),
        "lipschitz_bound": bounds.lipschitz_bound(d_a, k),
    }
    if m is not None:
        values["tail_bound"] = bounds.tail_bound(m, d_a, k, eps_prime)
        values["minimal_eps_prime"] = bounds.minimal_eps_prime(m, d_a, k, delta_prob)
    print(json.dumps(values, indent=2))
    return EXIT_PASSED


@app.callback(invoke_without_command=True)
def callback(
    ctx: typer.Context,
    verbose: Annotated[
        bool,
        typer.Option(
            "--verbose",
            "-v",
            callback=verbose_callback,
            help="Enable verbose output.",
            rich_help_panel="Customization and Utils",
        ),
    ] = False,
    version: Annotated[
        bool,
        typer.Option(
            "--version",
            callback=version_callback,
            is_eager=True,
            help="Print version information.",
            rich_help_panel="Customization and Utils",
        ),
    ] = False,
):
    """Main entry point for the CLI."""
    config.init()
    _configure_logging()
    if ctx.invoked_subcommand is None:
        logger.debug("No subcommand invoked")
    else:
        logger.debug(f"Subcommand invoked: {ctx.invoked_subcommand}")


def _error_json(error: Exception) -> str:
    return json.dumps({"error": type(error).__name__, "message": str(error)})


def cli(args: Sequence[str] | None = None) -> int:
    """Run the CLI and return its exit code.

    0 means every asserted criterion passed, 2 that some criterion was violated and 1 a usage or
    runtime error; runtime errors are printed as a JSON object with ``error`` and ``message``.
    """
    argv = list(sys.argv[1:] if args is None else args)
    command = typer.main.get_command(app)
    if not argv:
        with click.Context(command, info_name=APP_NAME) as ctx:
            print(command.get_help(ctx))
        return EXIT_ERROR
    try:
        result = command.main(args=argv, prog_name=APP_NAME, standalone_mode=False)
    except click.ClickException as error:
        error.show()
        return EXIT_ERROR
    except click.exceptions.Abort:
        return EXIT_ERROR
    except (DesignLabError, ValidationError, OSError) as error:
        logger.debug(f"{type(error).__name__}: {error}")
        print(_error_json(error))
        return EXIT_ERROR
    return result if isinstance(result, int) else EXIT_PASSED


def main() -> None:
    """Console-script entry point."""
    sys.exit(cli())

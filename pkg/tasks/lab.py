"""Experiment tasks: acceptance suite and single design-lab runs."""

from invoke.collection import Collection
from invoke.context import Context
from invoke.tasks import task

EXPERIMENTS = ("tail", "theorem", "continuity", "gradient", "scaling", "spinchain", "oracle")


@task
def acceptance(c: Context, workers: int = 1) -> None:
    """Run the slow Monte Carlo acceptance tests.

    Args:
        c (Context): The context object.
        workers (int): Worker processes used by each experiment.
    """
    print("\n👟 Running acceptance suite\n")
    c.run(f"poetry run pytest tests/ -m slow --no-cov -o addopts='' --workers={workers}", pty=True)


@task
def run(c: Context, experiment: str, seed: int = 0, workers: int = 1) -> None:
    """Run one experiment through the CLI; results go to results/<experiment>.

    Args:
        c (Context): The context object.
        experiment (str): One of tail, theorem, continuity, gradient, scaling, spinchain, oracle.
        seed (int): Root seed.
        workers (int): Worker processes.
    """
    if experiment not in EXPERIMENTS:
        raise ValueError(f"Unknown experiment '{experiment}', expected one of {', '.join(EXPERIMENTS)}")
    print(f"\n👟 Running {experiment}\n")
    c.run(f"poetry run design-lab {experiment} --seed {seed} --workers {workers}", pty=True, warn=True)


lab_ns = Collection("lab")
lab_ns.add_task(acceptance, name="acceptance")  # type: ignore[arg-type]
lab_ns.add_task(run, name="run")  # type: ignore[arg-type]

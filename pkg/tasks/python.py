"""Python workflow tasks: lint, type check, unit tests and the design-lab wheel."""

from invoke.collection import Collection
from invoke.context import Context
from invoke.tasks import task

from tasks.docs import check_api_page

PYTHON_VERSIONS = "3.12.11 3.13.7"
MODULES = ("tensor_core", "sampling", "ensembles", "bounds", "spinchain", "reports", "harness", "config", "cli")


@task
def ruff(c: Context) -> None:
    """Lint with ruff and fail on unformatted files."""
    print("\n👟 Running ruff\n")
    c.run("poetry run ruff check --fix", pty=True)
    c.run("poetry run ruff format --check", pty=True)


@task
def mypy_python(c: Context) -> None:
    """Type check the design_lab package."""
    print("\n👟 Running mypy\n")
    c.run("poetry run mypy src/design_lab", pty=True)


@task
def test_static(c: Context) -> None:
    """Static checks: ruff, mypy and API page coverage."""
    print("\n👟 Running static checks\n")
    ruff(c)
    mypy_python(c)
    check_api_page(c)


@task(pre=[ruff])
def test_unit(c: Context, report: bool = False, module: str = "", workers: int = 1) -> None:
    """Fast unit tests; tests marked slow are deselected by the pytest config.

    Args:
        c (Context): The context object.
        report (bool): Whether to generate a html coverage report.
        module (str): Only run the tests of this package module, e.g. ``bounds``.
        workers (int): Worker processes used by the experiment tests.
    """
    if module and module not in MODULES:
        raise ValueError(f"Unknown module '{module}', expected one of {', '.join(MODULES)}")
    print("\n👟 Running pytest\n")
    c.run("poetry install")  # fixes internal module not found
    target = f"tests/{module}_test.py" if module else "tests/"
    cmd = f"poetry run pytest {target} --workers={workers}"
    if report:
        cmd += " --cov-report=html"
    c.run(cmd, pty=True)
    print("\n👟 Completed pytest\n")


@task
def tox(c: Context) -> None:
    """Run the unit tests on every supported interpreter.

    Args:
        c (Context): The context object.
    """
    print("\n👟 Running tox\n")
    c.run(f"pyenv local {PYTHON_VERSIONS}")
    try:
        c.run("poetry run tox run --skip-missing-interpreters false")
    finally:
        c.run("pyenv local system")


@task
def build(c: Context) -> None:
    """Build the design-lab wheel and check that the console script starts."""
    print("\n👟 Building design-lab\n")
    c.run("poetry build --clean --format wheel")
    c.run("poetry run design-lab --version")


@task
def ci_python(c: Context) -> None:
    """Everything a pull request has to pass, except the slow acceptance suite."""
    test_static(c)
    test_unit(c)
    tox(c)
    build(c)


python_ns = Collection("python")
python_ns.add_task(ruff, name="ruff")  # type: ignore[arg-type]
python_ns.add_task(mypy_python, name="mypy")  # type: ignore[arg-type]
python_ns.add_task(tox, name="tox")  # type: ignore[arg-type]
python_ns.add_task(test_static, name="test_static")  # type: ignore[arg-type]
python_ns.add_task(test_unit, name="test_unit")  # type: ignore[arg-type]
python_ns.add_task(build, name="build")  # type: ignore[arg-type]
python_ns.add_task(ci_python, name="ci")  # type: ignore[arg-type]

"""Invoke MkDocs commands."""

import sys
from pathlib import Path

from invoke.collection import Collection
from invoke.context import Context
from invoke.tasks import task

CONFIG_FILE = "mkdocs.yml"
PDF_FILE = Path("site/pdf/combined.pdf")
API_PAGE = Path("docs/api.md")
PACKAGE_DIR = Path("src/design_lab")


def undocumented_modules() -> list[str]:
    """Modules of the package that the API page does not reference."""
    page = API_PAGE.read_text()
    modules = sorted(p.stem for p in PACKAGE_DIR.glob("*.py") if not p.stem.startswith("_"))
    return [name for name in modules if f"::: design_lab.{name}" not in page]


@task
def serve_docs(c: Context) -> None:
    """Serve the MkDocs documentation for live editing."""
    c.run("poetry install")  # This fixes module not found errors
    c.run(f"mkdocs serve --config-file {CONFIG_FILE} --watch src/ --watch tasks/")


@task
def check_api_page(c: Context) -> None:
    """Fail if a package module is missing from the API reference page."""
    missing = undocumented_modules()
    if missing:
        print(f"Error: {API_PAGE} does not document: {', '.join(missing)}")
        sys.exit(1)
    print(f"✅ {API_PAGE} covers every module")


@task(pre=[check_api_page])
def build_docs(c: Context) -> None:
    """Build the MkDocs documentation with PDF export enabled."""
    c.run("poetry install")  # This fixes module not found errors
    c.run(
        f"mkdocs build --clean --strict --config-file {CONFIG_FILE}",
        env={"ENABLE_PDF_EXPORT": "1"},
    )
    if not PDF_FILE.exists():
        print(f"Error: PDF file {PDF_FILE} was not created.")
        sys.exit(1)


@task
def ci_docs(c: Context) -> None:
    """Run all documentation checks."""
    build_docs(c)


doc_ns = Collection("docs")
doc_ns.add_task(serve_docs, name="serve")  # type: ignore[arg-type]
doc_ns.add_task(check_api_page, name="check_api")  # type: ignore[arg-type]
doc_ns.add_task(build_docs, name="build")  # type: ignore[arg-type]
doc_ns.add_task(ci_docs, name="ci")  # type: ignore[arg-type]

"""Shared fixtures."""

import pytest
from loguru import logger

from design_lab.config import ConfigModel, config
from design_lab.sampling import RngStream


def pytest_addoption(parser):
    """Worker processes for the acceptance runs."""
    parser.addoption("--workers", type=int, default=1, help="Worker processes used by slow experiment tests")


@pytest.fixture()
def workers(request) -> int:
    """Value of --workers."""
    return request.config.getoption("--workers")


@pytest.fixture()
def rng() -> RngStream:
    """Fixed stream so every test draws the same matrices."""
    return RngStream(20240601)


@pytest.fixture()
def isolated_config(monkeypatch, tmp_path):
    """Point the user config file and the log directory into tmp_path."""
    monkeypatch.setenv("DESIGN_LAB_LOGS_DIR", str(tmp_path / "logs"))
    monkeypatch.delenv("DESIGN_LAB_CAP", raising=False)
    monkeypatch.setattr(config, "config_file", tmp_path / "config" / "config.yaml")
    monkeypatch.setattr(config, "model", ConfigModel())
    yield config
    logger.remove()


@pytest.fixture()
def small_cap(monkeypatch):
    """Shrink the dimension cap to 16."""
    monkeypatch.setattr(config, "model", ConfigModel(cap=16))

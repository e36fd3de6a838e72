"""Shared fixture paths and small helpers."""

from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parent.parent
FIXTURE_DIR = REPO / "data" / "fixture"
CONFIG_DIR = REPO / "configs"
TESTS_FIXTURE_DIR = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURE_DIR


@pytest.fixture(scope="session")
def config_dir() -> Path:
    return CONFIG_DIR

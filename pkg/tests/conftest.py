"""Shared pytest options for the test suite."""

from pathlib import Path

import pytest

GOLDEN_DIR = Path(__file__).resolve().parent / "golden"


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption(
        "--regen-golden",
        action="store_true",
        default=False,
        help="Rewrite tests/golden/ from the measured Monte-Carlo results instead of comparing",
    )


@pytest.fixture
def regen_golden(request: pytest.FixtureRequest) -> bool:
    """Whether golden files are rewritten by this run."""
    return bool(request.config.getoption("--regen-golden"))


@pytest.fixture
def golden_dir() -> Path:
    """Directory of the committed Monte-Carlo reference results."""
    return GOLDEN_DIR

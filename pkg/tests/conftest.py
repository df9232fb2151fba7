from pathlib import Path

import pytest


@pytest.fixture(scope="session")
def scenario_dir() -> Path:
    return Path(__file__).resolve().parent.parent / "scenarios"

from pathlib import Path

import pytest

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def quad_dir() -> Path:
    return DATA_DIR / "quads"

import os
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

# Add the project root to the Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

DATA_DIR = project_root / "data"
CONF_DIR = project_root / "conf.d"


# Set test environment variables
def pytest_configure():
    """Configure test environment."""
    os.environ["TESTING"] = "true"
    os.environ.setdefault("PWINTERP_LOG_DIR", tempfile.mkdtemp(prefix="pwinterp-logs-"))

    # Ensure we don't load any real .env files during tests
    if "DOTENV_PATH" not in os.environ:
        os.environ["DOTENV_PATH"] = "/dev/null"


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Drop PWINTERP_* overrides and rebuild the global settings for every test."""
    from pwinterp.config import reload_settings

    for name in list(os.environ):
        if name.startswith("PWINTERP_") and name != "PWINTERP_LOG_DIR":
            monkeypatch.delenv(name)
    settings = reload_settings()
    yield settings
    monkeypatch.undo()
    reload_settings()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def data_dir():
    return DATA_DIR


@pytest.fixture
def conf_dir():
    return CONF_DIR

from pathlib import Path

import pytest

from app.api.parser import load_system
from app.services.cache import clear_acc_cache
from app.services.config import get_settings

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(autouse=True)
def fresh_state():
    """Settings and the ACC memo are process-wide; start every test clean."""
    get_settings.cache_clear()
    clear_acc_cache()
    yield
    get_settings.cache_clear()
    clear_acc_cache()


@pytest.fixture
def settings_env(monkeypatch):
    """Override settings through the environment for one test."""

    def apply(**values):
        for key, value in values.items():
            monkeypatch.setenv(key.upper(), str(value))
        get_settings.cache_clear()
        return get_settings()

    return apply


@pytest.fixture
def load():
    def _load(name: str, check: bool = True):
        return load_system(FIXTURES / f"{name}.mcs", check)

    return _load


@pytest.fixture
def fixture_path():
    def _path(name: str) -> str:
        return str(FIXTURES / f"{name}.mcs")

    return _path

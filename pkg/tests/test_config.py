import importlib

import pytest

import src.utils.config as config


@pytest.fixture
def reload_config(monkeypatch):
    """Reload the config module under patched environment variables"""
    def reload(**env):
        for key, value in env.items():
            monkeypatch.setenv(key, value)
        return importlib.reload(config)

    yield reload
    monkeypatch.undo()
    importlib.reload(config)


def test_defaults_are_valid():
    assert config.validate_config() == []
    names = [name for name, _ in config.describe_config()]
    assert "Tolerance" in names and "Max workers" in names


def test_environment_overrides(reload_config):
    module = reload_config(DYADIC_DEFAULT_SEED="42", DYADIC_TOLERANCE="1e-6")
    assert module.DEFAULT_SEED == 42
    assert module.TOLERANCE == 1e-6


def test_invalid_values_reported(reload_config):
    module = reload_config(DYADIC_MAX_WORKERS="0", DYADIC_MAX_FINEST_CELLS="1000")
    messages = module.validate_config()
    assert any("DYADIC_MAX_WORKERS" in m for m in messages)
    assert any("power of two" in m for m in messages)


def test_unknown_log_level_is_a_warning(reload_config):
    module = reload_config(DYADIC_LOG_LEVEL="chatty")
    messages = module.validate_config()
    assert len(messages) == 1
    assert messages[0].startswith("WARNING")

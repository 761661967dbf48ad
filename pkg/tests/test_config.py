"""Tests for configuration management."""

import os
from unittest.mock import patch

import pytest

from discrete_energy.config import (
    DEFAULT_CONFIG_FILE,
    EnergySettings,
    get_settings_with_overrides,
    load_config_file,
    reload_settings,
    setup_logging,
)
from discrete_energy.tensor import Precision


def test_load_default_settings():
    """Verify that default settings are loaded correctly."""
    settings = EnergySettings()
    assert settings.precision == "double"
    assert settings.discrete_eps_double == 1e-12
    assert settings.discrete_eps_single == 1e-6
    assert settings.max_reseeds == 3
    assert settings.unify_time_step


def test_precision_dependent_defaults():
    settings = EnergySettings()
    assert settings.eps_for("single") == 1e-6
    assert settings.eps_for(Precision.DOUBLE) == 1e-12
    assert settings.solver_tol_for("f32") == 1e-5
    assert settings.solver_tol_for("double") == 1e-10
    assert settings.dopri_tolerances("single") == (1e-6, 1e-6)
    assert settings.dopri_tolerances("double") == (1e-9, 1e-9)


def test_eps_override_wins():
    settings = EnergySettings(discrete_eps_override=1e-9)
    assert settings.eps_for("single") == 1e-9
    assert settings.eps_for("double") == 1e-9


def test_get_settings_with_overrides():
    """Verify that settings can be overridden at runtime."""
    settings = get_settings_with_overrides(learning_rate=0.01, batch_size=32, seed=None)
    assert settings.learning_rate == 0.01
    assert settings.batch_size == 32
    assert settings.seed == EnergySettings().seed


def test_load_config_from_file(tmp_path):
    """Verify that settings are loaded from a TOML file."""
    config_content = """
    [discrete_energy]
    learning_rate = 0.005
    precision = "single"
    """
    config_file = str(tmp_path / "config.toml")
    with open(config_file, "w") as f:
        f.write(config_content)

    with patch.dict(os.environ, {"DISCRETE_ENERGY_CONFIG_FILE": config_file}):
        settings = reload_settings()
        assert settings.learning_rate == 0.005
        assert settings.precision == "single"
    reload_settings()


def test_unknown_file_keys_are_ignored(tmp_path, caplog):
    config_file = tmp_path / "config.toml"
    config_file.write_text("[discrete_energy]\nseed = 3\nllm_model = 'x'\n\n[train]\ntrials = 2\n")
    assert load_config_file(str(config_file)) == {"seed": 3}
    assert "llm_model" in caplog.text


def test_missing_or_broken_file_yields_no_overrides(tmp_path):
    assert load_config_file(str(tmp_path / "absent.toml")) == {}
    broken = tmp_path / "broken.toml"
    broken.write_text("[discrete_energy\nseed = ")
    assert load_config_file(str(broken)) == {}


def test_environment_variable_overrides(tmp_path):
    """Verify that environment variables override file settings."""
    config_file = tmp_path / "config.toml"
    config_file.write_text("[discrete_energy]\nbatch_size = 64\nshow_progress = true\n")

    env_vars = {
        "DISCRETE_ENERGY_CONFIG_FILE": str(config_file),
        "DEN_BATCH_SIZE": "16",
        "DEN_SHOW_PROGRESS": "no",
        "DEN_DOPRI_RTOL_DOUBLE": "1e-7",
    }
    with patch.dict(os.environ, env_vars):
        settings = reload_settings()
        assert settings.batch_size == 16
        assert settings.show_progress is False
        assert settings.dopri_rtol_double == 1e-7
    reload_settings()


def test_invalid_environment_value():
    with patch.dict(os.environ, {"DEN_MAX_WORKERS": "many"}):
        with pytest.raises(ValueError, match="DEN_MAX_WORKERS"):
            get_settings_with_overrides()


def test_setup_logging_debug(caplog):
    """Verify that logging is set to DEBUG level."""
    logger = setup_logging(log_level="DEBUG")
    logger.debug("test message")
    assert "test message" in caplog.text
    assert "DEBUG" in caplog.text


def test_default_config_file_constant():
    """Verify the default config file path is correct."""
    assert DEFAULT_CONFIG_FILE == "config/config.toml"

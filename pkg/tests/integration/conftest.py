"""Integration test fixtures and utilities."""

from pathlib import Path
from typing import Callable, List

import numpy as np
import pytest

from discrete_energy.cli import EXIT_OK, run


def max_drift(values: np.ndarray) -> float:
    """Largest deviation of a series from its first value, relative to ``max(1, |v0|)``."""
    values = np.asarray(values, dtype=np.float64)
    return float(np.max(np.abs(values - values[0]))) / max(1.0, abs(float(values[0])))


@pytest.fixture
def cli(tmp_path: Path, monkeypatch) -> Callable[[List[str]], int]:
    """Run the CLI from ``tmp_path`` with progress bars off and single-threaded fan-out."""
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("DISCRETE_ENERGY_CONFIG_FILE", str(tmp_path / "absent.toml"))

    def invoke(argv: List[str]) -> int:
        return run(argv + ["--no-progress", "--deterministic"])

    return invoke


@pytest.fixture
def expect_ok(cli) -> Callable[[List[str]], None]:
    def invoke(argv: List[str]) -> None:
        assert cli(argv) == EXIT_OK, f"command failed: {argv}"

    return invoke

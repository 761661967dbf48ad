"""Ingestion of measured pendulum series (time, angle, momentum)."""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Dict, List, Union

import numpy as np

from discrete_energy.integrators import Trajectory

from .schemas import Dataset, DatasetManifest

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("time", "q", "p")
_COLUMN_ALIASES = {
    "t": "time",
    "time": "time",
    "q": "q",
    "theta": "q",
    "angle": "q",
    "p": "p",
    "momentum": "p",
    "omega": "p",
}
UNIFORM_RELATIVE_TOL = 1e-6


class PendulumFileError(ValueError):
    """The measurement file is missing columns or its times are not increasing."""


def _read_columns(path: Path) -> Dict[str, List[float]]:
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        raise PendulumFileError(f"{path} is empty")
    try:
        dialect = csv.Sniffer().sniff(text.splitlines()[0], delimiters=",;\t ")
    except csv.Error:
        dialect = csv.excel
    reader = csv.reader(text.splitlines(), dialect)
    header = next(reader)
    names = [_COLUMN_ALIASES.get(h.strip().lower(), h.strip().lower()) for h in header]
    missing = [c for c in REQUIRED_COLUMNS if c not in names]
    if missing:
        raise PendulumFileError(f"{path} is missing columns: {', '.join(missing)}")
    index = {c: names.index(c) for c in REQUIRED_COLUMNS}
    columns: Dict[str, List[float]] = {c: [] for c in REQUIRED_COLUMNS}
    for line_no, row in enumerate(reader, start=2):
        cells = [cell for cell in row if cell.strip()] if dialect.delimiter == " " else row
        if not cells:
            continue
        try:
            for column, position in index.items():
                columns[column].append(float(cells[position]))
        except (IndexError, ValueError) as exc:
            raise PendulumFileError(f"{path}:{line_no}: malformed row {row!r}") from exc
    return columns


def load_real_pendulum(path: Union[str, Path]) -> Dataset:
    """Single measured trajectory: first half train, second half test, whole series long-term.

    Values pass through untransformed; ``dt`` is the median spacing and the
    trajectory is marked uniform only when every spacing matches it.
    """
    source = Path(path)
    if not source.is_file():
        raise PendulumFileError(f"pendulum file not found: {source}")
    columns = _read_columns(source)
    times = np.asarray(columns["time"], dtype=np.float64)
    if times.size < 2:
        raise PendulumFileError(f"{source} needs at least two rows")
    if np.any(np.diff(times) <= 0):
        raise PendulumFileError(f"{source} has non-increasing times")
    states = np.stack([columns["q"], columns["p"]], axis=1)
    steps = np.diff(times)
    dt = float(np.median(steps))
    uniform = bool(np.max(np.abs(steps - dt)) <= UNIFORM_RELATIVE_TOL * dt)
    if not uniform:
        logger.info("Pendulum series %s has irregular spacing (median dt %.6g)", source, dt)

    def piece(start: int, stop: int) -> Trajectory:
        meta = {"system": "pendulum", "source": str(source), "dt": dt, "uniform": False, "measured_uniform": uniform}
        return Trajectory(times[start:stop].copy(), states[start:stop].copy(), None, meta)

    half = times.size // 2
    splits = {"train": [piece(0, half)], "test": [piece(half, times.size)], "long_term": [piece(0, times.size)]}
    manifest = DatasetManifest(
        system={"name": "pendulum", "real": True},
        generator="file",
        splits={name: 1 for name in splits},
        trajectory_meta={name: [items[0].meta] for name, items in splits.items()},
        dt={"train": dt, "test": dt, "long_term": dt},
        parameters={"source": str(source), "rows": int(times.size), "split": "halves"},
    )
    return Dataset(manifest, splits)

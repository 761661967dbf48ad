"""Benchmark data: generation, ingestion and storage."""

from .generators import (
    ODE_PRESETS,
    GenerationError,
    OdePreset,
    ch_initial_state,
    gen_ch,
    gen_kdv,
    gen_ode,
    generate,
    kdv_initial_state,
    ode_initial_state,
)
from .real_pendulum import PendulumFileError, load_real_pendulum
from .schemas import SPLITS, Dataset, DatasetManifest
from .seeding import splitmix64, trajectory_seed, trajectory_seeds
from .storage import (
    DatasetChecksumError,
    DatasetFormatError,
    DatasetVersionError,
    dataset_checksum,
    decode_split,
    encode_split,
    load_dataset,
    save_dataset,
)

__all__ = [
    "Dataset",
    "DatasetChecksumError",
    "DatasetFormatError",
    "DatasetManifest",
    "DatasetVersionError",
    "GenerationError",
    "ODE_PRESETS",
    "OdePreset",
    "PendulumFileError",
    "SPLITS",
    "ch_initial_state",
    "dataset_checksum",
    "decode_split",
    "encode_split",
    "gen_ch",
    "gen_kdv",
    "gen_ode",
    "generate",
    "kdv_initial_state",
    "load_dataset",
    "load_real_pendulum",
    "ode_initial_state",
    "save_dataset",
    "splitmix64",
    "trajectory_seed",
    "trajectory_seeds",
]

"""Dataset directories: ``manifest.json`` plus one binary blob per split.

Blob layout (integers little-endian)::

    b"DENDSET\\0"  u16 version  u32 n_traj  u32 n_steps  u32 dim  u8 precision  u8 flags
    states       n_traj x n_steps x dim, row-major, stored precision
    times        n_traj x n_steps float64
    energies     n_traj x n_steps float64 (only when flags bit 0 is set)
    u32          CRC32 of everything above
"""

from __future__ import annotations

import json
import logging
import struct
import zlib
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from discrete_energy.integrators import Trajectory, TrajectoryError
from discrete_energy.tensor import Precision
from discrete_energy.utils.file_utils import ensure_directory_exists

from .schemas import SPLITS, Dataset, DatasetManifest

logger = logging.getLogger(__name__)

MAGIC = b"DENDSET\0"
VERSION = 1
MANIFEST_NAME = "manifest.json"
_HEADER = struct.Struct("<8sHIIIBB")
_TRAILER = struct.Struct("<I")
_FLAG_ENERGIES = 1


class DatasetFormatError(ValueError):
    """A dataset directory or blob is malformed."""


class DatasetVersionError(DatasetFormatError):
    """Unknown magic bytes or an unsupported format version."""


class DatasetChecksumError(DatasetFormatError):
    """A blob is truncated or its checksum does not match."""


def blob_name(split: str) -> str:
    return f"{split}.bin"


def encode_split(trajectories: List[Trajectory], precision: Union[str, Precision] = Precision.DOUBLE) -> bytes:
    """Serialize one split; every trajectory must share its length and dimension."""
    tag = Precision.parse(precision)
    if trajectories:
        shapes = {t.states.shape for t in trajectories}
        if len(shapes) != 1:
            raise DatasetFormatError(f"trajectories of one split must share a shape, got {sorted(shapes)}")
        n_steps, dim = shapes.pop()
    else:
        n_steps = dim = 0
    with_energies = bool(trajectories) and all(t.energies is not None for t in trajectories)
    flags = _FLAG_ENERGIES if with_energies else 0
    dtype = tag.dtype.newbyteorder("<")
    parts = [_HEADER.pack(MAGIC, VERSION, len(trajectories), n_steps, dim, tag.code, flags)]
    if trajectories:
        parts.append(np.ascontiguousarray(np.stack([t.states for t in trajectories]), dtype=dtype).tobytes())
        parts.append(np.ascontiguousarray(np.stack([t.times for t in trajectories]), dtype="<f8").tobytes())
        if with_energies:
            parts.append(np.ascontiguousarray(np.stack([t.energies for t in trajectories]), dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + _TRAILER.pack(zlib.crc32(body) & 0xFFFFFFFF)


def decode_split(raw: bytes, metas: Optional[List[Dict]] = None, *, source: str = "blob") -> List[Trajectory]:
    if len(raw) < _HEADER.size + _TRAILER.size:
        raise DatasetChecksumError(f"{source} is truncated")
    magic, version, n_traj, n_steps, dim, code, flags = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise DatasetVersionError(f"{source} is not a dataset blob (magic {magic!r})")
    if version != VERSION:
        raise DatasetVersionError(f"{source} has unsupported version {version}")
    body, (stored_crc,) = raw[: -_TRAILER.size], _TRAILER.unpack_from(raw, len(raw) - _TRAILER.size)
    if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
        raise DatasetChecksumError(f"{source} failed its checksum")
    try:
        precision = Precision.from_code(code)
    except ValueError as exc:
        raise DatasetFormatError(f"{source}: {exc}") from exc

    dtype = precision.dtype.newbyteorder("<")
    state_bytes = n_traj * n_steps * dim * dtype.itemsize
    grid_bytes = n_traj * n_steps * 8
    expected = _HEADER.size + state_bytes + grid_bytes * (2 if flags & _FLAG_ENERGIES else 1)
    if len(body) != expected:
        raise DatasetFormatError(f"{source} holds {len(body)} bytes, header implies {expected}")
    if n_traj == 0:
        return []

    offset = _HEADER.size
    states = np.frombuffer(body, dtype=dtype, count=n_traj * n_steps * dim, offset=offset).reshape(n_traj, n_steps, dim)
    offset += state_bytes
    times = np.frombuffer(body, dtype="<f8", count=n_traj * n_steps, offset=offset).reshape(n_traj, n_steps)
    energies = None
    if flags & _FLAG_ENERGIES:
        offset += grid_bytes
        energies = np.frombuffer(body, dtype="<f8", count=n_traj * n_steps, offset=offset).reshape(n_traj, n_steps)

    trajectories = []
    for i in range(n_traj):
        meta = dict(metas[i]) if metas and i < len(metas) else {}
        try:
            trajectories.append(
                Trajectory(
                    times[i].astype(np.float64),
                    states[i].astype(precision.dtype),
                    None if energies is None else energies[i].astype(np.float64),
                    meta,
                )
            )
        except TrajectoryError as exc:
            raise DatasetFormatError(f"{source}: trajectory {i}: {exc}") from exc
    return trajectories


def save_dataset(dataset: Dataset, path: Union[str, Path]) -> Path:
    """Write ``manifest.json`` and one blob per split into directory ``path``."""
    target = Path(path)
    ensure_directory_exists(str(target))
    for split in SPLITS:
        (target / blob_name(split)).write_bytes(encode_split(dataset.splits[split], dataset.manifest.precision))
    (target / MANIFEST_NAME).write_text(
        json.dumps(dataset.manifest.model_dump(mode="json"), indent=2, sort_keys=True), encoding="utf-8"
    )
    logger.info(
        "Saved dataset %s (%s)", target, ", ".join(f"{s}={len(dataset.splits[s])}" for s in SPLITS)
    )
    return target


def load_dataset(path: Union[str, Path]) -> Dataset:
    source = Path(path)
    manifest_path = source / MANIFEST_NAME
    if not manifest_path.is_file():
        raise DatasetFormatError(f"no {MANIFEST_NAME} in {source}")
    try:
        manifest = DatasetManifest.model_validate(json.loads(manifest_path.read_text(encoding="utf-8")))
    except ValueError as exc:
        raise DatasetFormatError(f"{manifest_path} is malformed: {exc}") from exc
    if manifest.format_version != VERSION:
        raise DatasetVersionError(f"{manifest_path} has unsupported version {manifest.format_version}")
    splits: Dict[str, List[Trajectory]] = {}
    for split in SPLITS:
        blob = source / blob_name(split)
        if not blob.is_file():
            if manifest.splits.get(split, 0):
                raise DatasetFormatError(f"missing blob {blob}")
            splits[split] = []
            continue
        splits[split] = decode_split(blob.read_bytes(), manifest.trajectory_meta.get(split), source=str(blob))
    try:
        return Dataset(manifest, splits)
    except ValueError as exc:
        raise DatasetFormatError(f"{source}: {exc}") from exc


def dataset_checksum(path: Union[str, Path]) -> str:
    """CRC32 over the manifest and every blob, as hex; equal for identical datasets."""
    source = Path(path)
    crc = 0
    for name in [MANIFEST_NAME] + [blob_name(s) for s in SPLITS]:
        file = source / name
        if file.is_file():
            crc = zlib.crc32(file.read_bytes(), crc)
    return f"{crc & 0xFFFFFFFF:08x}"

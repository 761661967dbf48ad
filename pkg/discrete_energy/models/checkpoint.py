"""Versioned binary checkpoints.

Layout (all integers little-endian)::

    b"DENCKPT\\0"  u16 version  u8 precision code  u32 header length
    header       UTF-8 JSON: arch descriptor, model kind, G descriptor,
                 config echo and a parameter index (name, shape, offset, nbytes)
    blobs        parameter arrays, row-major IEEE-754
    u32          CRC32 of everything above
"""

from __future__ import annotations

import json
import logging
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import numpy as np

from discrete_energy.systems import gspec_from_descriptor
from discrete_energy.tensor import Precision
from discrete_energy.utils.file_utils import ensure_directory_exists

from .dynamics import LearnedSystem
from .energy import ConvEnergy, EnergyModel, MlpEnergy, SeparableEnergy
from .node import NodeModel

logger = logging.getLogger(__name__)

MAGIC = b"DENCKPT\0"
VERSION = 1
_PREAMBLE = struct.Struct("<8sHBI")
_TRAILER = struct.Struct("<I")


class CheckpointError(ValueError):
    """A checkpoint file is malformed, truncated or of an unknown version."""


@dataclass
class Checkpoint:
    system: LearnedSystem
    header: Dict[str, Any]

    @property
    def config(self) -> Dict[str, Any]:
        return dict(self.header.get("config", {}))


def model_from_descriptor(descriptor: Mapping[str, Any], precision: Union[str, Precision] = Precision.DOUBLE) -> EnergyModel:
    """Fresh model of the architecture described by ``descriptor``."""
    arch = descriptor.get("arch")
    seed = int(descriptor.get("seed", 0))
    if arch == "mlp":
        return MlpEnergy(descriptor["dims"], descriptor.get("activation", "tanh"), seed, precision)
    if arch == "conv":
        return ConvEnergy(
            float(descriptor["dx"]),
            int(descriptor.get("hidden", 200)),
            int(descriptor.get("kernel", 3)),
            seed,
            precision,
            global_head=bool(descriptor.get("global_head", False)),
            n_points=descriptor.get("n_points"),
        )
    if arch == "separable":
        return SeparableEnergy(
            int(descriptor["n"]), int(descriptor.get("hidden", 200)), descriptor.get("activation", "tanh"), seed, precision
        )
    if arch == "node":
        return NodeModel(
            int(descriptor["dim"]),
            int(descriptor.get("hidden", 200)),
            int(descriptor.get("depth", 2)),
            descriptor.get("activation", "tanh"),
            seed,
            precision,
        )
    raise CheckpointError(f"unknown architecture {arch!r}")


def save_checkpoint(path: Union[str, Path], system: LearnedSystem, config: Optional[Mapping[str, Any]] = None) -> Path:
    model = system.model
    dtype = model.precision.dtype.newbyteorder("<")
    blobs = []
    index = []
    offset = 0
    for name, tensor in model.named_parameters():
        raw = np.ascontiguousarray(tensor.data, dtype=dtype).tobytes()
        index.append({"name": name, "shape": list(tensor.shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = {
        "arch": model.descriptor(),
        "kind": system.kind,
        "gspec": system.gspec.descriptor(),
        "config": dict(config or {}),
        "params": index,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    body = _PREAMBLE.pack(MAGIC, VERSION, model.precision.code, len(header_bytes)) + header_bytes + b"".join(blobs)
    target = Path(path)
    ensure_directory_exists(str(target.parent))
    target.write_bytes(body + _TRAILER.pack(zlib.crc32(body) & 0xFFFFFFFF))
    logger.info("Saved checkpoint %s (%d parameters)", target, model.parameter_count())
    return target


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    target = Path(path)
    if not target.is_file():
        raise CheckpointError(f"checkpoint not found: {target}")
    raw = target.read_bytes()
    if len(raw) < _PREAMBLE.size + _TRAILER.size:
        raise CheckpointError(f"{target} is truncated")
    magic, version, code, header_len = _PREAMBLE.unpack_from(raw, 0)
    if magic != MAGIC:
        raise CheckpointError(f"{target} is not a checkpoint")
    if version != VERSION:
        raise CheckpointError(f"{target} has unsupported version {version}")
    body, (stored_crc,) = raw[: -_TRAILER.size], _TRAILER.unpack_from(raw, len(raw) - _TRAILER.size)
    if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
        raise CheckpointError(f"{target} failed its checksum")
    try:
        precision = Precision.from_code(code)
        start = _PREAMBLE.size
        header = json.loads(body[start : start + header_len].decode("utf-8"))
    except ValueError as exc:
        raise CheckpointError(f"{target} has a malformed header: {exc}") from exc

    blob_start = _PREAMBLE.size + header_len
    dtype = precision.dtype.newbyteorder("<")
    arrays: Dict[str, np.ndarray] = {}
    for entry in header["params"]:
        begin = blob_start + int(entry["offset"])
        chunk = body[begin : begin + int(entry["nbytes"])]
        if len(chunk) != int(entry["nbytes"]):
            raise CheckpointError(f"{target} is truncated at parameter {entry['name']}")
        arrays[entry["name"]] = np.frombuffer(chunk, dtype=dtype).reshape(entry["shape"]).astype(precision.dtype)

    model = model_from_descriptor(header["arch"], precision)
    model.load_arrays(arrays)
    gspec = gspec_from_descriptor(header["gspec"], precision)
    return Checkpoint(LearnedSystem(model, gspec, header.get("kind", "dg")), header)

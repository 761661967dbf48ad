"""Dataset records validated with Pydantic V2."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, field_validator

from discrete_energy.integrators import Trajectory

SPLITS = ("train", "test", "long_term")
MANIFEST_VERSION = 1


class DatasetManifest(BaseModel):
    """Provenance of a dataset: how it was generated and how it is split."""

    model_config = ConfigDict(frozen=True)

    format_version: int = MANIFEST_VERSION
    system: Dict[str, Any]
    generator: str
    seed: int = 0
    precision: str = "double"
    splits: Dict[str, int]
    trajectory_seeds: Dict[str, List[int]] = {}
    trajectory_meta: Dict[str, List[Dict[str, Any]]] = {}
    dt: Dict[str, float] = {}
    noise_sigma: float = 0.0
    noisy: bool = False
    unify_time_step: Optional[bool] = None
    checks: Dict[str, Any] = {}
    parameters: Dict[str, Any] = {}

    @field_validator("generator")
    @classmethod
    def check_generator(cls, v: str) -> str:
        if v not in {"discrete_gradient", "dopri", "file"}:
            raise ValueError("must be one of discrete_gradient, dopri, file")
        return v

    @field_validator("splits")
    @classmethod
    def check_splits(cls, v: Dict[str, int]) -> Dict[str, int]:
        unknown = set(v) - set(SPLITS)
        if unknown:
            raise ValueError(f"must only name the splits {SPLITS}, got {sorted(unknown)}")
        if any(count < 0 for count in v.values()):
            raise ValueError("must be non-negative counts")
        return v

    @field_validator("noise_sigma")
    @classmethod
    def check_sigma(cls, v: float) -> float:
        if v < 0:
            raise ValueError("must be >= 0")
        return v

    @field_validator("precision")
    @classmethod
    def check_precision(cls, v: str) -> str:
        if v not in {"single", "double"}:
            raise ValueError("must be single or double")
        return v


@dataclass
class Dataset:
    """Train, test and long-term trajectories plus their manifest."""

    manifest: DatasetManifest
    splits: Dict[str, List[Trajectory]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in SPLITS:
            self.splits.setdefault(name, [])
        for name, expected in self.manifest.splits.items():
            found = len(self.splits.get(name, []))
            if found != expected:
                raise ValueError(f"split {name!r} has {found} trajectories but the manifest lists {expected}")
        seen = set()
        for trajectories in self.splits.values():
            for trajectory in trajectories:
                if id(trajectory) in seen:
                    raise ValueError("a trajectory object is shared between splits")
                seen.add(id(trajectory))

    @property
    def train(self) -> List[Trajectory]:
        return self.splits["train"]

    @property
    def test(self) -> List[Trajectory]:
        return self.splits["test"]

    @property
    def long_term(self) -> List[Trajectory]:
        return self.splits["long_term"]

    def prediction_split(self) -> str:
        """Split used for long-term prediction: ``long_term`` when present, else ``test``."""
        return "long_term" if self.splits["long_term"] else "test"

    def system_descriptor(self) -> Dict[str, Any]:
        return dict(self.manifest.system)

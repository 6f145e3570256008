"""Export manifest: the record that makes an export reproducible downstream."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass


@dataclass
class ExportManifest:
    video: str
    n: int
    feature_h: int
    feature_w: int
    feature_d: int
    model: str
    dift_timestep: int = 0
    layer: str = ""
    latent_timesteps: int | None = None
    latent_h: int | None = None
    latent_w: int | None = None
    latent_c: int | None = None
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load(cls, path) -> "ExportManifest":
        with open(path) as f:
            return cls(**json.load(f))

"""Run configuration: one flat key set covering matcher, features, decoder
and generator parameters.

Configs load from a JSON file (unknown keys are rejected), every key has a
CLI flag, and every CLI run echoes its effective config as ``config.json``
into the output directory; re-running from that file reproduces outputs
byte for byte.
"""

import dataclasses
import json
import os
from dataclasses import dataclass

from .binio import atomic_write_text
from .forgegen import ForgerySpec
from .maskgen import DecoderConfig
from .patchmatch import PmConfig


@dataclass
class RunConfig:
    seed: int = 0
    # matcher
    iterations: int = 8
    beta: float = 100.0
    search_radius: float = 25.0
    min_offset_norm: float = 8.0
    enforce_min_norm: bool = True
    cross_scale: bool = True
    # features
    patch_radius: int = 8
    conv_weights: str = ""
    # dense linear fitting
    dlf_radii: tuple = (7, 9, 11)
    # decoder
    eps_threshold: float = 0.5
    min_region_px: int = 64
    consistency_tol: float = 4.0
    median_radius: int = 2
    # forgery generator
    gen_vertices: tuple = (3, 12)
    gen_area_frac: tuple = (0.005, 0.1)
    gen_angle: tuple = (-180.0, 180.0)
    gen_scale: tuple = (0.5, 2.0)
    gen_regions: tuple = (1, 3)
    gen_resize: int = 0

    def pm_config(self) -> PmConfig:
        return PmConfig(
            iterations=self.iterations,
            beta=self.beta,
            search_radius=self.search_radius,
            min_offset_norm=self.min_offset_norm,
            enforce_min_norm=self.enforce_min_norm,
            cross_scale=self.cross_scale,
            seed=self.seed,
        )

    def decoder_config(self) -> DecoderConfig:
        return DecoderConfig(
            eps_threshold=self.eps_threshold,
            min_region_px=self.min_region_px,
            consistency_tol=self.consistency_tol,
            median_radius=self.median_radius,
        )

    def forgery_spec(self) -> ForgerySpec:
        return ForgerySpec(
            vertices=tuple(self.gen_vertices),
            area_frac=tuple(self.gen_area_frac),
            angle=tuple(self.gen_angle),
            scale=tuple(self.gen_scale),
            regions=tuple(self.gen_regions),
            seed=self.seed,
        )

    def validate(self) -> "RunConfig":
        self.pm_config()
        self.decoder_config()
        self.forgery_spec()
        if self.patch_radius < 2:
            raise ValueError("patch_radius must be >= 2")
        if not self.dlf_radii or any(r < 1 for r in self.dlf_radii):
            raise ValueError("dlf_radii must be positive")
        if self.gen_resize < 0:
            raise ValueError("gen_resize must be >= 0")
        return self

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def replace(self, **overrides) -> "RunConfig":
        known = {f.name: f for f in dataclasses.fields(self)}
        clean = {}
        for key, value in overrides.items():
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            if isinstance(getattr(self, key), tuple) and value is not None:
                value = tuple(value)
            clean[key] = value
        return dataclasses.replace(self, **clean).validate()

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError(f"{path}: config must be a JSON object")
        return cls().replace(**data)

    def save(self, out_dir) -> str:
        path = os.path.join(out_dir, "config.json")
        atomic_write_text(path, json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

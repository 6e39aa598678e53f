"""Deterministic synthetic-slide generator for fixtures and demos: a
background field with stamped square stain blobs and optional i.i.d. noise
pixels, colored through the Beer-Lambert synthesis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .stains import synthesize_pixel

# stamping "full" density with extra optical density keeps the quantized
# density pinned at 255 even after rounding (the cap clamps it back to 1)
SATURATE_FACTOR = 1.2


@dataclass
class SynthSpec:
    width: int
    height: int
    background: tuple = (255, 255, 255)
    blobs: list = field(default_factory=list)  # (x, y, size, density)
    noise: tuple = None  # (rate alpha, density)
    texture: int = 0  # per-pixel uniform background jitter amplitude
    seed: int = 0
    saturate: bool = False

    def validate(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image must be at least 1x1")
        for x, y, size, d in self.blobs:
            if not 0.0 <= d <= 1.0:
                raise ValueError(f"blob density {d} outside [0, 1]")
            if x < 0 or y < 0 or x + size > self.width or y + size > self.height:
                raise ValueError(f"blob ({x},{y},{size}) outside image")
        if self.noise is not None:
            alpha, d = self.noise
            if not 0.0 <= alpha <= 1.0 or not 0.0 <= d <= 1.0:
                raise ValueError("noise rate and density must lie in [0, 1]")


def synth_image(spec, profile):
    """Render the spec to an RGB uint8 array. Overlapping blobs resolve by
    max density; same seed gives byte-identical output."""
    spec.validate()
    rng = np.random.Generator(np.random.Philox(key=spec.seed))
    dens = np.zeros((spec.height, spec.width), np.float64)
    for x, y, size, d in spec.blobs:
        region = dens[y : y + size, x : x + size]
        np.maximum(region, d, out=region)
    if spec.noise is not None:
        alpha, d = spec.noise
        mask = rng.random((spec.height, spec.width)) < alpha
        np.maximum(dens, np.where(mask, d, 0.0), out=dens)

    img = np.empty((spec.height, spec.width, 3), np.uint8)
    img[:] = np.asarray(spec.background, np.uint8)
    if spec.texture:
        jitter = rng.integers(
            -spec.texture, spec.texture + 1, size=img.shape, dtype=np.int16
        )
        img = np.clip(img.astype(np.int16) + jitter, 0, 255).astype(np.uint8)

    stained = dens > 0
    for d in np.unique(dens[stained]):
        dd = d * SATURATE_FACTOR if spec.saturate else d
        img[dens == d] = synthesize_pixel(dd, profile)
    return img

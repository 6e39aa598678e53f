"""Stain-density extraction by optical-density projection, and the
Beer-Lambert synthesis used as its inverse oracle.

A pixel's density is the projection of its per-channel optical density
OD_c = -log10(max(p_c, 1) / i0_c) onto the stain's unit OD vector, divided
by the normalization cap d_max and clamped to [0, 1]. Zero channels are
clamped to 1 before the log to avoid infinities.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels


@dataclass(frozen=True)
class StainProfile:
    """Reference stain: OD unit vector, display target color, background."""

    name: str
    od_vector: tuple
    target_color: tuple = None
    background_color: tuple = (255, 255, 255)
    i0: tuple = (255, 255, 255)
    d_max: float = 1.0
    _lut: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        s = np.asarray(self.od_vector, np.float64)
        if s.shape != (3,) or np.any(s < 0):
            raise ValueError("od_vector must be 3 non-negative components")
        if abs(np.linalg.norm(s) - 1.0) > 1e-6:
            raise ValueError(f"od_vector must be unit length, got |s|={np.linalg.norm(s)}")
        if self.d_max <= 0:
            raise ValueError("d_max must be positive")
        if any(not 1 <= c <= 255 for c in self.i0):
            raise ValueError("i0 components must lie in [1, 255]")
        object.__setattr__(self, "od_vector", tuple(float(v) for v in s))
        if self.target_color is None:
            # Beer-Lambert color at the density cap: what a fully stained
            # pixel looks like under this profile.
            object.__setattr__(self, "target_color", synthesize_pixel(1.0, self))
        lut = np.empty((3, 256), np.float64)
        v = np.maximum(np.arange(256, dtype=np.float64), 1.0)
        for c in range(3):
            lut[c] = -np.log10(v / self.i0[c]) * s[c] / self.d_max
        object.__setattr__(self, "_lut", lut)

    def to_json_dict(self):
        return {
            "name": self.name,
            "od_vector": list(self.od_vector),
            "target_color": list(self.target_color),
            "background_color": list(self.background_color),
            "i0": list(self.i0),
            "d_max": self.d_max,
        }

    @classmethod
    def from_json_dict(cls, d):
        return cls(
            name=d["name"],
            od_vector=tuple(d["od_vector"]),
            target_color=tuple(d["target_color"]) if d.get("target_color") else None,
            background_color=tuple(d.get("background_color", (255, 255, 255))),
            i0=tuple(d.get("i0", (255, 255, 255))),
            d_max=float(d.get("d_max", 1.0)),
        )

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_json_dict(json.load(f))


def rgb_to_od(pixel, i0=(255, 255, 255)):
    """Per-channel optical density; zero channels clamp to 1 before the log."""
    return tuple(
        -math.log10(max(float(p), 1.0) / float(z)) for p, z in zip(pixel, i0)
    )


def density(pixel, profile):
    """Normalized stain density of one RGB pixel, in [0, 1]."""
    lut = profile._lut
    d = lut[0][pixel[0]] + lut[1][pixel[1]] + lut[2][pixel[2]]
    return min(max(d, 0.0), 1.0)


def density_map(img, profile):
    """Per-pixel density plane, quantized to uint8 (round(255 * d))."""
    img = np.asarray(img, np.uint8)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("density_map expects an RGB image")
    return kernels.density_u8(img, profile._lut)


def synthesize_pixel(d, profile):
    """Beer-Lambert inverse: RGB of a pixel with normalized density d."""
    return tuple(
        int(math.floor(z * 10.0 ** (-d * profile.d_max * s) + 0.5))
        for z, s in zip(profile.i0, profile.od_vector)
    )


def _unit(v):
    n = math.sqrt(sum(x * x for x in v))
    return tuple(x / n for x in v)


# OD vectors from the standard color-deconvolution reference matrices
# (Ruifrok & Johnston via G. Landini's reference implementation; H/E/DAB
# match skimage's rgb_from_hed rows after normalization).
DEFAULT_PROFILES = {
    "hematoxylin": StainProfile("hematoxylin", _unit((0.65, 0.70, 0.29))),
    "eosin": StainProfile("eosin", _unit((0.070, 0.990, 0.110))),
    "dab": StainProfile("dab", _unit((0.270, 0.570, 0.780))),
    "fast_red": StainProfile("fast_red", _unit((0.21393921, 0.85112669, 0.47794022))),
}


def get_profile(name):
    try:
        return DEFAULT_PROFILES[name]
    except KeyError:
        raise KeyError(
            f"unknown stain profile {name!r}; have {sorted(DEFAULT_PROFILES)}"
        ) from None

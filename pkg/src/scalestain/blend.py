"""Visualization math: importance coloring, anchor-based blending, zoom
attenuation, triangle-picker parameter mapping, and region rendering.

The blend axis runs through three anchors: b_eff = 0 shows the original,
b_eff = 0.5 shows the density-alpha overlay (d*T over the original), and
b_eff = 1 shows the importance map alone (white -> target by density).
Blending is attenuated linearly toward zero as the display level approaches
base resolution, so at level 0 the original image is always displayed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .pyramid import BoundsError, level_geometry


class ParameterError(Exception):
    pass


def effective_blend(b, display_level, fade_range):
    """Zoom-attenuated blend factor: b scaled by clamp(level / fade, 0, 1)."""
    if fade_range <= 0:
        raise ValueError("fade_range must be positive")
    return b * min(max(display_level / fade_range, 0.0), 1.0)


def importance_color(d, target, background=(255, 255, 255)):
    """Importance-only rendering: white -> target color by density."""
    return tuple(int(math.floor((1.0 - d) * 255.0 + d * t + 0.5)) for t in target)


def blend_pixel(orig, d, target, b_eff):
    """Single-pixel reference of the blend law (same arithmetic as the
    region kernel)."""
    out = []
    for c in range(3):
        oc = float(orig[c])
        t = float(target[c])
        ov = d * t + (1.0 - d) * oc
        if b_eff <= 0.5:
            f = b_eff * 2.0
            v = (1.0 - f) * oc + f * ov
        else:
            f = (b_eff - 0.5) * 2.0
            imp = (1.0 - d) * 255.0 + d * t
            v = (1.0 - f) * ov + f * imp
        out.append(int(math.floor(v + 0.5)))
    return tuple(out)


@dataclass
class ViewParams:
    display_level: float
    viewport: tuple  # (x, y, w, h) in floor(display_level) pixels
    blend: float
    sensitivity: int
    fade_range: float = 2.0

    def validate(self, bundle):
        if not 0.0 <= self.blend <= 1.0:
            raise ParameterError(f"blend {self.blend} outside [0, 1]")
        if self.display_level < 0 or self.display_level > bundle.original.levels - 1:
            raise ParameterError(
                f"display level {self.display_level} outside "
                f"[0, {bundle.original.levels - 1}]"
            )
        if self.sensitivity not in bundle.importance:
            raise ParameterError(
                f"sensitivity {self.sensitivity} not in {bundle.start_levels}"
            )
        if self.fade_range <= 0:
            raise ParameterError("fade_range must be positive")
        x, y, w, h = self.viewport
        lw, lh, _, _ = bundle.original.level_geometry(int(self.display_level))
        if w < 1 or h < 1 or x < 0 or y < 0 or x + w > lw or y + h > lh:
            raise ParameterError(
                f"viewport {self.viewport} outside level "
                f"{int(self.display_level)} ({lw}x{lh})"
            )


def importance_lookup(bundle, k, level, col, row):
    """One importance tile at any slide level. Returns (tile, interpolated);
    tiles below the first persisted plane are nearest-neighbor upsampled
    substitutes."""
    if k not in bundle.importance:
        raise ParameterError(f"unknown sensitivity {k}; have {bundle.start_levels}")
    pyr = bundle.importance[k]
    w, h, ts = pyr.slide_geometry
    lw, lh, cols, rows = level_geometry(w, h, ts, level)
    if level >= bundle.original.levels or not (0 <= col < cols and 0 <= row < rows):
        raise BoundsError(f"tile ({col},{row}) outside level {level}")
    x, y = col * ts, row * ts
    tw, th = min(ts, lw - x), min(ts, lh - y)
    return pyr.plane_region(level, x, y, tw, th)


def _render_integer(bundle, level, x, y, w, h, blend, k, fade_range):
    orig = bundle.original.read_region(level, x, y, w, h)
    b_eff = effective_blend(blend, level, fade_range)
    if b_eff == 0.0:
        return orig
    dens, _ = bundle.importance[k].plane_region(level, x, y, w, h)
    return kernels.blend_u8(orig, dens, bundle.profile.target_color, b_eff)


def render_region(bundle, params):
    """Reference compositor. Integer display levels blend per pixel; at
    fractional levels the two bracketing integer levels are composited
    independently (each with its own attenuation) and lerped afterwards."""
    params.validate(bundle)
    lo = int(params.display_level)
    frac = params.display_level - lo
    x, y, w, h = params.viewport
    lo_img = _render_integer(
        bundle, lo, x, y, w, h, params.blend, params.sensitivity, params.fade_range
    )
    if frac == 0.0 or lo + 1 >= bundle.original.levels:
        return lo_img
    xs = (x + np.arange(w)) // 2
    ys = (y + np.arange(h)) // 2
    hi_img = _render_integer(
        bundle, lo + 1, int(xs[0]), int(ys[0]),
        int(xs[-1] - xs[0] + 1), int(ys[-1] - ys[0] + 1),
        params.blend, params.sensitivity, params.fade_range,
    )
    hi_up = hi_img[np.ix_(ys - ys[0], xs - xs[0])]
    v = (1.0 - frac) * lo_img.astype(np.float64) + frac * hi_up.astype(np.float64)
    return np.floor(v + 0.5).astype(np.uint8)


@dataclass
class PickerPoint:
    """Triangle picker position: u is the blend axis (left apex = 0), v the
    sensitivity axis (0 = top = highest sensitivity). Interior satisfies
    |v - 0.5| <= u / 2."""

    u: float
    v: float

    def validate(self):
        if not (0.0 <= self.u <= 1.0 and 0.0 <= self.v <= 1.0):
            raise ParameterError(f"picker point ({self.u}, {self.v}) out of range")
        if abs(self.v - 0.5) > self.u / 2.0 + 1e-9:
            raise ParameterError(
                f"picker point ({self.u}, {self.v}) outside the triangle"
            )


def _quantize_sensitivity(s, levels):
    """Map sensitivity fraction s (1 = highest sensitivity = smallest start
    level) to the nearest start level; exact ties go to the more sensitive
    (smaller) level."""
    levels = sorted(levels)
    n = len(levels)
    if n == 1:
        return levels[0]
    x = (1.0 - s) * (n - 1)
    idx = int(math.floor(x + 0.5))
    if idx > 0 and x + 0.5 == idx:  # exact tie: prefer the smaller level
        idx -= 1
    return levels[min(idx, n - 1)]


def picker_to_params(point, levels, current_sensitivity=None):
    """Picker position -> (blend, start level). At the apex (u = 0) the
    sensitivity has no visual effect, so the current value is kept."""
    point.validate()
    blend = point.u
    if point.u <= 0.0:
        k = current_sensitivity if current_sensitivity is not None else sorted(levels)[0]
        return blend, k
    s = 0.5 - (point.v - 0.5) / point.u
    s = min(max(s, 0.0), 1.0)
    return blend, _quantize_sensitivity(s, levels)


def params_to_picker(blend, sensitivity, levels):
    """Right inverse of picker_to_params up to sensitivity quantization."""
    levels = sorted(levels)
    if sensitivity not in levels:
        raise ParameterError(f"sensitivity {sensitivity} not in {levels}")
    n = len(levels)
    s = 1.0 if n == 1 else 1.0 - levels.index(sensitivity) / (n - 1)
    v = 0.5 - (s - 0.5) * blend
    return PickerPoint(u=blend, v=v)

"""Sensitivity pyramids: max-value subsampling of stain-density planes,
tile/storage accounting, and build orchestration with stage timing.

A sensitivity pyramid with start level k holds density planes for slide
levels k..L, where plane k is the density map of the original level-k image
and each higher plane is the 2x2 max of the one below. Keeping the max
guarantees any stained pixel stays represented all the way to the top
(100% sensitivity) and preserves density rank order.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .pyramid import TiledPyramid, level_geometry, tile_image
from .stains import density_map


def max_downsample(src):
    """Halve a density plane keeping the 2x2 block maximum (partial edge
    blocks take the max of the pixels present)."""
    src = np.asarray(src, np.uint8)
    if src.shape[0] < 1 or src.shape[1] < 1:
        raise ValueError("empty plane")
    return kernels.max_pool2(src)


def block_max_oracle(src, block):
    """Direct per-block maximum, the reference for iterated max_downsample.

    Deliberately naive: loops over output blocks and reduces each source
    window with np.max. block must be a power of two.
    """
    if block < 1 or block & (block - 1):
        raise ValueError("block must be a power of two")
    src = np.asarray(src, np.uint8)
    h, w = src.shape
    oh, ow = -(-h // block), -(-w // block)
    out = np.empty((oh, ow), np.uint8)
    for i in range(oh):
        for j in range(ow):
            out[i, j] = src[i * block : (i + 1) * block, j * block : (j + 1) * block].max()
    return out


@dataclass
class BuildPolicy:
    start_levels: tuple
    drop_base: bool = True
    tile_size: int = 256

    @classmethod
    def default(cls, levels, tile_size=256):
        # k=0 doubles compute for marginal benefit: level-0 blending is
        # always faded to zero anyway.
        return cls(start_levels=tuple(range(1, levels)), tile_size=tile_size)

    def validate(self, levels):
        for k in self.start_levels:
            if not 0 <= k <= levels - 1:
                raise ValueError(f"start level {k} outside [0, {levels - 1}]")


def persisted_levels(k, top_level, drop_base):
    """Slide levels whose plane is stored for a pyramid starting at k.

    The top plane is always kept, even when it is also the base (k = top):
    a pyramid with zero stored planes would be useless.
    """
    levels = list(range(k, top_level + 1))
    if drop_base and k < top_level:
        levels = levels[1:]
    return levels


@dataclass
class ImportancePyramid:
    """One sensitivity pyramid: density planes for slide levels k..L."""

    start_level: int
    top_level: int
    drop_base: bool
    planes: dict = field(default_factory=dict)  # slide level -> uint8 (h, w)
    loader: object = None  # (level, col, row) -> tile, for disk-backed use
    slide_geometry: tuple = None  # (width, height, tile_size) of the slide

    @property
    def persisted(self):
        return persisted_levels(self.start_level, self.top_level, self.drop_base)

    @property
    def first_persisted(self):
        return self.persisted[0]

    def plane_tile(self, level, col, row):
        if level in self.planes:
            ts = self.slide_geometry[2]
            return self.planes[level][
                row * ts : (row + 1) * ts, col * ts : (col + 1) * ts
            ]
        return self.loader(level, col, row)

    def plane_region(self, level, x, y, w, h):
        """Density values for a region at any slide level.

        Levels at/above the first persisted plane read stored data; levels
        below it (the dropped base, or levels finer than k) are nearest-
        neighbor upsampled from the first persisted plane and flagged.
        Returns (plane, interpolated).
        """
        sw, sh, ts = self.slide_geometry
        if level >= self.first_persisted:
            return self._read(level, x, y, w, h), False
        src_level = self.first_persisted
        f = 1 << (src_level - level)
        lw, lh, _, _ = level_geometry(sw, sh, ts, src_level)
        xs = np.minimum((x + np.arange(w)) // f, lw - 1)
        ys = np.minimum((y + np.arange(h)) // f, lh - 1)
        src = self._read(src_level, xs.min(), ys.min(), xs.max() - xs.min() + 1,
                         ys.max() - ys.min() + 1)
        return src[np.ix_(ys - ys.min(), xs - xs.min())], True

    def _read(self, level, x, y, w, h):
        if level in self.planes:
            return self.planes[level][y : y + h, x : x + w]
        sw, sh, ts = self.slide_geometry
        lw, lh, _, _ = level_geometry(sw, sh, ts, level)
        p = TiledPyramid(width=lw << level, height=lh << level, tile_size=ts,
                         levels=level + 1, loader=self._level_loader)
        # reuse TiledPyramid stitching at the plane's own level
        return p.read_region(level, x, y, w, h)

    def _level_loader(self, level, col, row):
        return self.loader(level, col, row)


def build_sensitivity_pyramid(orig, profile, k, drop_base=True, timings=None):
    """Compute all planes of one sensitivity pyramid from the original
    pyramid. The base plane is always computed; it is simply not persisted
    downstream when drop_base is set."""
    if not 0 <= k < orig.levels:
        raise ValueError(f"start level {k} outside [0, {orig.levels})")
    top = orig.levels - 1
    t = timings if timings is not None else StageTimings()
    with t.stage("file_io"):
        base = orig.read_level(k)
    with t.stage("deconvolution"):
        plane = density_map(base, profile)
    t.pixels_processed += plane.size
    planes = {k: plane}
    for lv in range(k, top):
        with t.stage("max_subsample"):
            plane = max_downsample(plane)
        t.pixels_processed += plane.size
        planes[lv + 1] = plane
    return ImportancePyramid(
        start_level=k,
        top_level=top,
        drop_base=drop_base,
        planes=planes,
        slide_geometry=(orig.width, orig.height, orig.tile_size),
    )


@dataclass
class TileBudget:
    original_tiles: int
    sensitivity_tiles: int
    overhead_ratio: float
    per_pyramid: dict  # start level -> tile count after drop policy


def tile_accounting(width, height, tile_size, policy):
    """Exact tile counts by per-level enumeration (no closed form)."""
    from .pyramid import num_levels

    levels = num_levels(width, height, tile_size)
    top = levels - 1

    def tiles_at(level):
        _, _, cols, rows = level_geometry(width, height, tile_size, level)
        return cols * rows

    original = sum(tiles_at(lv) for lv in range(levels))
    per_pyramid = {}
    for k in sorted(policy.start_levels):
        if not 0 <= k <= top:
            continue
        per_pyramid[k] = sum(
            tiles_at(lv) for lv in persisted_levels(k, top, policy.drop_base)
        )
    sensitivity = sum(per_pyramid.values())
    return TileBudget(
        original_tiles=original,
        sensitivity_tiles=sensitivity,
        overhead_ratio=sensitivity / original,
        per_pyramid=per_pyramid,
    )


class StageTimings:
    """Wall-clock accounting bucketed by what a worker is doing: tile
    encode/decode/disk, deconvolution, max subsampling, everything else."""

    STAGES = ("file_io", "deconvolution", "max_subsample", "other")

    def __init__(self):
        self.buckets = dict.fromkeys(self.STAGES, 0.0)
        self.total = 0.0
        self.pixels_processed = 0
        self._start = None

    def start(self):
        self._start = time.perf_counter()

    def stop(self):
        self.total = time.perf_counter() - self._start
        measured = sum(self.buckets[s] for s in ("file_io", "deconvolution", "max_subsample"))
        self.buckets["other"] = max(self.total - measured, 0.0)

    @contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.buckets[name] += time.perf_counter() - t0

    def add(self, name, seconds):
        self.buckets[name] += seconds

    def report(self):
        total = self.total or sum(self.buckets.values()) or 1e-12
        pct = {s: 100.0 * self.buckets[s] / total for s in self.STAGES}
        return {
            "seconds": {s: self.buckets[s] for s in self.STAGES},
            "percent": pct,
            "total_s": self.total,
            "pixels_processed": self.pixels_processed,
            "mpixels_per_s": self.pixels_processed / 1e6 / total,
        }


def build_all(orig, profile, policy, out_dir, slide_id=None, fade_range=2.0,
              workers=None, force=False):
    """Build every sensitivity pyramid in the policy and persist the whole
    slide bundle. Returns (SlideBundle, StageTimings). meta.json is written
    last, as the commit point: a failed build leaves no meta.json."""
    from . import storage

    policy.validate(orig.levels)
    t = StageTimings()
    t.start()
    pyramids = {}
    for k in sorted(policy.start_levels):
        pyramids[k] = build_sensitivity_pyramid(
            orig, profile, k, drop_base=policy.drop_base, timings=t
        )
    bundle = storage.write_bundle(
        out_dir, orig, pyramids, profile, policy,
        slide_id=slide_id, fade_range=fade_range, workers=workers,
        force=force, timings=t,
    )
    # the original pyramid's own pixels count as processed I/O work
    t.pixels_processed += sum(
        orig.level_geometry(lv)[0] * orig.level_geometry(lv)[1]
        for lv in range(orig.levels)
    )
    t.stop()
    return bundle, t

"""Dyadic tiled image pyramids: geometry, construction, and region reads.

Level 0 is full resolution; each level halves both dimensions (ceil). The
pyramid stops at the first level that fits in a single tile — the tile is
the service unit, so going below one tile buys nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels


class PyramidError(Exception):
    pass


class BoundsError(PyramidError):
    """Requested region or tile address is outside the level."""


class MissingTileError(PyramidError):
    """An in-bounds tile address did not resolve to stored data."""


def level_geometry(width, height, tile_size, level):
    """Return (level_width, level_height, cols, rows) for a pyramid level."""
    f = 1 << level
    lw = -(-width // f)
    lh = -(-height // f)
    return lw, lh, -(-lw // tile_size), -(-lh // tile_size)


def num_levels(width, height, tile_size):
    """Number of levels until one tile holds the whole image (always >= 1)."""
    n = 1
    while True:
        _, _, cols, rows = level_geometry(width, height, tile_size, n - 1)
        if cols == 1 and rows == 1:
            return n
        n += 1


def downsample_avg(src):
    """Halve an image by 2x2 mean (half-up rounding, partial edge blocks
    average only the pixels present)."""
    if src.shape[0] < 1 or src.shape[1] < 1:
        raise ValueError("empty image")
    return kernels.avg_pool2(src)


def tile_image(img, tile_size):
    """Split a full-level image into a {(col, row): tile} mapping."""
    h, w = img.shape[:2]
    tiles = {}
    for row in range(-(-h // tile_size)):
        for col in range(-(-w // tile_size)):
            tiles[(col, row)] = np.ascontiguousarray(
                img[
                    row * tile_size : (row + 1) * tile_size,
                    col * tile_size : (col + 1) * tile_size,
                ]
            )
    return tiles


@dataclass
class TiledPyramid:
    """Immutable multi-level tile store.

    ``tiles`` maps (level, col, row) to uint8 arrays. A ``loader`` callable
    may back the store lazily (disk-backed bundles); loaded tiles are cached
    in ``tiles``.
    """

    width: int
    height: int
    tile_size: int
    levels: int
    tiles: dict = field(default_factory=dict)
    loader: object = None

    def level_geometry(self, level):
        return level_geometry(self.width, self.height, self.tile_size, level)

    def tile(self, level, col, row):
        if not 0 <= level < self.levels:
            raise BoundsError(f"level {level} outside [0, {self.levels})")
        _, _, cols, rows = self.level_geometry(level)
        if not (0 <= col < cols and 0 <= row < rows):
            raise BoundsError(f"tile ({col}, {row}) outside {cols}x{rows} at level {level}")
        key = (level, col, row)
        t = self.tiles.get(key)
        if t is None:
            if self.loader is None:
                raise MissingTileError(f"tile {key} missing from store")
            t = self.loader(level, col, row)
            if t is None:
                raise MissingTileError(f"tile {key} missing on disk")
            self.tiles[key] = t
        return t

    def read_region(self, level, x, y, w, h):
        """Stitch a (w, h) region at (x, y) in level pixels; seamless across
        tile boundaries."""
        lw, lh, _, _ = self.level_geometry(level)
        if w < 1 or h < 1 or x < 0 or y < 0 or x + w > lw or y + h > lh:
            raise BoundsError(
                f"region ({x},{y},{w},{h}) outside level {level} ({lw}x{lh})"
            )
        ts = self.tile_size
        probe = self.tile(level, x // ts, y // ts)
        shape = (h, w) if probe.ndim == 2 else (h, w, probe.shape[2])
        out = np.empty(shape, np.uint8)
        for row in range(y // ts, (y + h - 1) // ts + 1):
            for col in range(x // ts, (x + w - 1) // ts + 1):
                t = self.tile(level, col, row)
                tx, ty = col * ts, row * ts
                x0, y0 = max(x, tx), max(y, ty)
                x1 = min(x + w, tx + t.shape[1])
                y1 = min(y + h, ty + t.shape[0])
                out[y0 - y : y1 - y, x0 - x : x1 - x] = t[
                    y0 - ty : y1 - ty, x0 - tx : x1 - tx
                ]
        return out

    def read_level(self, level):
        lw, lh, _, _ = self.level_geometry(level)
        return self.read_region(level, 0, 0, lw, lh)

    def total_tiles(self):
        return sum(
            self.level_geometry(lv)[2] * self.level_geometry(lv)[3]
            for lv in range(self.levels)
        )


def build_average_pyramid(base, tile_size=256):
    """Build the full dyadic pyramid of an RGB base image by iterated 2x2
    mean downsampling. Deterministic: output is a pure function of the base."""
    base = np.asarray(base, np.uint8)
    if base.ndim != 3 or base.shape[2] != 3:
        raise ValueError("base image must be RGB (H, W, 3)")
    if base.shape[0] < 1 or base.shape[1] < 1:
        raise ValueError("zero-sized image")
    h, w = base.shape[:2]
    levels = num_levels(w, h, tile_size)
    p = TiledPyramid(width=w, height=h, tile_size=tile_size, levels=levels)
    img = base
    for lv in range(levels):
        for (col, row), t in tile_image(img, tile_size).items():
            p.tiles[(lv, col, row)] = t
        if lv + 1 < levels:
            img = downsample_avg(img)
    return p

"""On-disk slide bundle layout and (lazy) loading.

    <slide>/meta.json                                 commit point, written last
    <slide>/original/<level>/<col>_<row>.png          8-bit RGB, lossless
    <slide>/importance/s<k>/<level>/<col>_<row>.png   8-bit greyscale

Tiles are lossless PNG end-to-end so equivalence tests stay byte-exact.
"""

from __future__ import annotations

import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .build import BuildPolicy, ImportancePyramid, persisted_levels
from .pyramid import TiledPyramid, level_geometry
from .stains import StainProfile

META_NAME = "meta.json"


class BundleError(Exception):
    pass


def encode_png(arr):
    mode = "RGB" if arr.ndim == 3 else "L"
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(arr), mode).save(
        buf, format="PNG", compress_level=1
    )
    return buf.getvalue()


def decode_png(data):
    return np.asarray(Image.open(io.BytesIO(data)))


def _tile_path(root, level, col, row):
    return os.path.join(root, str(level), f"{col}_{row}.png")


def _write_tiles(jobs, workers, timings):
    """jobs: iterable of (path, array). Encode+write in a thread pool; bytes
    depend only on tile content, so output is schedule-independent."""

    def one(job):
        path, arr = job
        data = encode_png(arr)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "wb") as f:
            f.write(data)

    jobs = list(jobs)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(one, jobs))
    else:
        for job in jobs:
            one(job)


def write_bundle(out_dir, orig, pyramids, profile, policy, slide_id=None,
                 fade_range=2.0, workers=None, force=False, timings=None):
    """Persist a slide bundle. Refuses to overwrite an existing bundle
    unless force is set; meta.json is written last."""
    meta_path = os.path.join(out_dir, META_NAME)
    if os.path.exists(meta_path) and not force:
        raise BundleError(f"{out_dir} already holds a bundle (use force)")
    slide_id = slide_id or os.path.basename(os.path.normpath(out_dir))
    os.makedirs(out_dir, exist_ok=True)

    jobs = []
    for lv in range(orig.levels):
        _, _, cols, rows = orig.level_geometry(lv)
        for row in range(rows):
            for col in range(cols):
                jobs.append(
                    (_tile_path(os.path.join(out_dir, "original"), lv, col, row),
                     orig.tile(lv, col, row))
                )
    for k, pyr in pyramids.items():
        ts = orig.tile_size
        for lv in pyr.persisted:
            _, _, cols, rows = orig.level_geometry(lv)
            for row in range(rows):
                for col in range(cols):
                    jobs.append(
                        (_tile_path(os.path.join(out_dir, "importance", f"s{k}"), lv, col, row),
                         pyr.plane_tile(lv, col, row))
                    )
    if timings is not None:
        with timings.stage("file_io"):
            _write_tiles(jobs, workers, timings)
    else:
        _write_tiles(jobs, workers, timings)

    meta = {
        "id": slide_id,
        "width": orig.width,
        "height": orig.height,
        "tile_size": orig.tile_size,
        "levels": orig.levels,
        "stain": profile.to_json_dict(),
        "start_levels": sorted(pyramids),
        "drop_base": policy.drop_base,
        "fade_range": fade_range,
    }
    with open(meta_path, "w") as f:
        json.dump(meta, f, indent=2)
        f.write("\n")
    return load_bundle(out_dir)


@dataclass
class SlideBundle:
    """A slide's metadata plus disk-backed original and importance pyramids."""

    id: str
    root: str
    meta: dict
    profile: StainProfile
    original: TiledPyramid
    importance: dict = field(default_factory=dict)  # k -> ImportancePyramid

    @property
    def fade_range(self):
        return float(self.meta.get("fade_range", 2.0))

    @property
    def start_levels(self):
        return sorted(self.importance)

    def tile_bytes(self, kind, level, col, row, k=None):
        """Raw stored PNG bytes for a tile (served verbatim over HTTP)."""
        if kind == "original":
            path = _tile_path(os.path.join(self.root, "original"), level, col, row)
        else:
            path = _tile_path(os.path.join(self.root, "importance", f"s{k}"), level, col, row)
        with open(path, "rb") as f:
            return f.read()


def memory_bundle(orig, pyramids, profile, fade_range=2.0, slide_id="mem"):
    """In-memory bundle over freshly built pyramids (no disk round trip)."""
    meta = {
        "id": slide_id,
        "width": orig.width,
        "height": orig.height,
        "tile_size": orig.tile_size,
        "levels": orig.levels,
        "stain": profile.to_json_dict(),
        "start_levels": sorted(pyramids),
        "drop_base": all(p.drop_base for p in pyramids.values()),
        "fade_range": fade_range,
    }
    return SlideBundle(
        id=slide_id, root=None, meta=meta, profile=profile,
        original=orig, importance=dict(pyramids),
    )


def _disk_loader(root):
    def load(level, col, row):
        path = _tile_path(root, level, col, row)
        if not os.path.exists(path):
            return None
        with open(path, "rb") as f:
            return decode_png(f.read())

    return load


def load_bundle(slide_dir):
    """Load and validate a bundle. Raises BundleError when meta.json is
    missing or disagrees with the on-disk tile enumeration."""
    meta_path = os.path.join(slide_dir, META_NAME)
    if not os.path.exists(meta_path):
        raise BundleError(f"{slide_dir}: no {META_NAME}")
    with open(meta_path) as f:
        meta = json.load(f)
    w, h, ts, levels = meta["width"], meta["height"], meta["tile_size"], meta["levels"]
    profile = StainProfile.from_json_dict(meta["stain"])

    _validate_tiles(os.path.join(slide_dir, "original"), w, h, ts, range(levels))
    original = TiledPyramid(
        width=w, height=h, tile_size=ts, levels=levels,
        loader=_disk_loader(os.path.join(slide_dir, "original")),
    )
    importance = {}
    for k in meta["start_levels"]:
        droot = os.path.join(slide_dir, "importance", f"s{k}")
        plevels = persisted_levels(k, levels - 1, meta["drop_base"])
        _validate_tiles(droot, w, h, ts, plevels)
        importance[k] = ImportancePyramid(
            start_level=k, top_level=levels - 1, drop_base=meta["drop_base"],
            loader=_disk_loader(droot), slide_geometry=(w, h, ts),
        )
    return SlideBundle(
        id=meta["id"], root=slide_dir, meta=meta, profile=profile,
        original=original, importance=importance,
    )


def _validate_tiles(root, w, h, ts, levels):
    for lv in levels:
        _, _, cols, rows = level_geometry(w, h, ts, lv)
        ldir = os.path.join(root, str(lv))
        try:
            found = {n for n in os.listdir(ldir) if n.endswith(".png")}
        except FileNotFoundError:
            raise BundleError(f"{root}: level {lv} directory missing") from None
        expect = {f"{c}_{r}.png" for r in range(rows) for c in range(cols)}
        if found != expect:
            raise BundleError(
                f"{root}: level {lv} tile enumeration disagrees with meta "
                f"({len(found)} found, {len(expect)} expected)"
            )


@dataclass
class SlideRegistry:
    """Slide directory scanner; invalid bundles are excluded with a reason."""

    root: str
    slides: dict = field(default_factory=dict)
    rejected: dict = field(default_factory=dict)

    @classmethod
    def scan(cls, root, log=None):
        reg = cls(root=root)
        if os.path.isdir(root):
            for name in sorted(os.listdir(root)):
                slide_dir = os.path.join(root, name)
                if not os.path.isdir(slide_dir) or name == "logs":
                    continue
                try:
                    bundle = load_bundle(slide_dir)
                    reg.slides[bundle.id] = bundle
                except BundleError as e:
                    reg.rejected[name] = str(e)
                    if log is not None:
                        log.warning("skipping %s: %s", name, e)
        return reg

"""Operator entry points.

    scalestain synth       generate a deterministic fixture slide image
    scalestain preprocess  build the original + sensitivity pyramids
    scalestain render      composite a still image from a bundle
    scalestain stats       tile/storage budget report
    scalestain serve       run the HTTP tile server
    scalestain analyze-log session-log analytics report
    scalestain curve       expected-max contrast curves as CSV

Exit codes: 0 success, 2 usage error, 1 runtime failure.
"""

from __future__ import annotations

import json
import os
import sys

import click
import numpy as np
from PIL import Image

from . import analytics, stats as statsmod
from .blend import ViewParams, render_region
from .build import BuildPolicy, build_all, tile_accounting
from .pyramid import build_average_pyramid
from .stains import DEFAULT_PROFILES, StainProfile, get_profile
from .storage import load_bundle
from .synth import SynthSpec, synth_image


def _fail(msg):
    raise click.ClickException(msg)


def _load_profile(stain, profile_path):
    if profile_path:
        return StainProfile.load(profile_path)
    return get_profile(stain)


@click.group()
def main():
    """Sensitivity-pyramid preprocessing and serving for stained slides."""


@main.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True),
              help="JSON SynthSpec document.")
@click.option("--width", type=int, default=1024, show_default=True)
@click.option("--height", type=int, default=1024, show_default=True)
@click.option("--blob", "blobs", multiple=True,
              help="x,y,size,density (repeatable).")
@click.option("--noise", help="rate,density for i.i.d. noise pixels.")
@click.option("--texture", type=int, default=0, help="Background jitter amplitude.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--saturate", is_flag=True,
              help="Overshoot full-density stamps so they quantize to 255.")
@click.option("--stain", default="hematoxylin", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def synth(spec_path, width, height, blobs, noise, texture, seed, saturate,
          stain, out_path):
    """Generate a synthetic slide image."""
    if spec_path:
        with open(spec_path) as f:
            doc = json.load(f)
        spec = SynthSpec(
            width=doc["width"], height=doc["height"],
            background=tuple(doc.get("background", (255, 255, 255))),
            blobs=[tuple(b) for b in doc.get("blobs", [])],
            noise=tuple(doc["noise"]) if doc.get("noise") else None,
            texture=doc.get("texture", 0), seed=doc.get("seed", 0),
            saturate=doc.get("saturate", False),
        )
        stain = doc.get("stain", stain)
    else:
        spec = SynthSpec(
            width=width, height=height,
            blobs=[tuple(float(v) if i == 3 else int(v)
                         for i, v in enumerate(b.split(","))) for b in blobs],
            noise=tuple(float(v) for v in noise.split(",")) if noise else None,
            texture=texture, seed=seed, saturate=saturate,
        )
    try:
        img = synth_image(spec, get_profile(stain))
    except ValueError as e:
        _fail(str(e))
    Image.fromarray(img, "RGB").save(out_path)
    click.echo(f"wrote {out_path} ({spec.width}x{spec.height})")


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--stain", default="hematoxylin", show_default=True,
              help=f"Builtin profile: {sorted(DEFAULT_PROFILES)}.")
@click.option("--profile", "profile_path", type=click.Path(exists=True),
              help="Stain profile JSON (overrides --stain).")
@click.option("--start-levels", help="Range a..b or comma list (default 1..top).")
@click.option("--no-drop-base", is_flag=True,
              help="Persist the base plane of every sensitivity pyramid.")
@click.option("--tile-size", type=int, default=256, show_default=True)
@click.option("--fade-range", type=float, default=2.0, show_default=True)
@click.option("--workers", type=int, default=os.cpu_count, help="Tile-write threads.")
@click.option("--force", is_flag=True, help="Overwrite an existing bundle.")
def preprocess(input_path, out_dir, stain, profile_path, start_levels,
               no_drop_base, tile_size, fade_range, workers, force):
    """Build a slide bundle (original + sensitivity pyramids) from an image."""
    profile = _load_profile(stain, profile_path)
    base = np.asarray(Image.open(input_path).convert("RGB"))
    pyramid = build_average_pyramid(base, tile_size)
    if start_levels:
        if ".." in start_levels:
            a, b = start_levels.split("..")
            ks = tuple(range(int(a), int(b) + 1))
        else:
            ks = tuple(int(v) for v in start_levels.split(","))
    else:
        ks = tuple(range(1, pyramid.levels))
    policy = BuildPolicy(start_levels=ks, drop_base=not no_drop_base,
                         tile_size=tile_size)
    try:
        bundle, timings = build_all(
            pyramid, profile, policy, out_dir,
            fade_range=fade_range, workers=workers, force=force,
        )
    except Exception as e:
        _fail(str(e))
    rep = timings.report()
    click.echo(f"bundle: {out_dir} ({pyramid.width}x{pyramid.height}, "
               f"{pyramid.levels} levels, start levels {list(ks)})")
    click.echo("stage breakdown:")
    for name in ("file_io", "deconvolution", "max_subsample", "other"):
        click.echo(f"  {name:14s} {rep['seconds'][name]:8.2f} s  "
                   f"{rep['percent'][name]:5.1f}%")
    click.echo(f"  {'total':14s} {rep['total_s']:8.2f} s")
    click.echo(f"throughput: {rep['mpixels_per_s']:.1f} Mpixel/s "
               f"({rep['pixels_processed'] / 1e6:.1f} Mpixel processed)")


@main.command()
@click.option("--slide", "slide_dir", required=True, type=click.Path(exists=True))
@click.option("--level", type=float, required=True)
@click.option("--blend", type=float, default=0.0, show_default=True)
@click.option("--sens", type=int, default=None, help="Start level (default: lowest).")
@click.option("--viewport", help="x,y,w,h in display-level pixels (default: full).")
@click.option("--out", "out_path", required=True, type=click.Path())
def render(slide_dir, level, blend, sens, viewport, out_path):
    """Render a parameterized still from a bundle."""
    try:
        bundle = load_bundle(slide_dir)
        if sens is None:
            sens = bundle.start_levels[0]
        if viewport:
            vp = tuple(int(v) for v in viewport.split(","))
        else:
            lw, lh, _, _ = bundle.original.level_geometry(int(level))
            vp = (0, 0, lw, lh)
        params = ViewParams(display_level=level, viewport=vp, blend=blend,
                            sensitivity=sens, fade_range=bundle.fade_range)
        img = render_region(bundle, params)
    except Exception as e:
        _fail(str(e))
    Image.fromarray(img, "RGB").save(out_path)
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--slide", "slide_dir", required=True, type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
def stats(slide_dir, as_json):
    """Tile and storage budget for a bundle."""
    try:
        bundle = load_bundle(slide_dir)
    except Exception as e:
        _fail(str(e))
    meta = bundle.meta
    policy = BuildPolicy(start_levels=tuple(meta["start_levels"]),
                         drop_base=meta["drop_base"], tile_size=meta["tile_size"])
    budget = tile_accounting(meta["width"], meta["height"], meta["tile_size"], policy)

    def dir_bytes(path):
        total = 0
        for dirpath, _, names in os.walk(path):
            total += sum(os.path.getsize(os.path.join(dirpath, n)) for n in names)
        return total

    orig_bytes = dir_bytes(os.path.join(slide_dir, "original"))
    sens_bytes = dir_bytes(os.path.join(slide_dir, "importance"))
    doc = {
        "original_tiles": budget.original_tiles,
        "sensitivity_tiles": budget.sensitivity_tiles,
        "overhead_ratio_tiles": budget.overhead_ratio,
        "per_pyramid": budget.per_pyramid,
        "original_bytes": orig_bytes,
        "sensitivity_bytes": sens_bytes,
        # content-dependent, reported but never asserted
        "overhead_ratio_bytes": sens_bytes / orig_bytes if orig_bytes else 0.0,
    }
    if as_json:
        click.echo(json.dumps(doc, indent=2))
        return
    click.echo(f"original tiles:    {budget.original_tiles}")
    click.echo(f"sensitivity tiles: {budget.sensitivity_tiles} "
               f"(ratio {budget.overhead_ratio:.3f})")
    for k, n in sorted(budget.per_pyramid.items()):
        click.echo(f"  start level {k}: {n} tiles")
    click.echo(f"original bytes:    {orig_bytes}")
    click.echo(f"sensitivity bytes: {sens_bytes} "
               f"(ratio {doc['overhead_ratio_bytes']:.3f})")


@main.command()
@click.option("--root", required=True, type=click.Path(exists=True))
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(root, port, host):
    """Serve slide bundles over HTTP."""
    from .server import serve as run

    run(root, port=port, host=host)


@main.command("analyze-log")
@click.argument("log_file", type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.option("--csv", "csv_prefix", type=click.Path(),
              help="Also write <prefix>_activity.csv and <prefix>_zoom.csv.")
def analyze_log(log_file, as_json, csv_prefix):
    """Per-second activity and zoom-level dwell analysis of a session log."""
    with open(log_file) as f:
        events, errors = analytics.parse_log(f)
    for lineno, msg in errors:
        click.echo(f"warning: line {lineno}: {msg}", err=True)
    report = analytics.analyze(events)
    if csv_prefix:
        with open(f"{csv_prefix}_activity.csv", "w") as f:
            f.write("second,activity\n")
            for i, lab in enumerate(report["activity_seconds"]):
                f.write(f"{i},{lab}\n")
        with open(f"{csv_prefix}_zoom.csv", "w") as f:
            f.write("level,seconds\n")
            for k, v in report["zoom_histogram"].items():
                f.write(f"{k},{v}\n")
    if as_json:
        click.echo(json.dumps(report, indent=2))
    else:
        click.echo(f"duration: {report['duration_s']:.1f} s")
        for lab, pct in report["activity_percentages"].items():
            click.echo(f"  {lab:17s} {pct:5.1f}%")
        click.echo("zoom histogram (level: seconds):")
        for k, v in report["zoom_histogram"].items():
            click.echo(f"  {k}: {v:.1f}")


@main.command()
@click.option("--steps", default="0,1,2,3,4", show_default=True,
              help="Comma list of subsampling step counts.")
@click.option("--points", type=int, default=101, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def curve(steps, points, out_path):
    """Expected-max contrast curves over a staining-ratio grid, as CSV."""
    ms = [int(v) for v in steps.split(",")]
    alphas = [i / (points - 1) for i in range(points)]
    rows = statsmod.contrast_curve(alphas, ms)
    statsmod.write_curve_csv(rows, out_path)
    click.echo(f"wrote {out_path} ({len(rows)} rows)")


if __name__ == "__main__":
    sys.exit(main())

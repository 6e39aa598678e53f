import hashlib
import pathlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from scalestain.build import (
    BuildPolicy,
    StageTimings,
    block_max_oracle,
    build_all,
    build_sensitivity_pyramid,
    max_downsample,
    persisted_levels,
    tile_accounting,
)
from scalestain.pyramid import build_average_pyramid
from scalestain.stains import synthesize_pixel
from scalestain.synth import SynthSpec, synth_image

planes = hnp.arrays(
    np.uint8, hnp.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=40)
)


class TestMaxDownsample:
    def test_block_max(self):
        src = np.array([[0, 51], [128, 26]], np.uint8)
        assert max_downsample(src).tolist() == [[128]]

    def test_all_zero(self):
        assert (max_downsample(np.zeros((9, 13), np.uint8)) == 0).all()

    def test_edge_blocks(self):
        src = np.zeros((3, 3), np.uint8)
        src[2, 2] = 255
        out = max_downsample(src)
        assert out.shape == (2, 2)
        assert out[1, 1] == 255
        assert out.sum() == 255

    @given(planes)
    def test_constant_idempotence_and_bounds(self, src):
        out = max_downsample(src)
        assert out.shape == (-(-src.shape[0] // 2), -(-src.shape[1] // 2))
        assert out.max() == src.max()

    @given(planes, st.data())
    @settings(max_examples=50)
    def test_monotone_in_input(self, a, data):
        b = data.draw(
            hnp.arrays(np.uint8, a.shape).map(lambda x: np.maximum(a, x))
        )
        assert (max_downsample(a) <= max_downsample(b)).all()


class TestBlockMaxOracle:
    def test_block_one_is_identity(self):
        rng = np.random.default_rng(6)
        src = rng.integers(0, 256, (13, 17), np.uint8)
        assert (block_max_oracle(src, 1) == src).all()

    def test_hand_enumerated_6x6(self):
        src = np.arange(36, dtype=np.uint8).reshape(6, 6)
        out = block_max_oracle(src, 4)
        # blocks: 4x4, 4x2, 2x4, 2x2
        assert out.tolist() == [[21, 23], [33, 35]]

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError):
            block_max_oracle(np.zeros((4, 4), np.uint8), 3)

    def test_32x32_equals_five_reductions(self):
        rng = np.random.default_rng(7)
        src = rng.integers(0, 256, (1024, 1024), np.uint8)
        plane = src
        for _ in range(5):
            plane = max_downsample(plane)
        assert (plane == block_max_oracle(src, 32)).all()

    @pytest.mark.parametrize("m", range(7))
    def test_iterated_equals_block_oracle(self, m):
        rng = np.random.default_rng(100 + m)
        src = rng.integers(0, 256, (203, 157), np.uint8)
        plane = src
        for _ in range(m):
            plane = max_downsample(plane)
        assert (plane == block_max_oracle(src, 2 ** m)).all()


class TestBuildSensitivityPyramid:
    def test_top_level_degenerate(self, small_bundle, hematoxylin):
        orig = small_bundle.original
        top = orig.levels - 1
        pyr = build_sensitivity_pyramid(orig, hematoxylin, top)
        assert list(pyr.planes) == [top]
        assert pyr.persisted == [top]

    def test_single_pixel_position_arithmetic(self, hematoxylin):
        img = np.full((512, 512, 3), 255, np.uint8)
        x, y = 310, 122
        img[y, x] = synthesize_pixel(1.2, hematoxylin)
        orig = build_average_pyramid(img, 128)
        pyr = build_sensitivity_pyramid(orig, hematoxylin, 0, drop_base=False)
        for lv, plane in pyr.planes.items():
            assert plane[y >> lv, x >> lv] == 255
            assert (plane == 255).sum() == 1

    def test_invalid_start_level(self, small_bundle, hematoxylin):
        with pytest.raises(ValueError):
            build_sensitivity_pyramid(small_bundle.original, hematoxylin, 99)

    def test_planes_chain_by_max(self, small_bundle, hematoxylin):
        pyr = build_sensitivity_pyramid(small_bundle.original, hematoxylin, 0)
        for lv in range(0, pyr.top_level):
            assert (max_downsample(pyr.planes[lv]) == pyr.planes[lv + 1]).all()


class TestPersistedLevels:
    def test_drop_base(self):
        assert persisted_levels(1, 4, True) == [2, 3, 4]
        assert persisted_levels(1, 4, False) == [1, 2, 3, 4]

    def test_top_always_kept(self):
        assert persisted_levels(4, 4, True) == [4]


class TestTileAccounting:
    def test_single_tile_slide(self):
        policy = BuildPolicy(start_levels=(), drop_base=False)
        b = tile_accounting(256, 256, 256, policy)
        assert b.original_tiles == 1
        assert b.sensitivity_tiles == 0
        assert b.overhead_ratio == 0.0

    def test_1024_policy_12_no_drop(self):
        policy = BuildPolicy(start_levels=(1, 2), drop_base=False)
        b = tile_accounting(1024, 1024, 256, policy)
        assert b.original_tiles == 21
        assert b.per_pyramid == {1: 5, 2: 1}
        assert b.overhead_ratio == pytest.approx(6 / 21)

    def test_1024_policy_12_with_drop(self):
        policy = BuildPolicy(start_levels=(1, 2), drop_base=True)
        b = tile_accounting(1024, 1024, 256, policy)
        assert b.per_pyramid == {1: 1, 2: 1}

    def test_deep_drop_base_factor(self):
        # 2^14 square: dropping base planes cuts tiles by nearly 4x
        full = BuildPolicy(start_levels=tuple(range(1, 7)), drop_base=False)
        drop = BuildPolicy(start_levels=tuple(range(1, 7)), drop_base=True)
        n_full = tile_accounting(16384, 16384, 256, full).sensitivity_tiles
        n_drop = tile_accounting(16384, 16384, 256, drop).sensitivity_tiles
        # exact enumeration: the kept top tiles push the factor to 4.0044,
        # i.e. the reduction approaches 4 from above
        assert (n_full, n_drop) == (1818, 454)
        assert round(n_full / n_drop, 1) == 4.0


def _tree_digest(root):
    h = hashlib.sha256()
    for p in sorted(pathlib.Path(root).rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


class TestBuildAll:
    def test_tile_counts_and_meta(self, tmp_path, hematoxylin):
        img = synth_image(SynthSpec(1024, 1024, texture=3, seed=1), hematoxylin)
        orig = build_average_pyramid(img, 256)
        policy = BuildPolicy(start_levels=(1, 2), drop_base=False)
        bundle, t = build_all(orig, hematoxylin, policy, tmp_path / "s")
        files = {
            k: len(list((tmp_path / "s" / "importance" / f"s{k}").rglob("*.png")))
            for k in (1, 2)
        }
        assert files == {1: 5, 2: 1}
        assert bundle.meta["drop_base"] is False

    def test_drop_base_tile_counts(self, tmp_path, hematoxylin):
        img = synth_image(SynthSpec(1024, 1024, seed=1), hematoxylin)
        orig = build_average_pyramid(img, 256)
        policy = BuildPolicy(start_levels=(1, 2), drop_base=True)
        build_all(orig, hematoxylin, policy, tmp_path / "s")
        files = {
            k: len(list((tmp_path / "s" / "importance" / f"s{k}").rglob("*.png")))
            for k in (1, 2)
        }
        # k=1 keeps only the top plane; k=2's base is the top, always kept
        assert files == {1: 1, 2: 1}

    def test_pixels_processed_accounting(self, tmp_path, hematoxylin):
        img = synth_image(SynthSpec(640, 512, seed=2), hematoxylin)
        orig = build_average_pyramid(img, 256)
        policy = BuildPolicy(start_levels=(1,), drop_base=True)
        _, t = build_all(orig, hematoxylin, policy, tmp_path / "s")
        plane_px = 0
        w, h = 640, 512
        for lv in range(orig.levels):
            lw, lh, _, _ = orig.level_geometry(lv)
            plane_px += lw * lh  # original pyramid pixels
            if lv >= 1:
                plane_px += lw * lh  # k=1 planes, base included (computed)
        assert t.pixels_processed == plane_px

    def test_worker_count_does_not_change_bytes(self, tmp_path, hematoxylin):
        img = synth_image(SynthSpec(700, 500, texture=4, seed=3), hematoxylin)
        orig = build_average_pyramid(img, 256)
        policy = BuildPolicy.default(orig.levels)
        build_all(orig, hematoxylin, policy, tmp_path / "w1", slide_id="s", workers=1)
        build_all(orig, hematoxylin, policy, tmp_path / "w4", slide_id="s", workers=4)
        assert _tree_digest(tmp_path / "w1") == _tree_digest(tmp_path / "w4")

    def test_refuses_overwrite_without_force(self, tmp_path, hematoxylin):
        from scalestain.storage import BundleError

        img = synth_image(SynthSpec(300, 300, seed=4), hematoxylin)
        orig = build_average_pyramid(img, 256)
        policy = BuildPolicy.default(orig.levels)
        build_all(orig, hematoxylin, policy, tmp_path / "s")
        with pytest.raises(BundleError):
            build_all(orig, hematoxylin, policy, tmp_path / "s")
        build_all(orig, hematoxylin, policy, tmp_path / "s", force=True)


def test_stage_timings_report_sums():
    t = StageTimings()
    t.start()
    t.add("file_io", 0.5)
    t.add("deconvolution", 0.25)
    t.stop()
    rep = t.report()
    assert rep["total_s"] >= 0
    assert set(rep["seconds"]) == {"file_io", "deconvolution", "max_subsample", "other"}

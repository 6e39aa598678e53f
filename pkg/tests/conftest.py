import numpy as np
import pytest

from scalestain.build import BuildPolicy, build_all, build_sensitivity_pyramid
from scalestain.pyramid import build_average_pyramid
from scalestain.stains import get_profile
from scalestain.storage import load_bundle, memory_bundle
from scalestain.synth import SynthSpec, synth_image


@pytest.fixture(scope="session")
def hematoxylin():
    return get_profile("hematoxylin")


@pytest.fixture(scope="session")
def small_image(hematoxylin):
    """512x384 textured fixture with two aligned blobs and sparse noise."""
    spec = SynthSpec(
        width=512, height=384, texture=5, seed=7, saturate=True,
        blobs=[(64, 64, 2, 1.0), (300, 200, 4, 0.6)],
        noise=(0.0005, 1.0),
    )
    return synth_image(spec, hematoxylin)


@pytest.fixture(scope="session")
def small_bundle_dir(tmp_path_factory, small_image, hematoxylin):
    """The small fixture preprocessed to disk with the default policy."""
    out = tmp_path_factory.mktemp("slides") / "fix-small"
    pyramid = build_average_pyramid(small_image, 256)
    policy = BuildPolicy.default(pyramid.levels)
    build_all(pyramid, hematoxylin, policy, str(out), workers=2)
    return out


@pytest.fixture(scope="session")
def small_bundle(small_bundle_dir):
    return load_bundle(str(small_bundle_dir))


@pytest.fixture(scope="session")
def dot_bundle(hematoxylin):
    """1024x1024 white slide with a single 2x2 saturated dot, in memory.

    Small tiles give enough pyramid levels to exercise deep zoom-out.
    """
    spec = SynthSpec(
        width=1024, height=1024, blobs=[(256, 384, 2, 1.0)], saturate=True
    )
    img = synth_image(spec, hematoxylin)
    pyramid = build_average_pyramid(img, 64)
    pyrs = {
        k: build_sensitivity_pyramid(pyramid, hematoxylin, k, drop_base=True)
        for k in (1, 2)
    }
    return memory_bundle(pyramid, pyrs, hematoxylin), img

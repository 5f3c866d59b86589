import os

import hypothesis
import numpy as np
import pytest

from srise.core.explainer import ExplainConfig
from srise.core.fixtures import generate_triplet
from srise.core.imaging import Image, save_png
from srise.core.masks import MaskConfig

np.seterr(all="warn")

hypothesis.settings.register_profile("default", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_pair(rng):
    """Two positive 16×16 grayscale images."""
    a = Image(rng.uniform(0.2, 1.0, size=(16, 16)))
    b = Image(rng.uniform(0.2, 1.0, size=(16, 16)))
    return a, b


@pytest.fixture
def small_explain_cfg():
    return ExplainConfig(mask_cfg=MaskConfig(num_masks=32, kernels_per_mask=2, kernel_size=5))


@pytest.fixture
def triplet_32(rng):
    return generate_triplet(rng, size=32, grid=4)


@pytest.fixture
def triplet_files(tmp_path, triplet_32):
    paths = []
    for name, image in (("probe.png", triplet_32.probe), ("mate.png", triplet_32.mate),
                        ("nonmate.png", triplet_32.nonmate)):
        paths.append(save_png(image, tmp_path / "inputs" / name))
    return paths

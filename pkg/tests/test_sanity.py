import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from srise.core.embedding import PatchMeanEmbedder, RandomizedEmbedder
from srise.core.errors import DegenerateMapError, DimensionError
from srise.core.explainer import ExplainConfig
from srise.core.fixtures import generate_interleaved_pair
from srise.core.imaging import SaliencyMap
from srise.core.masks import MaskConfig
from srise.core.sanity import map_correlation, randomization_check, rank_correlation

maps = arrays(np.float64, (4, 5), elements=st.floats(0, 1))


def pearson_oracle(x, y):
    x = x.ravel()
    y = y.ravel()
    mean_x = sum(x) / len(x)
    mean_y = sum(y) / len(y)
    cov = sum((a - mean_x) * (b - mean_y) for a, b in zip(x, y))
    var_x = sum((a - mean_x) ** 2 for a in x)
    var_y = sum((b - mean_y) ** 2 for b in y)
    return cov / np.sqrt(var_x * var_y)


class TestMapCorrelation:
    def test_self(self, rng):
        saliency = SaliencyMap(rng.random((6, 6)))
        assert map_correlation(saliency, saliency) == pytest.approx(1.0)

    def test_negated(self, rng):
        values = rng.random((6, 6))
        assert map_correlation(SaliencyMap(values), SaliencyMap(1.0 - values)) == pytest.approx(-1.0)

    def test_matches_oracle(self, rng):
        x = rng.random((10, 12))
        y = 0.5 * x + rng.random((10, 12))
        assert map_correlation(SaliencyMap(x), SaliencyMap(y)) == pytest.approx(pearson_oracle(x, y), abs=1e-9)

    def test_constant_map(self, rng):
        with pytest.raises(DegenerateMapError):
            map_correlation(SaliencyMap(np.ones((3, 3))), SaliencyMap(rng.random((3, 3))))

    def test_shape_mismatch(self, rng):
        with pytest.raises(DimensionError):
            map_correlation(SaliencyMap(rng.random((3, 3))), SaliencyMap(rng.random((3, 4))))

    def test_rank_correlation_monotone(self, rng):
        values = rng.random((5, 5))
        assert rank_correlation(SaliencyMap(values), SaliencyMap(values ** 3)) == pytest.approx(1.0)

    @given(maps, maps, st.floats(0.1, 10), st.floats(-5, 5))
    def test_symmetric_and_affine_invariant(self, x, y, scale, shift):
        assume(np.ptp(x) > 1e-3 and np.ptp(y) > 1e-3)
        forward = map_correlation(SaliencyMap(x), SaliencyMap(y))
        assert forward == pytest.approx(map_correlation(SaliencyMap(y), SaliencyMap(x)), abs=1e-12)
        moved = map_correlation(SaliencyMap(scale * x + shift), SaliencyMap(scale * y + shift))
        assert moved == pytest.approx(forward, abs=1e-9)


class TestRandomizationCheck:
    def test_self_comparison_fails(self, small_pair, small_explain_cfg):
        a, b = small_pair
        model = RandomizedEmbedder(a.shape, dim=32, seed=17)
        report = randomization_check(a, b, model, small_explain_cfg, 0.3, np.random.default_rng(0),
                                     randomized=model)
        assert report.r_randomized == pytest.approx(1.0)
        assert not report.passed

    def test_structured_pair(self):
        a, b = generate_interleaved_pair(np.random.default_rng(6), size=64)
        cfg = ExplainConfig(mask_cfg=MaskConfig(num_masks=2000, kernel_size=7))
        report = randomization_check(a, b, PatchMeanEmbedder(4), cfg, 0.3, np.random.default_rng(1))

        assert report.r_rerun >= 0.5
        assert report.passed
        assert report.randomized_name == "randomized_128"
        assert len(report.seeds) == 3

    def test_deterministic_given_seed(self, small_pair, small_explain_cfg):
        a, b = small_pair
        first = randomization_check(a, b, PatchMeanEmbedder(4), small_explain_cfg, 0.3, np.random.default_rng(5))
        second = randomization_check(a, b, PatchMeanEmbedder(4), small_explain_cfg, 0.3,
                                     np.random.default_rng(5), workers=3)
        assert first.seeds == second.seeds
        assert first.r_rerun == second.r_rerun
        assert first.r_randomized == second.r_randomized

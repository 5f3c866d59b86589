import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from srise.core.embedding import (EmbedderConfig, PatchMeanEmbedder,
                                  RandomizedEmbedder,
                                  RandomProjectionEmbedder, build_embedder,
                                  cosine_similarity, embed)
from srise.core.errors import (ConfigError, DegenerateEmbeddingError,
                               DimensionError, InputError)
from srise.core.imaging import Image

vectors = arrays(np.float64, 6, elements=st.floats(-10, 10, allow_nan=False, allow_infinity=False))


class TestPatchMean:
    def test_uniform_image(self):
        vector = embed(PatchMeanEmbedder(2), Image(np.full((4, 4), 0.5)))
        np.testing.assert_allclose(vector, [0.5, 0.5, 0.5, 0.5])

    def test_left_half_bright(self):
        data = np.zeros((4, 4))
        data[:, :2] = 1.0
        np.testing.assert_allclose(embed(PatchMeanEmbedder(2), Image(data)), [1.0, 0.0, 1.0, 0.0])

    def test_matches_summation_oracle(self, rng):
        data = rng.random((112, 112, 3))
        vector = embed(PatchMeanEmbedder(4), Image(data))

        expected = []
        for gi in range(4):
            for gj in range(4):
                for c in range(3):
                    total = 0.0
                    for i in range(gi * 28, (gi + 1) * 28):
                        for j in range(gj * 28, (gj + 1) * 28):
                            total += data[i, j, c]
                    expected.append(total / (28 * 28))
        np.testing.assert_allclose(vector, expected, atol=1e-6)

    def test_indivisible_size(self):
        with pytest.raises(DimensionError):
            embed(PatchMeanEmbedder(4), Image(np.zeros((10, 12))))


class TestRandomProjection:
    def test_output_in_tanh_range(self, rng):
        embedder = RandomProjectionEmbedder((8, 8, 1), dim=16, seed=3)
        vector = embed(embedder, Image(rng.random((8, 8))))
        assert vector.shape == (16,)
        assert np.all(np.abs(vector) <= 1.0)

    def test_same_seed_same_projection(self):
        first = RandomProjectionEmbedder((8, 8, 1), dim=16, seed=9)
        second = RandomProjectionEmbedder((8, 8, 1), dim=16, seed=9)
        assert np.array_equal(first.projection, second.projection)

    def test_wrong_shape(self):
        embedder = RandomProjectionEmbedder((8, 8, 1), dim=4)
        with pytest.raises(DimensionError):
            embed(embedder, Image(np.zeros((8, 8, 3))))

    def test_randomized_draws_fresh_seeds(self):
        first = RandomizedEmbedder((8, 8, 1), dim=8)
        second = RandomizedEmbedder((8, 8, 1), dim=8)
        assert first.seed != second.seed
        replay = RandomizedEmbedder((8, 8, 1), dim=8, seed=first.seed)
        assert np.array_equal(first.projection, replay.projection)

    @pytest.mark.parametrize("embedder", [
        PatchMeanEmbedder(4),
        RandomProjectionEmbedder((16, 16, 1), dim=32, seed=1),
        RandomizedEmbedder((16, 16, 1), dim=32),
    ], ids=lambda e: e.name)
    def test_repeat_calls_identical(self, embedder, rng):
        image = Image(rng.random((16, 16)))
        assert np.array_equal(embed(embedder, image), embed(embedder, image))


class TestCosineSimilarity:
    @pytest.mark.parametrize("a, b, expected", [
        ([1, 0], [1, 0], 1.0),
        ([1, 0], [0, 1], 0.0),
        ([1, 0], [-1, 0], -1.0),
        ([1, 1], [1, 0], 1 / math.sqrt(2)),
    ])
    def test_known_values(self, a, b, expected):
        assert cosine_similarity(np.array(a, float), np.array(b, float)) == pytest.approx(expected, abs=1e-12)

    def test_zero_vector(self):
        with pytest.raises(DegenerateEmbeddingError):
            cosine_similarity(np.zeros(2), np.array([1.0, 0.0]))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            cosine_similarity(np.ones(2), np.ones(3))

    @given(vectors, vectors)
    def test_symmetric_and_bounded(self, a, b):
        assume(np.linalg.norm(a) > 1e-3 and np.linalg.norm(b) > 1e-3)
        forward = cosine_similarity(a, b)
        assert forward == cosine_similarity(b, a)
        assert -1.0 <= forward <= 1.0

    @given(vectors, vectors, st.floats(0.01, 100.0))
    def test_scale_invariant(self, a, b, alpha):
        assume(np.linalg.norm(a) > 1e-3 and np.linalg.norm(b) > 1e-3)
        assert cosine_similarity(alpha * a, b) == pytest.approx(cosine_similarity(a, b), abs=1e-9)


class TestBuildEmbedder:
    def test_kinds(self):
        shape = (16, 16, 1)
        assert isinstance(build_embedder(EmbedderConfig(kind="patch_mean", grid=2), shape), PatchMeanEmbedder)
        projection = build_embedder(EmbedderConfig(kind="random_projection", dim=8, seed=5), shape)
        assert type(projection) is RandomProjectionEmbedder and projection.seed == 5
        assert isinstance(build_embedder(EmbedderConfig(kind="randomized"), shape), RandomizedEmbedder)

    def test_randomized_follows_configured_seed(self):
        cfg = EmbedderConfig(kind="randomized", dim=8, seed=3)
        first = build_embedder(cfg, (16, 16, 1))
        second = build_embedder(cfg, (16, 16, 1))
        assert first.seed == second.seed == 3
        assert np.array_equal(first.projection, second.projection)

    def test_external_needs_model(self):
        with pytest.raises(ConfigError):
            build_embedder(EmbedderConfig(kind="external"), (8, 8, 1))

    def test_external_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            build_embedder(EmbedderConfig(kind="external", model=tmp_path / "absent.onnx"), (8, 8, 1))

    @pytest.mark.parametrize("field", ["input_mean", "input_std"])
    def test_external_rejects_per_channel_stats_for_gray_input(self, tmp_path, field):
        model = tmp_path / "model.onnx"
        model.write_bytes(b"never loaded")
        cfg = EmbedderConfig(kind="external", model=model, **{field: [0.5, 0.5, 0.5]})
        with pytest.raises(ConfigError, match=field):
            build_embedder(cfg, (8, 8, 1))


def test_external_model_embeds_flattened_pixels(tmp_path, rng):
    onnx = pytest.importorskip("onnx")
    pytest.importorskip("onnxruntime")
    from onnx import TensorProto, helper

    graph = helper.make_graph(
        [helper.make_node("Flatten", ["pixels"], ["embedding"], axis=1)],
        "flatten",
        [helper.make_tensor_value_info("pixels", TensorProto.FLOAT, [1, 1, 4, 4])],
        [helper.make_tensor_value_info("embedding", TensorProto.FLOAT, [1, 16])],
    )
    model = helper.make_model(graph, opset_imports=[helper.make_opsetid("", 13)])
    model.ir_version = 8
    path = tmp_path / "flatten.onnx"
    onnx.save(model, str(path))

    embedder = build_embedder(EmbedderConfig(kind="external", model=path, input_mean=[0.5], input_std=[0.5]),
                              (4, 4, 1))
    data = rng.random((4, 4))
    vector = embed(embedder, Image(data))
    np.testing.assert_allclose(vector, ((data - 0.5) / 0.5).ravel(), atol=1e-6)

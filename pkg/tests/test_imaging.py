import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from matplotlib import colormaps
from PIL import Image as PILImage

from srise.core.errors import ConfigError, DecodeError, DimensionError, InputError
from srise.core.imaging import (COLORMAP, Image, SaliencyMap, colorize,
                                export_saliency_binary, export_saliency_csv,
                                grayscale, load_image, mean_fill,
                                read_saliency_binary, render_overlay,
                                resize_bilinear, save_png)

unit_floats = st.floats(min_value=0.0, max_value=1.0, allow_nan=False, allow_infinity=False)


def write_png(path, pixels):
    PILImage.fromarray(pixels).save(path, format="PNG")
    return path


def write_palette_png(path, palette):
    raw = PILImage.new("P", (4, 4))
    raw.putpalette(palette)
    raw.putdata([0, 1, 2, 0] * 4)
    raw.save(path, format="PNG")
    return path


def bilinear_oracle(src, height, width):
    """Pixel-by-pixel bilinear resize written out by hand."""
    src_h, src_w = src.shape
    out = np.zeros((height, width))
    for i in range(height):
        y = min(max((i + 0.5) * src_h / height - 0.5, 0.0), src_h - 1)
        y0 = int(math.floor(y))
        y1 = min(y0 + 1, src_h - 1)
        wy = y - y0
        for j in range(width):
            x = min(max((j + 0.5) * src_w / width - 0.5, 0.0), src_w - 1)
            x0 = int(math.floor(x))
            x1 = min(x0 + 1, src_w - 1)
            wx = x - x0
            top = (1 - wx) * src[y0, x0] + wx * src[y0, x1]
            bottom = (1 - wx) * src[y1, x0] + wx * src[y1, x1]
            out[i, j] = (1 - wy) * top + wy * bottom
    return out


class TestLoadImage:
    def test_same_size_is_exact(self, tmp_path, rng):
        pixels = rng.integers(0, 256, size=(112, 112, 3), dtype=np.uint8)
        path = write_png(tmp_path / "face.png", pixels)

        image = load_image(path, (112, 112))

        assert image.shape == (112, 112, 3)
        np.testing.assert_allclose(image.data, pixels / 255.0, atol=1e-12)

    def test_two_by_two_to_one(self, tmp_path):
        path = write_png(tmp_path / "checker.png", np.array([[0, 255], [255, 0]], dtype=np.uint8))

        image = load_image(path, (1, 1))

        assert image.shape == (1, 1, 1)
        assert image.data[0, 0, 0] == pytest.approx(0.5, abs=1e-9)

    def test_downsample_matches_oracle(self, tmp_path, rng):
        pixels = rng.integers(0, 256, size=(224, 224), dtype=np.uint8)
        path = write_png(tmp_path / "big.png", pixels)

        image = load_image(path, (112, 112))

        expected = bilinear_oracle(pixels / 255.0, 112, 112)
        np.testing.assert_allclose(image.data[:, :, 0], expected, atol=1e-6)

    def test_upsample_matches_oracle(self, rng):
        src = rng.random((5, 7))
        out = resize_bilinear(src[:, :, np.newaxis], (11, 13))
        np.testing.assert_allclose(out[:, :, 0], bilinear_oracle(src, 11, 13), atol=1e-9)

    def test_grayscale_stays_single_channel(self, tmp_path):
        path = write_png(tmp_path / "gray.png", np.full((8, 8), 128, dtype=np.uint8))
        assert load_image(path, (8, 8)).channels == 1

    def test_gray_palette_stays_single_channel(self, tmp_path):
        path = write_palette_png(tmp_path / "gray_palette.png", [0, 0, 0, 128, 128, 128, 255, 255, 255])
        image = load_image(path, (4, 4))
        assert image.channels == 1
        np.testing.assert_allclose(image.data[0, :, 0], [0.0, 128 / 255, 1.0, 0.0], atol=1e-12)

    def test_colour_palette_loads_as_rgb(self, tmp_path):
        path = write_palette_png(tmp_path / "colour_palette.png", [0, 0, 0, 255, 0, 0, 255, 255, 255])
        image = load_image(path, (4, 4))
        assert image.channels == 3
        np.testing.assert_allclose(image.data[0, 1], [1.0, 0.0, 0.0])

    def test_deterministic(self, tmp_path, rng):
        path = write_png(tmp_path / "face.png", rng.integers(0, 256, size=(40, 30, 3), dtype=np.uint8))
        first = load_image(path, (16, 16))
        second = load_image(path, (16, 16))
        assert np.array_equal(first.data, second.data)

    def test_zero_target_is_config_error(self, tmp_path):
        path = write_png(tmp_path / "face.png", np.zeros((4, 4), dtype=np.uint8))
        with pytest.raises(ConfigError):
            load_image(path, (0, 112))

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_image(tmp_path / "absent.png", (8, 8))

    def test_undecodable_file(self, tmp_path):
        path = tmp_path / "broken.png"
        path.write_bytes(b"definitely not an image")
        with pytest.raises(DecodeError):
            load_image(path, (8, 8))


class TestImageContainers:
    def test_values_outside_unit_range_rejected(self):
        with pytest.raises(InputError):
            Image(np.full((2, 2), 1.5))

    def test_bad_channel_count_rejected(self):
        with pytest.raises(DimensionError):
            Image(np.zeros((2, 2, 2)))

    def test_image_is_read_only(self):
        image = Image(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            image.data[0, 0, 0] = 1.0

    def test_saliency_must_be_2d(self):
        with pytest.raises(DimensionError):
            SaliencyMap(np.zeros((2, 2, 1)))


class TestMeanFill:
    def test_constant_image_unchanged(self):
        image = Image(np.full((4, 4, 3), 0.25))
        np.testing.assert_allclose(mean_fill(image).data, image.data)

    def test_half_bright(self):
        image = Image(np.array([[0.0, 0.0], [1.0, 1.0]]))
        np.testing.assert_allclose(mean_fill(image).data, 0.5)

    def test_per_channel_means(self, rng):
        data = rng.random((112, 112, 3))
        filled = mean_fill(Image(data))
        for c in range(3):
            total = 0.0
            for value in data[:, :, c].ravel():
                total += value
            np.testing.assert_allclose(filled.data[:, :, c], total / data[:, :, c].size, atol=1e-6)

    @given(arrays(np.float64, (6, 5, 3), elements=unit_floats))
    def test_idempotent(self, data):
        once = mean_fill(Image(data))
        np.testing.assert_allclose(mean_fill(once).data, once.data, atol=1e-12)


class TestOverlay:
    def test_colormap_endpoints(self):
        assert COLORMAP.shape == (256, 3)
        np.testing.assert_allclose(COLORMAP[0], (0.0, 0.0, 0.5))
        np.testing.assert_allclose(COLORMAP[255], (0.5, 0.0, 0.0))

    def test_colormap_is_matplotlib_jet(self):
        expected = colormaps["jet"](np.arange(256))[:, :3]
        np.testing.assert_array_equal(COLORMAP, expected)
        assert not COLORMAP.flags.writeable

    def test_alpha_zero_is_grayscale(self, rng):
        image = Image(rng.random((8, 8, 3)))
        overlay = render_overlay(image, SaliencyMap(rng.random((8, 8))), alpha=0.0)
        for c in range(3):
            np.testing.assert_allclose(overlay.data[:, :, c], grayscale(image), atol=1e-12)

    def test_alpha_one_zero_map_is_colormap_start(self, rng):
        image = Image(rng.random((8, 8)))
        overlay = render_overlay(image, SaliencyMap(np.zeros((8, 8))), alpha=1.0)
        np.testing.assert_allclose(overlay.data, np.broadcast_to(COLORMAP[0], (8, 8, 3)))

    def test_half_alpha_blend(self, rng):
        data = rng.random((6, 6, 3))
        values = rng.random((6, 6))
        overlay = render_overlay(Image(data), SaliencyMap(values), alpha=0.5)
        for i in range(6):
            for j in range(6):
                gray = 0.299 * data[i, j, 0] + 0.587 * data[i, j, 1] + 0.114 * data[i, j, 2]
                color = COLORMAP[int(np.rint(values[i, j] * 255))]
                np.testing.assert_allclose(overlay.data[i, j], 0.5 * gray + 0.5 * color, atol=1e-6)

    @given(arrays(np.float64, (5, 4), elements=unit_floats),
           arrays(np.float64, (5, 4), elements=unit_floats),
           unit_floats)
    def test_overlay_in_unit_range(self, pixels, values, alpha):
        overlay = render_overlay(Image(pixels), SaliencyMap(values), alpha)
        assert overlay.shape == (5, 4, 3)
        assert overlay.data.min() >= 0.0 and overlay.data.max() <= 1.0

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            render_overlay(Image(np.zeros((4, 4))), SaliencyMap(np.zeros((4, 5))))

    def test_colorize_shape(self):
        assert colorize(SaliencyMap(np.zeros((3, 2)))).shape == (3, 2, 3)


class TestExport:
    def test_csv_rows_and_values(self, tmp_path, rng):
        values = rng.random((4, 3))
        path = export_saliency_csv(SaliencyMap(values), tmp_path / "map.csv")

        lines = path.read_text(encoding="utf-8").strip().splitlines()
        assert len(lines) == 4
        parsed = np.array([[float(v) for v in line.split(",")] for line in lines])
        np.testing.assert_array_equal(parsed, values)

    def test_binary_layout(self, tmp_path):
        values = np.arange(6, dtype=np.float64).reshape(2, 3) / 10.0
        path = export_saliency_binary(SaliencyMap(values), tmp_path / "map.bin")

        raw = path.read_bytes()
        assert len(raw) == 8 + 6 * 4
        assert tuple(np.frombuffer(raw[:8], dtype="<u4")) == (2, 3)
        np.testing.assert_allclose(read_saliency_binary(path).values, values, atol=1e-7)

    def test_truncated_binary(self, tmp_path):
        path = tmp_path / "short.bin"
        path.write_bytes(np.array([4, 4], dtype="<u4").tobytes() + b"\x00" * 8)
        with pytest.raises(DecodeError):
            read_saliency_binary(path)

    def test_save_png_reloads(self, tmp_path):
        image = Image(np.full((4, 4, 3), 0.2))
        path = save_png(image, tmp_path / "nested" / "img.png")
        np.testing.assert_allclose(load_image(path, (4, 4)).data, np.rint(0.2 * 255) / 255.0)

# srise/core/imaging.py
"""Image and saliency-map containers, file I/O, resizing and overlay rendering.

Images are float64 arrays of shape (height, width, channels) with values in
[0, 1]; single-channel images keep ``channels == 1``. Saliency maps are
float64 arrays of shape (height, width).

Resizing samples at pixel centres: output pixel ``d`` reads the source at
``(d + 0.5) * (src / dst) - 0.5`` with bilinear interpolation, clamped at the
borders. There is no anti-aliasing prefilter.

Overlay colormap: the 256-entry lookup table of matplotlib's ``jet``
colormap (alpha dropped). A map value ``v`` selects entry ``rint(255 * v)``.

Palette PNGs whose palette is gray load as one channel; any other palette
loads as RGB.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np
from matplotlib import colormaps
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure
from PIL import Image as PILImage
from PIL import UnidentifiedImageError
from scipy import ndimage

from .errors import ConfigError, DecodeError, DimensionError, InputError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _build_colormap(name: str = "jet") -> np.ndarray:
    table = np.array(colormaps[name](np.arange(256))[:, :3], dtype=np.float64)
    table.setflags(write=False)
    return table


COLORMAP = _build_colormap()

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class Image:
    """Immutable H×W×C image with values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, np.newaxis]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise DimensionError(f"Image must be H×W×C with C in (1, 3), got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise DimensionError(f"Image must be at least 1×1, got {data.shape[:2]}")
        if not np.all(np.isfinite(data)) or data.min() < 0.0 or data.max() > 1.0:
            raise InputError("Image values must be finite and within [0, 1]")
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True)
class SaliencyMap:
    """Immutable H×W per-pixel importance grid."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DimensionError(f"SaliencyMap must be 2-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InputError("SaliencyMap values must be finite")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape


def resize_bilinear(data: np.ndarray, target: Tuple[int, int]) -> np.ndarray:
    """Bilinear resize of an H×W×C array with pixel-centre sampling."""
    height, width = int(target[0]), int(target[1])
    if height < 1 or width < 1:
        raise ConfigError(f"Target size must be positive, got {target}")
    src_h, src_w = data.shape[:2]
    if (src_h, src_w) == (height, width):
        return data.astype(np.float64, copy=True)

    rows = (np.arange(height) + 0.5) * (src_h / height) - 0.5
    cols = (np.arange(width) + 0.5) * (src_w / width) - 0.5
    grid_r, grid_c = np.meshgrid(rows, cols, indexing="ij")
    coords = np.stack([grid_r, grid_c])

    out = np.empty((height, width, data.shape[2]), dtype=np.float64)
    for channel in range(data.shape[2]):
        out[:, :, channel] = ndimage.map_coordinates(
            data[:, :, channel].astype(np.float64), coords, order=1, mode="nearest"
        )
    return out


def _is_gray_palette(raw: PILImage.Image) -> bool:
    if raw.mode != "P":
        return False
    palette = raw.getpalette()
    if not palette:
        return False
    entries = np.asarray(palette).reshape(-1, 3)
    return bool(np.all(entries == entries[:, :1]))


def load_image(path: PathLike, target: Tuple[int, int]) -> Image:
    """Load an 8-bit PNG/JPEG, scale to [0, 1] and resize to ``target``."""
    if int(target[0]) < 1 or int(target[1]) < 1:
        raise ConfigError(f"Target size must be positive, got {target}")
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Image not found: {path}")

    try:
        with PILImage.open(path) as raw:
            if raw.mode in ("L", "LA", "I;16", "1") or _is_gray_palette(raw):
                pixels = np.asarray(raw.convert("L"), dtype=np.float64)[:, :, np.newaxis]
            else:
                pixels = np.asarray(raw.convert("RGB"), dtype=np.float64)
    except (UnidentifiedImageError, OSError) as e:
        raise DecodeError(f"Cannot decode image {path}: {e}") from e

    data = resize_bilinear(pixels / 255.0, target)
    logger.debug(f"Loaded {path} {pixels.shape} -> {data.shape}")
    return Image(np.clip(data, 0.0, 1.0))


def save_png(image: Image, path: PathLike) -> Path:
    """Write an image as 8-bit PNG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pixels = np.rint(image.data * 255.0).astype(np.uint8)
    if pixels.shape[2] == 1:
        PILImage.fromarray(pixels[:, :, 0]).save(path, format="PNG")
    else:
        PILImage.fromarray(pixels).save(path, format="PNG")
    return path


def mean_fill(image: Image) -> Image:
    """Constant image whose every pixel holds the per-channel mean."""
    means = image.data.mean(axis=(0, 1))
    return Image(np.broadcast_to(means, image.shape))


def grayscale(image: Image) -> np.ndarray:
    """Luma of an image as an H×W array."""
    if image.channels == 1:
        return image.data[:, :, 0]
    return image.data @ LUMA_WEIGHTS


def colorize(saliency: SaliencyMap) -> np.ndarray:
    """Look a [0, 1] map up in the colormap; returns H×W×3."""
    index = np.clip(np.rint(saliency.values * 255.0), 0, 255).astype(np.intp)
    return COLORMAP[index]


def render_overlay(image: Image, saliency: SaliencyMap, alpha: float = 0.5) -> Image:
    """Blend the grayscale image with the colorized map: (1 - alpha)·gray + alpha·color."""
    if saliency.shape != image.shape[:2]:
        raise DimensionError(f"Map shape {saliency.shape} does not match image {image.shape[:2]}")
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"Overlay alpha must be in [0, 1], got {alpha}")
    gray = grayscale(image)[:, :, np.newaxis]
    blended = (1.0 - alpha) * gray + alpha * colorize(saliency)
    return Image(np.clip(blended, 0.0, 1.0))


def export_saliency_csv(saliency: SaliencyMap, path: PathLike) -> Path:
    """One CSV row per image row, '.'-decimal floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, saliency.values, fmt="%.17g", delimiter=",", encoding="utf-8")
    return path


def export_saliency_binary(saliency: SaliencyMap, path: PathLike) -> Path:
    """Little-endian uint32 height, uint32 width, then float32 values row-major."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = np.array(saliency.shape, dtype="<u4").tobytes()
    body = saliency.values.astype("<f4").tobytes(order="C")
    path.write_bytes(header + body)
    return path


def read_saliency_binary(path: PathLike) -> SaliencyMap:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise DecodeError(f"Saliency file too short: {path}")
    height, width = np.frombuffer(raw[:8], dtype="<u4")
    values = np.frombuffer(raw[8:], dtype="<f4")
    if values.size != int(height) * int(width):
        raise DecodeError(f"Saliency file {path} holds {values.size} values, expected {height}×{width}")
    return SaliencyMap(values.reshape(int(height), int(width)).astype(np.float64))


def save_panel_strip(panels: Sequence[Tuple[str, Union[Image, SaliencyMap]]], path: PathLike,
                     panel_inches: float = 3.0, dpi: int = 100) -> Path:
    """Titled panels side by side: images in their own colours, maps through ``jet``."""
    if not panels:
        raise InputError("A panel strip needs at least one panel")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    figure = Figure(figsize=(panel_inches * len(panels), panel_inches), dpi=dpi)
    FigureCanvasAgg(figure)
    for index, (title, panel) in enumerate(panels, start=1):
        axis = figure.add_subplot(1, len(panels), index)
        if isinstance(panel, SaliencyMap):
            axis.imshow(panel.values, cmap="jet", vmin=0.0, vmax=1.0)
        elif panel.channels == 1:
            axis.imshow(panel.data[:, :, 0], cmap="gray", vmin=0.0, vmax=1.0)
        else:
            axis.imshow(panel.data)
        axis.set_title(title)
        axis.axis("off")
    figure.tight_layout()
    figure.savefig(path, format="png", metadata={"Software": None})
    return path

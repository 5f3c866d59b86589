# srise/core/masks.py
"""Random Gaussian-bump perturbation masks.

Each mask starts as an all-zero grid onto which ``kernels_per_mask`` Gaussian
kernels of a fixed odd size are placed. Kernel centres are drawn uniformly
over the positions where the whole kernel fits inside the frame, and the
kernels are merged by elementwise maximum (or summed then clipped when
``merge="sum"``).
"""
import logging
from pathlib import Path
from typing import Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator
from tqdm import tqdm

from .errors import ConfigError
from .imaging import Image, save_png

logger = logging.getLogger(__name__)


class MaskConfig(BaseModel):
    """Parameters of the mask generator."""

    num_masks: int = Field(1000, ge=1, description="Number of masks N.")
    kernels_per_mask: int = Field(3, ge=1, description="Gaussian kernels per mask K.")
    kernel_size: int = Field(29, ge=1, description="Odd kernel side length s in pixels.")
    sigma: Optional[float] = Field(None, gt=0, description="Kernel standard deviation; s/4 when unset.")
    amplitude: float = Field(1.0, gt=0, le=1, description="Kernel peak value.")
    merge: Literal["max", "sum"] = Field("max", description="How kernels combine inside one mask.")
    seed: int = Field(0, ge=0, lt=2**64, description="Seed of the mask stream.")

    model_config = {"frozen": True}

    @model_validator(mode="before")
    @classmethod
    def _default_sigma(cls, data):
        if isinstance(data, dict) and data.get("sigma") is None:
            data = dict(data)
            data["sigma"] = data.get("kernel_size", 29) / 4.0
        return data

    @model_validator(mode="after")
    def _check_kernel(self):
        if self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd, got {self.kernel_size}")
        return self

    @classmethod
    def build(cls, **kwargs) -> "MaskConfig":
        """Construct, turning validation failures into ConfigError."""
        try:
            return cls(**kwargs)
        except ValidationError as e:
            raise ConfigError(f"Invalid mask configuration: {e}") from e

    def check_frame(self, height: int, width: int):
        if self.kernel_size > min(height, width):
            raise ConfigError(
                f"kernel_size {self.kernel_size} exceeds image size {height}×{width}"
            )


def gaussian_kernel(size: int, sigma: float, amplitude: float = 1.0) -> np.ndarray:
    """s×s patch with value amplitude·exp(-(dx² + dy²) / (2σ²)) around the centre."""
    if size < 1 or size % 2 == 0:
        raise ConfigError(f"Kernel size must be a positive odd number, got {size}")
    if sigma <= 0:
        raise ConfigError(f"Kernel sigma must be positive, got {sigma}")
    if not 0 < amplitude <= 1:
        raise ConfigError(f"Kernel amplitude must be in (0, 1], got {amplitude}")

    offsets = np.arange(size) - size // 2
    dy, dx = np.meshgrid(offsets, offsets, indexing="ij")
    return amplitude * np.exp(-(dx ** 2 + dy ** 2) / (2.0 * sigma ** 2))


def sample_centers(height: int, width: int, cfg: MaskConfig,
                   rng: np.random.Generator) -> np.ndarray:
    """K kernel centres (row, col) with the kernel fully inside the frame."""
    cfg.check_frame(height, width)
    radius = cfg.kernel_size // 2
    rows = rng.integers(radius, height - radius, size=cfg.kernels_per_mask)
    cols = rng.integers(radius, width - radius, size=cfg.kernels_per_mask)
    return np.stack([rows, cols], axis=1)


def place_kernels(height: int, width: int, kernel: np.ndarray,
                  centers: Sequence[Tuple[int, int]], merge: str = "max") -> np.ndarray:
    """Merge copies of ``kernel`` centred at ``centers`` onto an all-zero grid."""
    mask = np.zeros((height, width), dtype=np.float64)
    radius = kernel.shape[0] // 2
    for row, col in centers:
        window = (slice(row - radius, row + radius + 1), slice(col - radius, col + radius + 1))
        if merge == "max":
            np.maximum(mask[window], kernel, out=mask[window])
        else:
            mask[window] += kernel
    if merge == "sum":
        np.clip(mask, 0.0, 1.0, out=mask)
    return mask


def generate_mask(height: int, width: int, cfg: MaskConfig, rng: np.random.Generator,
                  kernel: Optional[np.ndarray] = None) -> np.ndarray:
    if kernel is None:
        kernel = gaussian_kernel(cfg.kernel_size, cfg.sigma, cfg.amplitude)
    centers = sample_centers(height, width, cfg, rng)
    return place_kernels(height, width, kernel, centers, cfg.merge)


def generate_mask_batch(height: int, width: int, cfg: MaskConfig,
                        rng: Optional[np.random.Generator] = None,
                        progress: bool = False) -> np.ndarray:
    """N masks drawn sequentially from one generator, shape (N, H, W).

    Without ``rng`` the stream is seeded from ``cfg.seed``.
    """
    cfg.check_frame(height, width)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    kernel = gaussian_kernel(cfg.kernel_size, cfg.sigma, cfg.amplitude)
    masks = np.empty((cfg.num_masks, height, width), dtype=np.float64)
    for i in tqdm(range(cfg.num_masks), desc="Generating masks", disable=not progress):
        masks[i] = generate_mask(height, width, cfg, rng, kernel=kernel)
    logger.debug(f"Generated {cfg.num_masks} masks of {height}×{width} "
                 f"(K={cfg.kernels_per_mask}, s={cfg.kernel_size}, sigma={cfg.sigma:.3f})")
    return masks


def dump_masks(masks: np.ndarray, out_dir: Path, limit: int) -> list:
    """Write the first ``limit`` masks as grayscale PNGs for inspection."""
    written = []
    for i in range(min(limit, len(masks))):
        written.append(save_png(Image(masks[i]), Path(out_dir) / f"mask_{i:04d}.png"))
    logger.info(f"Dumped {len(written)} masks to {out_dir}")
    return written

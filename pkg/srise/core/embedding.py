# srise/core/embedding.py
"""The black-box model boundary: embedders and cosine similarity."""
import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from .errors import (ConfigError, DegenerateEmbeddingError, DimensionError,
                     InferenceError, InputError)
from .imaging import Image

logger = logging.getLogger(__name__)

NORM_EPSILON = 1e-12


class Embedder(ABC):
    """Maps an Image to a D-dimensional feature vector.

    ``input_shape`` is (height, width, channels); any entry may be None to
    accept every value. ``concurrent_safe`` tells the explainer whether
    ``embed`` may be called from several threads at once.
    """

    name: str = "embedder"
    concurrent_safe: bool = True

    def __init__(self, input_shape: Tuple[Optional[int], Optional[int], Optional[int]] = (None, None, None)):
        self.input_shape = tuple(input_shape)

    def check_input(self, image: Image):
        for expected, actual, label in zip(self.input_shape, image.shape, ("height", "width", "channels")):
            if expected is not None and expected != actual:
                raise DimensionError(
                    f"{self.name} expects {label}={expected}, got image of shape {image.shape}"
                )

    def embed(self, image: Image) -> np.ndarray:
        self.check_input(image)
        vector = np.asarray(self.forward(image.data), dtype=np.float64).ravel()
        if vector.size < 1 or not np.all(np.isfinite(vector)):
            raise InferenceError(f"{self.name} produced an invalid embedding")
        return vector

    @abstractmethod
    def forward(self, data: np.ndarray) -> np.ndarray:
        """Raw H×W×C array in, feature vector out."""

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r}, input_shape={self.input_shape})"


class PatchMeanEmbedder(Embedder):
    """Per-patch, per-channel mean intensity over a G×G grid of equal patches."""

    def __init__(self, grid: int = 4):
        super().__init__()
        if grid < 1:
            raise ConfigError(f"Patch grid must be positive, got {grid}")
        self.grid = grid
        self.name = f"patch_mean_{grid}"

    def check_input(self, image: Image):
        if image.height % self.grid or image.width % self.grid:
            raise DimensionError(
                f"{self.name} needs dimensions divisible by {self.grid}, got {image.height}×{image.width}"
            )

    def forward(self, data: np.ndarray) -> np.ndarray:
        height, width, channels = data.shape
        g = self.grid
        patches = data.reshape(g, height // g, g, width // g, channels)
        return patches.mean(axis=(1, 3)).ravel()


class RandomProjectionEmbedder(Embedder):
    """tanh(P · flatten(image)) with a fixed seeded unit-normal D×(H·W·C) matrix P."""

    def __init__(self, input_shape: Tuple[int, int, int], dim: int = 128, seed: int = 0):
        if any(v is None or v < 1 for v in input_shape):
            raise ConfigError(f"Random projection needs a concrete input shape, got {input_shape}")
        if dim < 1:
            raise ConfigError(f"Embedding dimension must be positive, got {dim}")
        super().__init__(input_shape)
        self.dim = dim
        self.seed = int(seed)
        self.name = f"random_projection_{dim}"
        rng = np.random.default_rng(self.seed)
        self.projection = rng.standard_normal((dim, int(np.prod(input_shape))))
        self.projection.setflags(write=False)

    def forward(self, data: np.ndarray) -> np.ndarray:
        return np.tanh(self.projection @ data.ravel())


class RandomizedEmbedder(RandomProjectionEmbedder):
    """A random projection standing in for a model with randomized parameters.

    Without an explicit seed every construction draws fresh entropy; the seed
    actually used is kept on ``self.seed`` so runs can be replayed.
    """

    def __init__(self, input_shape: Tuple[int, int, int], dim: int = 128, seed: Optional[int] = None):
        if seed is None:
            seed = int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0])
        super().__init__(input_shape, dim=dim, seed=seed)
        self.name = f"randomized_{dim}"


class ExternalModelEmbedder(Embedder):
    """Wraps an ONNX model through onnxruntime.

    The [0, 1] image is multiplied by ``pixel_scale``, channel-reordered,
    normalized with ``mean``/``std`` and laid out as NCHW or NHWC with a
    leading batch axis of 1 before inference. The first model output is
    flattened into the embedding.
    """

    def __init__(self, model_path: Path, input_shape: Tuple[int, int, int],
                 channel_order: Literal["rgb", "bgr"] = "rgb",
                 layout: Literal["nchw", "nhwc"] = "nchw",
                 pixel_scale: float = 1.0,
                 mean: Sequence[float] = (0.0,),
                 std: Sequence[float] = (1.0,),
                 input_name: Optional[str] = None):
        super().__init__(input_shape)
        model_path = Path(model_path)
        if not model_path.is_file():
            raise InputError(f"Model file not found: {model_path}")
        channels = self.input_shape[2]
        for label, values in (("input_mean", mean), ("input_std", std)):
            if len(values) != 1 and (channels is None or len(values) != channels):
                raise ConfigError(
                    f"{label} has {len(values)} entries; expected 1 or one per channel ({channels})"
                )
        try:
            import onnxruntime
        except ImportError as e:
            raise InferenceError("onnxruntime is required for external models (pip install onnxruntime)") from e

        try:
            self.session = onnxruntime.InferenceSession(str(model_path), providers=["CPUExecutionProvider"])
        except Exception as e:
            raise InferenceError(f"Cannot load model {model_path}: {e}") from e

        self.input_name = input_name or self.session.get_inputs()[0].name
        self.channel_order = channel_order
        self.layout = layout
        self.pixel_scale = float(pixel_scale)
        self.mean = np.asarray(mean, dtype=np.float32)
        self.std = np.asarray(std, dtype=np.float32)
        if np.any(self.std == 0):
            raise ConfigError("input_std entries must be non-zero")
        self.name = f"onnx:{model_path.name}"
        logger.info(f"Loaded external model {model_path} (input '{self.input_name}', layout {layout})")

    def preprocess(self, data: np.ndarray) -> np.ndarray:
        x = data.astype(np.float32) * self.pixel_scale
        if self.channel_order == "bgr" and x.shape[2] == 3:
            x = x[:, :, ::-1]
        x = (x - self.mean) / self.std
        if self.layout == "nchw":
            x = np.transpose(x, (2, 0, 1))
        return np.ascontiguousarray(x[np.newaxis])

    def forward(self, data: np.ndarray) -> np.ndarray:
        try:
            outputs = self.session.run(None, {self.input_name: self.preprocess(data)})
        except Exception as e:
            raise InferenceError(f"{self.name} inference failed: {e}") from e
        return np.asarray(outputs[0], dtype=np.float64).ravel()


class EmbedderConfig(BaseModel):
    """Which embedder to build and how."""

    kind: Literal["patch_mean", "random_projection", "randomized", "external"] = "patch_mean"
    grid: int = Field(4, ge=1)
    dim: int = Field(128, ge=1)
    seed: int = Field(0, ge=0)
    model: Optional[Path] = None
    input_name: Optional[str] = None
    channel_order: Literal["rgb", "bgr"] = "rgb"
    layout: Literal["nchw", "nhwc"] = "nchw"
    pixel_scale: float = 1.0
    input_mean: List[float] = Field(default_factory=lambda: [0.0])
    input_std: List[float] = Field(default_factory=lambda: [1.0])


def build_embedder(cfg: EmbedderConfig, input_shape: Tuple[int, int, int]) -> Embedder:
    if cfg.kind == "patch_mean":
        return PatchMeanEmbedder(cfg.grid)
    if cfg.kind == "random_projection":
        return RandomProjectionEmbedder(input_shape, dim=cfg.dim, seed=cfg.seed)
    if cfg.kind == "randomized":
        return RandomizedEmbedder(input_shape, dim=cfg.dim, seed=cfg.seed)
    if cfg.model is None:
        raise ConfigError("External embedder requires 'model' to point at an ONNX file")
    return ExternalModelEmbedder(
        cfg.model, input_shape,
        channel_order=cfg.channel_order,
        layout=cfg.layout,
        pixel_scale=cfg.pixel_scale,
        mean=cfg.input_mean,
        std=cfg.input_std,
        input_name=cfg.input_name,
    )


def embed(embedder: Embedder, image: Image) -> np.ndarray:
    return embedder.embed(image)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """dot(a, b) / (|a|·|b|), clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"Embedding dimensions differ: {a.shape} vs {b.shape}")
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a < NORM_EPSILON or norm_b < NORM_EPSILON:
        raise DegenerateEmbeddingError(
            f"Cannot compare near-zero embedding (norms {norm_a:.3g}, {norm_b:.3g})"
        )
    return float(np.clip(np.dot(a, b) / (norm_a * norm_b), -1.0, 1.0))

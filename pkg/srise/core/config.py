# srise/core/config.py
"""Environment settings and the run configuration.

The run configuration file is YAML holding one flat mapping of
``key: value`` pairs (see config.yaml at the repository root for every key).
Command-line flags override file values, which override the defaults below.
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import yaml
from pydantic import (BaseModel, Field, ValidationError, field_validator,
                      model_validator)
from pydantic_settings import BaseSettings, SettingsConfigDict

from .embedding import EmbedderConfig
from .errors import ConfigError
from .evaluation import MetricConfig
from .explainer import ExplainConfig
from .masks import MaskConfig

logger = logging.getLogger(__name__)

LogLevel = Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


class Settings(BaseSettings):
    """Process environment (SRISE_* variables, optionally from .env)."""

    no_color: bool = False
    config: Optional[Path] = None
    log_level: LogLevel = "INFO"

    model_config = SettingsConfigDict(env_prefix="SRISE_", env_file=".env", extra="ignore")

    @field_validator("log_level", mode="before")
    @classmethod
    def _upper_level(cls, value):
        return value.upper() if isinstance(value, str) else value


class RunConfig(BaseModel):
    """Everything one command invocation needs."""

    # embedder
    embedder: Literal["patch_mean", "random_projection", "randomized", "external"] = "patch_mean"
    grid: int = Field(4, ge=1)
    embedding_dim: int = Field(128, ge=1)
    embedder_seed: int = Field(0, ge=0)
    model: Optional[Path] = None
    input_name: Optional[str] = None
    channel_order: Literal["rgb", "bgr"] = "rgb"
    layout: Literal["nchw", "nhwc"] = "nchw"
    pixel_scale: float = 1.0
    input_mean: List[float] = Field(default_factory=lambda: [0.0])
    input_std: List[float] = Field(default_factory=lambda: [1.0])

    # imaging
    image_height: int = Field(112, ge=1)
    image_width: int = Field(112, ge=1)
    overlay_alpha: float = Field(0.5, ge=0, le=1)

    # masks / explainer
    masks: int = Field(1000, ge=1)
    kernels: int = Field(3, ge=1)
    kernel_size: int = Field(29, ge=1)
    sigma: Optional[float] = Field(None, gt=0)
    amplitude: float = Field(1.0, gt=0, le=1)
    merge: Literal["max", "sum"] = "max"
    normalize: bool = True
    reweight: Literal["ratio", "none"] = "ratio"
    share_masks: bool = False

    # metrics
    threshold: float = Field(0.3, gt=-1, lt=1)
    step: int = Field(1, ge=1)
    max_fraction: float = Field(1.0, gt=0, le=1)
    iterations: List[int] = Field(default_factory=lambda: [10, 100, 500, 1000])
    baselines: List[Literal["random", "occlusion"]] = Field(default_factory=list)

    # sanity
    margin: float = 0.3

    # run
    seed: int = Field(0, ge=0, lt=2**64)
    workers: int = Field(1, ge=0)
    out: Path = Path("out")
    dump_masks: int = Field(0, ge=0)
    dump_curves: bool = False
    progress: bool = False
    log_level: Optional[LogLevel] = None
    log_file: Optional[Path] = None

    model_config = {"extra": "forbid"}

    @field_validator("log_level", mode="before")
    @classmethod
    def _upper_level(cls, value):
        return value.upper() if isinstance(value, str) else value

    @model_validator(mode="after")
    def _check(self):
        if self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd, got {self.kernel_size}")
        if not self.iterations or any(n < 1 for n in self.iterations):
            raise ValueError("iterations must be a non-empty list of positive integers")
        if self.embedder == "external" and self.model is None:
            raise ValueError("embedder 'external' requires 'model'")
        return self

    @property
    def target(self):
        return (self.image_height, self.image_width)

    def mask_config(self, num_masks: Optional[int] = None) -> MaskConfig:
        return MaskConfig.build(
            num_masks=num_masks or self.masks,
            kernels_per_mask=self.kernels,
            kernel_size=self.kernel_size,
            sigma=self.sigma,
            amplitude=self.amplitude,
            merge=self.merge,
            seed=self.seed,
        )

    def explain_config(self, num_masks: Optional[int] = None) -> ExplainConfig:
        return ExplainConfig(
            mask_cfg=self.mask_config(num_masks),
            normalize=self.normalize,
            reweight_mode=self.reweight,
            share_masks=self.share_masks,
        )

    def metric_config(self) -> MetricConfig:
        return MetricConfig(threshold=self.threshold, step=self.step, max_fraction=self.max_fraction)

    def embedder_config(self) -> EmbedderConfig:
        return EmbedderConfig(
            kind=self.embedder,
            grid=self.grid,
            dim=self.embedding_dim,
            seed=self.embedder_seed,
            model=self.model,
            input_name=self.input_name,
            channel_order=self.channel_order,
            layout=self.layout,
            pixel_scale=self.pixel_scale,
            input_mean=self.input_mean,
            input_std=self.input_std,
        )


def load_config_file(path: Path) -> Dict[str, Any]:
    """Read a flat YAML mapping."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            values = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"Config file {path} is not valid YAML: {e}") from e

    if values is None:
        return {}
    if not isinstance(values, dict):
        raise ConfigError(f"Config file {path} must hold a key: value mapping")
    nested = [key for key, value in values.items() if isinstance(value, dict)]
    if nested:
        raise ConfigError(f"Config file {path}: nested sections are not allowed ({', '.join(nested)})")
    return values


def build_run_config(path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Defaults < file < overrides (None values in ``overrides`` are ignored)."""
    values: Dict[str, Any] = {}
    if path is not None:
        values.update(load_config_file(path))
        logger.info(f"Configuration loaded from {path}")
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})

    try:
        return RunConfig(**values)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
        )
        source = f"config file {path}" if path is not None else "command line"
        raise ConfigError(f"Invalid configuration ({source}): {problems}") from e


def load_settings() -> Settings:
    """Read SRISE_* variables (and .env); invalid values become ConfigError."""
    try:
        return Settings()
    except ValidationError as e:
        problems = "; ".join(
            f"SRISE_{'_'.join(str(p) for p in err['loc']).upper()}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"Invalid environment: {problems}") from e

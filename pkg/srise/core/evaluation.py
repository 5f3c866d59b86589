# srise/core/evaluation.py
"""Deletion and insertion faithfulness metrics.

Deletion replaces the most salient pixels of one image of a pair with that
image's per-channel mean, ``step`` pixels per round, until the pair
similarity drops below the threshold. Insertion starts from the mean-filled
image and restores pixels in the same order until the similarity rises
above the threshold. Both report the fraction of pixels changed.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from tqdm import tqdm

from .embedding import Embedder, cosine_similarity
from .errors import DegenerateEmbeddingError, DimensionError, InputError
from .imaging import Image, SaliencyMap, mean_fill
from .pool import ordered_map

logger = logging.getLogger(__name__)


class MetricConfig(BaseModel):
    threshold: float = Field(0.3, gt=-1, lt=1, description="Verification threshold θ.")
    step: int = Field(1, ge=1, description="Pixels changed per re-evaluation.")
    max_fraction: float = Field(1.0, gt=0, le=1, description="Largest fraction of pixels to change.")

    model_config = {"frozen": True}


@dataclass(frozen=True)
class MetricResult:
    fraction: float
    crossed: bool
    curve: List[Tuple[int, float]] = field(default_factory=list)

    @property
    def pixels_changed(self) -> int:
        return self.curve[-1][0] if self.curve else 0


@dataclass(frozen=True)
class PairMetrics:
    deletion: MetricResult
    insertion: MetricResult


@dataclass(frozen=True)
class DatasetReport:
    pairs: List[PairMetrics]
    mean_deletion: float
    mean_insertion: float

    @property
    def average(self) -> float:
        return (self.mean_deletion + self.mean_insertion) / 2.0


def pixel_rank(saliency: SaliencyMap) -> np.ndarray:
    """Row-major pixel indices by descending saliency; ties keep row-major order."""
    return np.argsort(-saliency.values.ravel(), kind="stable")


def _similarity(embedder: Embedder, data: np.ndarray, other_embedding: np.ndarray) -> float:
    try:
        return cosine_similarity(embedder.embed(Image(data)), other_embedding)
    except DegenerateEmbeddingError:
        logger.debug("Degenerate embedding during metric curve, similarity taken as 0")
        return 0.0


def _check_dimensions(target: Image, other: Image, saliency: SaliencyMap):
    if target.shape != other.shape:
        raise DimensionError(f"Pair images differ in shape: {target.shape} vs {other.shape}")
    if saliency.shape != target.shape[:2]:
        raise DimensionError(f"Map shape {saliency.shape} does not match image {target.shape[:2]}")


def _perturbation_curve(start: np.ndarray, source: np.ndarray, order: np.ndarray,
                        other_embedding: np.ndarray, embedder: Embedder, cfg: MetricConfig,
                        stop_below: bool, progress: bool = False) -> MetricResult:
    """Copy pixels from ``source`` into ``start`` in ``order`` until θ is crossed."""
    height, width, channels = start.shape
    total = height * width
    limit = int(np.floor(cfg.max_fraction * total))
    working = start.reshape(total, channels).copy()
    source = source.reshape(total, channels)

    def crossed(similarity: float) -> bool:
        return similarity < cfg.threshold if stop_below else similarity > cfg.threshold

    similarity = _similarity(embedder, working.reshape(start.shape), other_embedding)
    curve = [(0, similarity)]
    if crossed(similarity):
        return MetricResult(fraction=0.0, crossed=True, curve=curve)

    changed = 0
    with tqdm(total=limit, desc="Perturbing", disable=not progress) as bar:
        while changed < limit:
            batch = order[changed:min(changed + cfg.step, limit)]
            working[batch] = source[batch]
            changed += len(batch)
            bar.update(len(batch))
            similarity = _similarity(embedder, working.reshape(start.shape), other_embedding)
            curve.append((changed, similarity))
            if crossed(similarity):
                return MetricResult(fraction=changed / total, crossed=True, curve=curve)

    return MetricResult(fraction=cfg.max_fraction, crossed=False, curve=curve)


def deletion(target: Image, other: Image, saliency: SaliencyMap, embedder: Embedder,
             cfg: MetricConfig, progress: bool = False) -> MetricResult:
    """Fraction of top-ranked pixels replaced by the mean before similarity < θ."""
    _check_dimensions(target, other, saliency)
    other_embedding = embedder.embed(other)
    fill = mean_fill(target)
    return _perturbation_curve(target.data, fill.data, pixel_rank(saliency), other_embedding,
                               embedder, cfg, stop_below=True, progress=progress)


def insertion(target: Image, other: Image, saliency: SaliencyMap, embedder: Embedder,
              cfg: MetricConfig, progress: bool = False) -> MetricResult:
    """Fraction of top-ranked pixels restored onto the mean fill before similarity > θ."""
    _check_dimensions(target, other, saliency)
    other_embedding = embedder.embed(other)
    fill = mean_fill(target)
    return _perturbation_curve(fill.data, target.data, pixel_rank(saliency), other_embedding,
                               embedder, cfg, stop_below=False, progress=progress)


def random_saliency(height: int, width: int, rng: np.random.Generator) -> SaliencyMap:
    """I.i.d. uniform [0, 1) baseline map."""
    return SaliencyMap(rng.random((height, width)))


def occlusion_saliency(target: Image, other: Image, embedder: Embedder, patch: int) -> SaliencyMap:
    """Similarity drop when each patch×patch window of ``target`` is zeroed."""
    if patch < 1:
        raise InputError(f"Occlusion patch must be positive, got {patch}")
    other_embedding = embedder.embed(other)
    base = cosine_similarity(embedder.embed(target), other_embedding)
    values = np.zeros(target.shape[:2], dtype=np.float64)
    for row in range(0, target.height, patch):
        for col in range(0, target.width, patch):
            occluded = target.data.copy()
            occluded[row:row + patch, col:col + patch] = 0.0
            values[row:row + patch, col:col + patch] = base - _similarity(embedder, occluded, other_embedding)
    return SaliencyMap(values)


def evaluate_pair(target: Image, other: Image, saliency: SaliencyMap, embedder: Embedder,
                  cfg: MetricConfig) -> PairMetrics:
    return PairMetrics(
        deletion=deletion(target, other, saliency, embedder, cfg),
        insertion=insertion(target, other, saliency, embedder, cfg),
    )


def evaluate_dataset(pairs: Sequence[Tuple[Image, Image, SaliencyMap]], embedder: Embedder,
                     cfg: MetricConfig, workers: int = 1, progress: bool = False) -> DatasetReport:
    """Deletion/insertion for every (target, other, map) entry plus their means."""
    if not pairs:
        raise InputError("evaluate_dataset needs at least one pair")
    if not embedder.concurrent_safe:
        workers = 1

    results = ordered_map(lambda entry: evaluate_pair(*entry, embedder, cfg), pairs,
                          workers=workers, desc="Evaluating", progress=progress)
    mean_deletion = float(np.mean([r.deletion.fraction for r in results]))
    mean_insertion = float(np.mean([r.insertion.fraction for r in results]))
    logger.info(f"Evaluated {len(results)} pairs: deletion={mean_deletion:.4f} "
                f"insertion={mean_insertion:.4f}")
    return DatasetReport(pairs=results, mean_deletion=mean_deletion, mean_insertion=mean_insertion)

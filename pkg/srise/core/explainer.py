# srise/core/explainer.py
"""Similarity-based randomized input sampling (S-RISE).

For a pair {a, b} one batch of masks M_1..M_N is drawn. Mask i yields two
scores: s^a_i = cos(embed(a ⊙ M_i), embed(b)) and s^b_i = cos(embed(a),
embed(b ⊙ M_i)). The saliency map of each image is the score-weighted sum of
the masks, min-max normalized. A triplet is split into its matching
{probe, mate} and non-matching {probe, nonmate} pairs; the two pair results
are then re-weighted by their base similarities.
"""
import logging
from dataclasses import dataclass, field
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from .embedding import Embedder, cosine_similarity
from .errors import DegenerateEmbeddingError, DimensionError
from .imaging import Image, SaliencyMap
from .masks import MaskConfig, generate_mask_batch
from .pool import ordered_map

logger = logging.getLogger(__name__)


class ExplainConfig(BaseModel):
    mask_cfg: MaskConfig = Field(default_factory=MaskConfig)
    normalize: bool = Field(True, description="Per-map min-max normalization.")
    reweight_mode: Literal["ratio", "none"] = Field("ratio", description="Triplet re-weighting rule.")
    share_masks: bool = Field(False, description="Reuse one mask batch for both pairs of a triplet.")

    model_config = {"frozen": True}


@dataclass(frozen=True)
class PairExplanation:
    map_a: SaliencyMap
    map_b: SaliencyMap
    base_similarity: float
    per_mask_scores_a: np.ndarray
    per_mask_scores_b: np.ndarray
    degenerate_masks: int = 0

    @property
    def num_masks(self) -> int:
        return len(self.per_mask_scores_a)


@dataclass(frozen=True)
class Triplet:
    probe: Image
    mate: Image
    nonmate: Image

    def __post_init__(self):
        if not (self.probe.shape == self.mate.shape == self.nonmate.shape):
            raise DimensionError(
                f"Triplet images differ in shape: {self.probe.shape}, {self.mate.shape}, {self.nonmate.shape}"
            )


@dataclass(frozen=True)
class TripletExplanation:
    match: PairExplanation
    nonmatch: PairExplanation
    weight_match: float
    weight_nonmatch: float
    degenerate: bool = field(default=False)

    @property
    def probe_match_map(self) -> SaliencyMap:
        return SaliencyMap(self.weight_match * self.match.map_a.values)

    @property
    def mate_map(self) -> SaliencyMap:
        return SaliencyMap(self.weight_match * self.match.map_b.values)

    @property
    def probe_nonmatch_map(self) -> SaliencyMap:
        return SaliencyMap(self.weight_nonmatch * self.nonmatch.map_a.values)

    @property
    def nonmate_map(self) -> SaliencyMap:
        return SaliencyMap(self.weight_nonmatch * self.nonmatch.map_b.values)


def apply_mask(image: Image, mask: np.ndarray) -> Image:
    """Multiply every channel of ``image`` by ``mask``."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != image.shape[:2]:
        raise DimensionError(f"Mask shape {mask.shape} does not match image {image.shape[:2]}")
    return Image(image.data * mask[:, :, np.newaxis])


def normalize_map(saliency: SaliencyMap) -> SaliencyMap:
    """(v - min) / (max - min); a constant map becomes all zeros."""
    values = saliency.values
    low, high = values.min(), values.max()
    if high == low:
        return SaliencyMap(np.zeros_like(values))
    return SaliencyMap((values - low) / (high - low))


def aggregate_masks(scores: np.ndarray, masks: np.ndarray) -> SaliencyMap:
    """Σ_i scores[i]·masks[i], accumulated in ascending mask index."""
    if len(scores) != len(masks):
        raise DimensionError(f"{len(scores)} scores for {len(masks)} masks")
    total = np.zeros(masks.shape[1:], dtype=np.float64)
    for score, mask in zip(scores, masks):
        total += score * mask
    return SaliencyMap(total)


def explain_pair(a: Image, b: Image, embedder: Embedder, cfg: ExplainConfig,
                 rng: np.random.Generator, workers: int = 1,
                 masks: Optional[np.ndarray] = None, progress: bool = False) -> PairExplanation:
    """Saliency maps for both images of a pair.

    A masked embedding with zero norm scores 0 and is counted in
    ``degenerate_masks``. ``masks`` overrides sampling from ``rng``.
    """
    if a.shape != b.shape:
        raise DimensionError(f"Pair images differ in shape: {a.shape} vs {b.shape}")

    emb_a = embedder.embed(a)
    emb_b = embedder.embed(b)
    base_similarity = cosine_similarity(emb_a, emb_b)

    if masks is None:
        masks = generate_mask_batch(a.height, a.width, cfg.mask_cfg, rng, progress=progress)
    elif masks.shape[1:] != a.shape[:2]:
        raise DimensionError(f"Mask batch shape {masks.shape[1:]} does not match image {a.shape[:2]}")

    if not embedder.concurrent_safe and workers != 1:
        logger.debug(f"{embedder.name} is not concurrent-safe, using a single worker")
        workers = 1

    def score(index: int) -> Tuple[float, float, int]:
        degenerate = 0
        try:
            s_a = cosine_similarity(embedder.embed(apply_mask(a, masks[index])), emb_b)
        except DegenerateEmbeddingError:
            s_a, degenerate = 0.0, degenerate + 1
        try:
            s_b = cosine_similarity(emb_a, embedder.embed(apply_mask(b, masks[index])))
        except DegenerateEmbeddingError:
            s_b, degenerate = 0.0, degenerate + 1
        return s_a, s_b, degenerate

    results = ordered_map(score, range(len(masks)), workers=workers,
                          desc="Scoring masks", progress=progress)
    scores_a = np.array([r[0] for r in results], dtype=np.float64)
    scores_b = np.array([r[1] for r in results], dtype=np.float64)
    degenerate = sum(r[2] for r in results)
    if degenerate:
        logger.warning(f"{degenerate} masked embeddings were degenerate and scored 0")

    map_a = aggregate_masks(scores_a, masks)
    map_b = aggregate_masks(scores_b, masks)
    if cfg.normalize:
        map_a, map_b = normalize_map(map_a), normalize_map(map_b)

    scores_a.setflags(write=False)
    scores_b.setflags(write=False)
    return PairExplanation(
        map_a=map_a,
        map_b=map_b,
        base_similarity=base_similarity,
        per_mask_scores_a=scores_a,
        per_mask_scores_b=scores_b,
        degenerate_masks=degenerate,
    )


def triplet_weights(s_match: float, s_nonmatch: float, mode: str = "ratio") -> Tuple[float, float, bool]:
    """(weight_match, weight_nonmatch, degenerate) from the two base similarities."""
    if mode == "none":
        return 1.0, 1.0, False
    positive_match = max(s_match, 0.0)
    positive_nonmatch = max(s_nonmatch, 0.0)
    if positive_match == 0.0:
        return 1.0, 1.0, True
    return 1.0, float(np.clip(positive_nonmatch / positive_match, 0.0, 1.0)), False


def explain_triplet(triplet: Triplet, embedder: Embedder, cfg: ExplainConfig,
                    rng: np.random.Generator, workers: int = 1,
                    progress: bool = False) -> TripletExplanation:
    """Explain {probe, mate} and {probe, nonmate}, then re-weight the two pairs."""
    probe = triplet.probe
    shared = None
    if cfg.share_masks:
        shared = generate_mask_batch(probe.height, probe.width, cfg.mask_cfg, rng, progress=progress)

    match = explain_pair(probe, triplet.mate, embedder, cfg, rng,
                         workers=workers, masks=shared, progress=progress)
    nonmatch = explain_pair(probe, triplet.nonmate, embedder, cfg, rng,
                            workers=workers, masks=shared, progress=progress)

    weight_match, weight_nonmatch, degenerate = triplet_weights(
        match.base_similarity, nonmatch.base_similarity, cfg.reweight_mode
    )
    if degenerate:
        logger.warning(
            f"Degenerate triplet: matching similarity {match.base_similarity:.4f} <= 0, weights set to 1"
        )
    logger.info(f"Triplet similarities match={match.base_similarity:.4f} "
                f"nonmatch={nonmatch.base_similarity:.4f} -> weights "
                f"{weight_match:.4f}/{weight_nonmatch:.4f}")
    return TripletExplanation(
        match=match,
        nonmatch=nonmatch,
        weight_match=weight_match,
        weight_nonmatch=weight_nonmatch,
        degenerate=degenerate,
    )

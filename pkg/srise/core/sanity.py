# srise/core/sanity.py
"""Model-parameter randomization check and map comparison statistics.

A saliency method that depends on the model should produce maps that agree
across mask seeds for the trained model, and disagree with maps produced for
a model whose parameters are random.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from .embedding import Embedder, RandomizedEmbedder
from .errors import DegenerateMapError, DimensionError
from .explainer import ExplainConfig, explain_pair
from .imaging import Image, SaliencyMap
from .pool import ordered_map

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SanityReport:
    r_randomized: float
    r_rerun: float
    spearman_randomized: float
    spearman_rerun: float
    margin: float
    passed: bool
    seeds: tuple
    randomized_name: str
    trained_map: SaliencyMap
    rerun_map: SaliencyMap
    randomized_map: SaliencyMap


def _check_maps(a: SaliencyMap, b: SaliencyMap):
    if a.shape != b.shape:
        raise DimensionError(f"Map shapes differ: {a.shape} vs {b.shape}")
    for label, saliency in (("first", a), ("second", b)):
        if np.ptp(saliency.values) == 0:
            raise DegenerateMapError(f"The {label} map is constant; correlation is undefined")


def map_correlation(a: SaliencyMap, b: SaliencyMap) -> float:
    """Pearson correlation of the flattened maps, clamped to [-1, 1]."""
    _check_maps(a, b)
    r = stats.pearsonr(a.values.ravel(), b.values.ravel())[0]
    return float(np.clip(r, -1.0, 1.0))


def rank_correlation(a: SaliencyMap, b: SaliencyMap) -> float:
    """Spearman rank correlation of the flattened maps."""
    _check_maps(a, b)
    r = stats.spearmanr(a.values.ravel(), b.values.ravel())[0]
    return float(np.clip(r, -1.0, 1.0))


def randomization_check(a: Image, b: Image, trained: Embedder, cfg: ExplainConfig,
                        margin: float, rng: np.random.Generator,
                        randomized: Optional[Embedder] = None,
                        workers: int = 1) -> SanityReport:
    """Compare trained maps across two mask seeds against a randomized-model map.

    Passes when r_rerun - r_randomized >= margin.
    """
    seed_first, seed_second, construction_seed = (int(s) for s in rng.integers(0, 2**63, size=3))
    if randomized is None:
        randomized = RandomizedEmbedder(a.shape, seed=construction_seed)

    jobs = [
        (trained, seed_first),
        (trained, seed_second),
        (randomized, seed_first),
    ]
    concurrent = trained.concurrent_safe and randomized.concurrent_safe

    def run(job):
        embedder, seed = job
        return explain_pair(a, b, embedder, cfg, np.random.default_rng(seed)).map_a

    trained_map, rerun_map, randomized_map = ordered_map(
        run, jobs, workers=min(workers, 3) if concurrent else 1
    )

    try:
        r_rerun = map_correlation(trained_map, rerun_map)
        r_randomized = map_correlation(trained_map, randomized_map)
        spearman_rerun = rank_correlation(trained_map, rerun_map)
        spearman_randomized = rank_correlation(trained_map, randomized_map)
    except DegenerateMapError as e:
        raise DegenerateMapError(f"Sanity check with {trained.name} vs {randomized.name}: {e}") from e

    passed = bool(r_rerun - r_randomized >= margin)
    logger.info(f"Sanity check {'passed' if passed else 'failed'}: r_rerun={r_rerun:.4f} "
                f"r_randomized={r_randomized:.4f} margin={margin}")
    return SanityReport(
        r_randomized=r_randomized,
        r_rerun=r_rerun,
        spearman_randomized=spearman_randomized,
        spearman_rerun=spearman_rerun,
        margin=margin,
        passed=passed,
        seeds=(seed_first, seed_second, construction_seed),
        randomized_name=randomized.name,
        trained_map=trained_map,
        rerun_map=rerun_map,
        randomized_map=randomized_map,
    )

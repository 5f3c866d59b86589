import asyncio
import csv
import logging
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np

from ..core.config import RunConfig
from ..core.embedding import Embedder, RandomizedEmbedder, build_embedder
from ..core.errors import InputError
from ..core.evaluation import (evaluate_dataset, occlusion_saliency,
                               random_saliency)
from ..core.explainer import Triplet, explain_pair, explain_triplet
from ..core.fixtures import (load_dataset, load_triplet, write_dataset,
                             write_pairs)
from ..core.imaging import (Image, SaliencyMap, export_saliency_binary,
                            export_saliency_csv, load_image, render_overlay,
                            save_panel_strip, save_png)
from ..core.masks import dump_masks, generate_mask_batch
from ..core.pool import resolve_workers
from ..core.sanity import randomization_check
from .schemas import (EvaluationReport, MetricRow, PairExplanationDocument,
                      SanityDocument, SummaryRow, TripletExplanationDocument)

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["method", "iterations", "deletion", "insertion", "average"]


def prepare_output(out: Path) -> Path:
    """Create the output directory or fail with an input error."""
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise InputError(f"Cannot create output directory {out}: {e}") from e
    return out


def write_map(saliency: SaliencyMap, out: Path, stem: str) -> Dict[str, str]:
    csv_path = export_saliency_csv(saliency, out / f"{stem}.csv")
    bin_path = export_saliency_binary(saliency, out / f"{stem}.bin")
    return {f"{stem}_csv": csv_path.name, f"{stem}_bin": bin_path.name}


def write_overlay(image: Image, saliency: SaliencyMap, alpha: float, out: Path, stem: str) -> Dict[str, str]:
    path = save_png(render_overlay(image, saliency, alpha), out / f"{stem}.png")
    return {stem: path.name}


def write_json(document, path: Path) -> Path:
    path.write_text(document.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info(f"Wrote {path}")
    return path


async def load_pair(paths: Sequence[Path], cfg: RunConfig):
    if len(paths) != 2:
        raise InputError(f"Expected 2 image paths, got {len(paths)}")
    return await asyncio.gather(*(asyncio.to_thread(load_image, p, cfg.target) for p in paths))


async def cmd_explain(paths: Sequence[Path], cfg: RunConfig) -> int:
    """Explain one image pair: two maps (CSV + binary), two overlays, one JSON document."""
    a, b = await load_pair(paths, cfg)
    out = prepare_output(cfg.out)
    embedder = build_embedder(cfg.embedder_config(), a.shape)
    explain_cfg = cfg.explain_config()

    logger.info(f"Explaining pair {paths[0]} / {paths[1]} with {embedder.name}, N={explain_cfg.mask_cfg.num_masks}")
    explanation = await asyncio.to_thread(
        explain_pair, a, b, embedder, explain_cfg, np.random.default_rng(cfg.seed),
        workers=cfg.workers, progress=cfg.progress,
    )

    artifacts: Dict[str, str] = {}
    artifacts.update(write_map(explanation.map_a, out, "map_a"))
    artifacts.update(write_map(explanation.map_b, out, "map_b"))
    artifacts.update(write_overlay(a, explanation.map_a, cfg.overlay_alpha, out, "overlay_a"))
    artifacts.update(write_overlay(b, explanation.map_b, cfg.overlay_alpha, out, "overlay_b"))

    if cfg.dump_masks:
        masks = generate_mask_batch(a.height, a.width, explain_cfg.mask_cfg)
        dump_masks(masks, out / "masks", cfg.dump_masks)

    document = PairExplanationDocument.from_explanation(explanation, embedder.name, cfg.seed, artifacts)
    write_json(document, out / "explanation.json")
    logger.info(f"Base similarity {explanation.base_similarity:.4f}")
    return 0


async def cmd_triplet(paths: Sequence[Path], cfg: RunConfig) -> int:
    """Explain a probe/mate/nonmate triplet with re-weighted maps."""
    if len(paths) != 3:
        raise InputError(f"Expected 3 image paths (probe, mate, nonmate), got {len(paths)}")
    triplet = await asyncio.to_thread(load_triplet, paths, cfg.target)
    out = prepare_output(cfg.out)
    embedder = build_embedder(cfg.embedder_config(), triplet.probe.shape)

    explanation = await asyncio.to_thread(
        explain_triplet, triplet, embedder, cfg.explain_config(), np.random.default_rng(cfg.seed),
        workers=cfg.workers, progress=cfg.progress,
    )

    rendered = {
        "probe_match": (triplet.probe, explanation.probe_match_map),
        "mate": (triplet.mate, explanation.mate_map),
        "probe_nonmatch": (triplet.probe, explanation.probe_nonmatch_map),
        "nonmate": (triplet.nonmate, explanation.nonmate_map),
    }
    artifacts: Dict[str, str] = {}
    for stem, (image, saliency) in rendered.items():
        artifacts.update(write_map(saliency, out, f"map_{stem}"))
        artifacts.update(write_overlay(image, saliency, cfg.overlay_alpha, out, f"overlay_{stem}"))

    document = TripletExplanationDocument.from_explanation(explanation, embedder.name, cfg.seed, artifacts)
    write_json(document, out / "triplet.json")
    return 0


def _saliency_maps(triplet: Triplet, embedder: Embedder, cfg: RunConfig, method: str,
                   iterations: int, index: int) -> Dict[str, SaliencyMap]:
    """Probe and mate maps of one triplet's matching pair for one method."""
    probe, mate = triplet.probe, triplet.mate
    if method == "srise":
        rng = np.random.default_rng([cfg.seed, iterations, index])
        explanation = explain_pair(probe, mate, embedder, cfg.explain_config(iterations), rng)
        return {"probe": explanation.map_a, "mate": explanation.map_b}
    if method == "random":
        rng = np.random.default_rng([cfg.seed, 0, index])
        return {"probe": random_saliency(probe.height, probe.width, rng),
                "mate": random_saliency(mate.height, mate.width, rng)}
    patch = max(1, probe.height // cfg.grid)
    return {"probe": occlusion_saliency(probe, mate, embedder, patch),
            "mate": occlusion_saliency(mate, probe, embedder, patch)}


def _write_curve(curve, path: Path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["pixels_changed", "similarity"])
        for changed, similarity in curve:
            writer.writerow([changed, repr(similarity)])


async def cmd_eval(dataset: Path, cfg: RunConfig) -> int:
    """Deletion/insertion table over a dataset of triplet folders, one row per N."""
    triplets = await asyncio.to_thread(load_dataset, dataset, cfg.target)
    out = prepare_output(cfg.out)
    curves_dir = None
    if cfg.dump_curves:
        curves_dir = prepare_output(out / "curves")
    embedder = build_embedder(cfg.embedder_config(), triplets[0][1].probe.shape)
    workers = resolve_workers(cfg.workers) if embedder.concurrent_safe else 1
    metric_cfg = cfg.metric_config()

    jobs = [("srise", n) for n in cfg.iterations] + [(method, 0) for method in cfg.baselines]
    semaphore = asyncio.Semaphore(workers)

    async def build_maps(method: str, iterations: int, index: int, triplet: Triplet):
        async with semaphore:
            return await asyncio.to_thread(_saliency_maps, triplet, embedder, cfg, method, iterations, index)

    logger.info(f"Evaluating {len(triplets)} triplets, methods {jobs}, {workers} worker(s)")
    summary: List[SummaryRow] = []
    rows: List[MetricRow] = []
    for method, iterations in jobs:
        maps = await asyncio.gather(*(
            build_maps(method, iterations, index, triplet) for index, (_, triplet) in enumerate(triplets)
        ))

        entries, labels = [], []
        for (name, triplet), triplet_maps in zip(triplets, maps):
            for role, target, other in (("probe", triplet.probe, triplet.mate),
                                        ("mate", triplet.mate, triplet.probe)):
                entries.append((target, other, triplet_maps[role]))
                labels.append((name, role))

        report = await asyncio.to_thread(
            evaluate_dataset, entries, embedder, metric_cfg, workers=workers, progress=cfg.progress
        )
        for (name, role), metrics in zip(labels, report.pairs):
            rows.append(MetricRow.from_results(name, role, method, iterations,
                                               metrics.deletion, metrics.insertion))
            if curves_dir is not None:
                for kind, result in (("deletion", metrics.deletion), ("insertion", metrics.insertion)):
                    _write_curve(result.curve, curves_dir / f"{method}_{iterations}_{name}_{role}_{kind}.csv")

        summary.append(SummaryRow(
            method=method,
            iterations=iterations,
            deletion=report.mean_deletion,
            insertion=report.mean_insertion,
            average=report.average,
        ))
        logger.info(f"{method} N={iterations}: deletion={report.mean_deletion:.4f} "
                    f"insertion={report.mean_insertion:.4f} average={report.average:.4f}")

    with open(out / "eval_summary.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(SUMMARY_COLUMNS)
        for row in summary:
            writer.writerow([row.method, row.iterations, repr(row.deletion), repr(row.insertion), repr(row.average)])

    with open(out / "eval_pairs.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(list(MetricRow.model_fields))
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row.model_dump().values()])

    report = EvaluationReport(
        embedder=embedder.name,
        threshold=cfg.threshold,
        step=cfg.step,
        triplets=[name for name, _ in triplets],
        summary=summary,
        rows=rows,
    )
    write_json(report, out / "eval_report.json")
    return 0


async def cmd_sanity(paths: Sequence[Path], cfg: RunConfig) -> int:
    """Parameter-randomization check; exit 0 only when it passes."""
    a, b = await load_pair(paths, cfg)
    out = prepare_output(cfg.out)
    trained = build_embedder(cfg.embedder_config(), a.shape)
    # a randomized "trained" model is compared against itself: the control run
    randomized = trained if isinstance(trained, RandomizedEmbedder) else None

    report = await asyncio.to_thread(
        randomization_check, a, b, trained, cfg.explain_config(), cfg.margin,
        np.random.default_rng(cfg.seed), randomized=randomized, workers=cfg.workers,
    )

    strip = await asyncio.to_thread(save_panel_strip, [
        ("Image", a),
        ("Trained", report.trained_map),
        ("Rerun", report.rerun_map),
        ("Randomized", report.randomized_map),
    ], out / "sanity_strip.png")

    artifacts = {"sanity_strip": strip.name}
    artifacts.update(write_map(report.trained_map, out, "map_trained"))
    artifacts.update(write_map(report.randomized_map, out, "map_randomized"))
    document = SanityDocument.from_report(report, trained.name, report.randomized_name, artifacts)
    write_json(document, out / "sanity.json")
    return 0 if report.passed else 1


async def cmd_gen_fixtures(out: Path, cfg: RunConfig, count: int, size: int, channels: int,
                           occlusion: str, pairs: bool = False) -> int:
    """Write a synthetic triplet dataset, or interleaved pairs for the sanity check."""
    prepare_output(out)
    if pairs:
        await asyncio.to_thread(write_pairs, out, count, cfg.seed, size=size, grid=cfg.grid)
        return 0
    await asyncio.to_thread(
        write_dataset, out, count, cfg.seed, size=size, channels=channels, grid=cfg.grid,
        occlusion=occlusion,
    )
    return 0

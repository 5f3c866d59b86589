# srise/core/fixtures.py
"""Synthetic face-like triplets and the on-disk triplet dataset layout.

A synthetic identity is a set of bright Gaussian "features" placed in cells
of a grid over a dark, noisy background. Mates share the probe's cells with
small positional and brightness jitter; nonmates use cells disjoint from the
probe's. Dataset layout: one sub-folder per triplet holding probe.png,
mate.png and nonmate.png.
"""
import logging
from pathlib import Path
from typing import List, Literal, Sequence, Tuple

import numpy as np

from .errors import InputError
from .explainer import Triplet
from .imaging import Image, load_image, save_png

logger = logging.getLogger(__name__)

TRIPLET_FILES = ("probe.png", "mate.png", "nonmate.png")

Occlusion = Literal["none", "mask", "sunglasses"]


def pick_cells(rng: np.random.Generator, grid: int, features: int,
               exclude: Sequence[int] = ()) -> np.ndarray:
    candidates = np.setdiff1d(np.arange(grid * grid), np.asarray(exclude, dtype=np.int64))
    if len(candidates) < features:
        raise InputError(f"Cannot place {features} features in {len(candidates)} free cells")
    return np.sort(rng.choice(candidates, size=features, replace=False))


def render_face(cells: Sequence[int], size: int, channels: int, grid: int,
                rng: np.random.Generator, jitter: float = 0.1) -> Image:
    cell = size / grid
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    face = rng.uniform(0.0, 0.06, size=(size, size))
    sigma = cell / 3.5
    for index in cells:
        cy = (index // grid + 0.5) * cell + rng.uniform(-jitter, jitter) * cell
        cx = (index % grid + 0.5) * cell + rng.uniform(-jitter, jitter) * cell
        amplitude = 0.85 + rng.uniform(-0.05, 0.05)
        blob = amplitude * np.exp(-((rows - cy) ** 2 + (cols - cx) ** 2) / (2.0 * sigma ** 2))
        face = np.maximum(face, blob)
    face = np.clip(face, 0.0, 1.0)
    if channels == 3:
        face = np.stack([face, 0.9 * face, 0.8 * face], axis=2)
    return Image(face)


def occlude(image: Image, kind: Occlusion) -> Image:
    """Cover the eye band ("sunglasses") or the lower face ("mask")."""
    if kind == "none":
        return image
    data = image.data.copy()
    height = image.height
    if kind == "sunglasses":
        data[height // 4:height // 2] = 0.05
    elif kind == "mask":
        data[(3 * height) // 5:(9 * height) // 10] = 0.85
    else:
        raise InputError(f"Unknown occlusion '{kind}'")
    return Image(data)


def generate_triplet(rng: np.random.Generator, size: int = 112, channels: int = 1, grid: int = 4,
                     features: int = 4, occlusion: Occlusion = "none") -> Triplet:
    identity = pick_cells(rng, grid, features)
    impostor = pick_cells(rng, grid, features, exclude=identity)
    probe = render_face(identity, size, channels, grid, rng)
    mate = render_face(identity, size, channels, grid, rng)
    nonmate = render_face(impostor, size, channels, grid, rng)
    return Triplet(probe=occlude(probe, occlusion), mate=mate, nonmate=nonmate)


def generate_interleaved_pair(rng: np.random.Generator, size: int = 112, grid: int = 4,
                              features: int = 4) -> Tuple[Image, Image]:
    """Two images with the same features drawn on alternate rows.

    The pair agrees cell by cell but shares no lit pixel, so only a model
    that pools over cells sees them as similar.
    """
    cells = pick_cells(rng, grid, features)
    cell = size / grid
    sigma = cell / 3.5
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    face = np.zeros((size, size))
    for index in cells:
        cy = (index // grid + 0.5) * cell
        cx = (index % grid + 0.5) * cell
        amplitude = 0.85 + rng.uniform(-0.05, 0.05)
        face = np.maximum(face, amplitude * np.exp(-((rows - cy) ** 2 + (cols - cx) ** 2) / (2.0 * sigma ** 2)))
    even = (np.arange(size) % 2 == 0)[:, None]
    return Image(np.where(even, face, 0.0)), Image(np.where(even, 0.0, face))


def write_pairs(out_dir: Path, count: int, seed: int, size: int = 112, grid: int = 4,
                features: int = 4) -> List[Path]:
    """Write ``count`` interleaved pairs as pair_XXX/a.png and b.png."""
    if count < 1:
        raise InputError(f"Fixture count must be positive, got {count}")
    rng = np.random.default_rng(seed)
    folders = []
    for index in range(count):
        a, b = generate_interleaved_pair(rng, size=size, grid=grid, features=features)
        folder = Path(out_dir) / f"pair_{index:03d}"
        save_png(a, folder / "a.png")
        save_png(b, folder / "b.png")
        folders.append(folder)
    logger.info(f"Wrote {count} interleaved pairs to {out_dir}")
    return folders


def write_dataset(out_dir: Path, count: int, seed: int, size: int = 112, channels: int = 1,
                  grid: int = 4, features: int = 4, occlusion: Occlusion = "none") -> List[Path]:
    """Write ``count`` synthetic triplets as PNG folders under ``out_dir``."""
    if count < 1:
        raise InputError(f"Fixture count must be positive, got {count}")
    rng = np.random.default_rng(seed)
    folders = []
    for index in range(count):
        triplet = generate_triplet(rng, size=size, channels=channels, grid=grid,
                                   features=features, occlusion=occlusion)
        folder = Path(out_dir) / f"triplet_{index:03d}"
        for name, image in zip(TRIPLET_FILES, (triplet.probe, triplet.mate, triplet.nonmate)):
            save_png(image, folder / name)
        folders.append(folder)
    logger.info(f"Wrote {count} synthetic triplets to {out_dir}")
    return folders


def load_triplet(paths: Sequence[Path], target: Tuple[int, int]) -> Triplet:
    probe, mate, nonmate = (load_image(p, target) for p in paths)
    return Triplet(probe=probe, mate=mate, nonmate=nonmate)


def load_dataset(root: Path, target: Tuple[int, int]) -> List[Tuple[str, Triplet]]:
    """Every sub-folder of ``root`` holding a complete triplet, sorted by name."""
    root = Path(root)
    if not root.is_dir():
        raise InputError(f"Dataset directory not found: {root}")
    folders = sorted(p for p in root.iterdir() if p.is_dir())
    if not folders:
        raise InputError(f"Dataset {root} contains no triplet folders")

    triplets = []
    for folder in folders:
        missing = [name for name in TRIPLET_FILES if not (folder / name).is_file()]
        if missing:
            raise InputError(f"Triplet folder {folder} is missing {', '.join(missing)}")
        triplets.append((folder.name, load_triplet([folder / n for n in TRIPLET_FILES], target)))
    logger.info(f"Loaded {len(triplets)} triplets from {root}")
    return triplets

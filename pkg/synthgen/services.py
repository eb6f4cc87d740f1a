"""
Seeded synthetic tissue-like dataset.

Each slice is rendered from its own generator, seeded with
``splitmix64(master_seed, slice_index)``, so a slice's pixels depend only
on the master seed and its index and never on generation order or the
number of workers.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy.ndimage import zoom

from evaluation.manifest import DatasetManifest, ManifestStore, SliceRecord, TissueClass
from imagecore.io import ImageIO
from imagecore.rasters import RasterImage

from .styles import ClassStyle, SynthConfig

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
TINT_CELL = 32
BLOB_OPACITY = 0.85
PIXEL_NOISE = 4.0


def splitmix64(seed: int, index: int) -> int:
    """SplitMix64 output for state ``seed + (index + 1) * golden_gamma``"""
    z = (seed + (index + 1) * GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def slice_id_for(label: TissueClass, index: int) -> str:
    return f"{label.label}_{index:03d}"


def _tint_field(rng, height, width, strength):
    """Smooth per-channel tint variation: coarse noise upsampled bilinearly"""
    coarse = rng.normal(0.0, strength, size=(height // TINT_CELL + 2, width // TINT_CELL + 2, 3))
    factors = ((height + TINT_CELL) / coarse.shape[0], (width + TINT_CELL) / coarse.shape[1], 1)
    return zoom(coarse, factors, order=1)[:height, :width]


def _draw_blob(canvas, rng, style: ClassStyle):
    height, width, _ = canvas.shape
    cy, cx = rng.uniform(0, height), rng.uniform(0, width)
    ry, rx = rng.uniform(*style.radius_range, size=2)
    angle = rng.uniform(0, np.pi)
    color = np.asarray(style.foreground, dtype=np.float64) + rng.normal(0, style.color_jitter, 3)

    reach = int(np.ceil(max(ry, rx))) + 1
    top, bottom = max(int(cy) - reach, 0), min(int(cy) + reach + 1, height)
    left, right = max(int(cx) - reach, 0), min(int(cx) + reach + 1, width)
    if top >= bottom or left >= right:
        return
    yy, xx = np.mgrid[top:bottom, left:right]
    dy, dx = yy + 0.5 - cy, xx + 0.5 - cx
    cos, sin = np.cos(angle), np.sin(angle)
    inside = ((dx * cos + dy * sin) / rx) ** 2 + ((dy * cos - dx * sin) / ry) ** 2 <= 1.0
    region = canvas[top:bottom, left:right]
    region[inside] = (1 - BLOB_OPACITY) * region[inside] + BLOB_OPACITY * color


def render_slice(style: ClassStyle, width: int, height: int, seed: int) -> RasterImage:
    rng = np.random.default_rng(seed)
    canvas = np.empty((height, width, 3), dtype=np.float64)
    canvas[:] = np.asarray(style.background, dtype=np.float64)
    canvas += _tint_field(rng, height, width, style.tint_strength)

    count = rng.poisson(style.density * width * height / 10000.0)
    for _ in range(count):
        _draw_blob(canvas, rng, style)

    canvas += rng.normal(0.0, PIXEL_NOISE, size=canvas.shape)
    return RasterImage(np.clip(np.rint(canvas), 0, 255).astype(np.uint8))


def generate_dataset(config: SynthConfig, output_dir, workers=1) -> DatasetManifest:
    """Render every slice, write ``images/`` plus ``manifest.csv`` and return the manifest"""
    output_dir = Path(output_dir)
    image_dir = output_dir / 'images'
    image_dir.mkdir(parents=True, exist_ok=True)

    jobs = [
        (label, index, label.value * config.slices_per_class + index)
        for label in TissueClass
        for index in range(config.slices_per_class)
    ]

    def render(job):
        label, index, global_index = job
        slice_id = slice_id_for(label, index)
        image = render_slice(config.styles[label], config.slice_width, config.slice_height,
                             splitmix64(config.seed, global_index))
        path = ImageIO.write_image(image, image_dir / f"{slice_id}.{config.image_format}")
        return SliceRecord(slice_id=slice_id, label=label, path=str(path))

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        records = list(pool.map(render, jobs))

    manifest = DatasetManifest(tuple(records))
    ManifestStore.save(manifest, output_dir)
    logger.info(
        f"Generated {len(records)} synthetic slices of {config.slice_width} x {config.slice_height} "
        f"({config.patches_per_slice} patches each) in {output_dir}"
    )
    return manifest

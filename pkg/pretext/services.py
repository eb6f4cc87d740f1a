"""
Region-duplication pretext task.

A patch is split into a 2 x 2 grid; one quadrant is copied over another.
Six copy geometries plus the untouched patch give a 7-class labelling
problem whose labels come for free.
"""
import csv
import logging
import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from dupless.exceptions import ConfigError
from evaluation.manifest import DatasetManifest
from imagecore.io import ImageIO
from imagecore.rasters import PatchImage, Quadrant, parse_patch_id
from imagecore.services import TilingService

logger = logging.getLogger(__name__)

PRETEXT_FIELDS = ['example_id', 'source_patch_id', 'label']


class DuplicationClass(IntEnum):
    NORMAL = 0
    TOP_HORIZONTAL = 1
    BOTTOM_HORIZONTAL = 2
    LEFT_VERTICAL = 3
    RIGHT_VERTICAL = 4
    DIAGONAL = 5
    OFF_DIAGONAL = 6


# class -> (source quadrant, target quadrant); every copy runs from the top
# row or left column outward
DUPLICATION_MAP = {
    DuplicationClass.TOP_HORIZONTAL: (Quadrant.TOP_LEFT, Quadrant.TOP_RIGHT),
    DuplicationClass.BOTTOM_HORIZONTAL: (Quadrant.BOTTOM_LEFT, Quadrant.BOTTOM_RIGHT),
    DuplicationClass.LEFT_VERTICAL: (Quadrant.TOP_LEFT, Quadrant.BOTTOM_LEFT),
    DuplicationClass.RIGHT_VERTICAL: (Quadrant.TOP_RIGHT, Quadrant.BOTTOM_RIGHT),
    DuplicationClass.DIAGONAL: (Quadrant.TOP_LEFT, Quadrant.BOTTOM_RIGHT),
    DuplicationClass.OFF_DIAGONAL: (Quadrant.TOP_RIGHT, Quadrant.BOTTOM_LEFT),
}


@dataclass(frozen=True, eq=False)
class PretextExample:
    patch: PatchImage
    label: DuplicationClass
    source_patch_id: str

    @property
    def example_id(self) -> str:
        return f"{self.source_patch_id}__d{int(self.label)}"


@dataclass(frozen=True)
class PretextSampling:
    fraction: float
    seed: int

    def __post_init__(self):
        if not 0 < self.fraction <= 1:
            raise ConfigError(f"Pretext fraction must lie in (0, 1], got {self.fraction}")

    @property
    def tag(self) -> str:
        """Extractor tag, e.g. S-Net-15 for fraction 0.15"""
        return f"S-Net-{round(self.fraction * 100):d}"


class DuplicationService:
    """Label generation for the region-duplication pretext task"""

    @staticmethod
    def apply_duplication(patch: PatchImage, label: DuplicationClass) -> PatchImage:
        label = DuplicationClass(label)
        if label is DuplicationClass.NORMAL:
            return patch
        source, target = DUPLICATION_MAP[label]
        return TilingService.write_quadrant(
            patch, target, TilingService.extract_quadrant(patch, source)
        )

    @staticmethod
    def generate_pretext_examples(patch: PatchImage) -> list:
        """One example per duplication class, in class order"""
        return [
            PretextExample(
                patch=DuplicationService.apply_duplication(patch, label),
                label=label,
                source_patch_id=patch.patch_id,
            )
            for label in DuplicationClass
        ]

    @staticmethod
    def sample_pretext_slices(manifest: DatasetManifest, sampling: PretextSampling) -> list:
        """Draw ceil(fraction * N) slices uniformly, ignoring tissue labels"""
        manifest.require_non_empty()
        slice_ids = sorted(manifest.slice_ids)
        count = math.ceil(round(sampling.fraction * len(slice_ids), 9))
        rng = np.random.default_rng(sampling.seed)
        chosen = rng.choice(len(slice_ids), size=count, replace=False)
        sampled = sorted(slice_ids[i] for i in chosen)
        logger.info(
            f"Sampled {len(sampled)} of {len(slice_ids)} slices for pretext training "
            f"(fraction {sampling.fraction}, seed {sampling.seed})"
        )
        return sampled


class PretextDatasetWriter:
    """Persists pretext examples as images plus a label CSV"""

    IMAGE_SUFFIX = '.png'

    @staticmethod
    def write(examples, directory) -> Path:
        directory = Path(directory)
        image_dir = directory / 'examples'
        image_dir.mkdir(parents=True, exist_ok=True)
        csv_path = directory / 'pretext.csv'
        count = 0
        with open(csv_path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(PRETEXT_FIELDS)
            for example in examples:
                ImageIO.write_image(example.patch, image_dir / f"{example.example_id}{PretextDatasetWriter.IMAGE_SUFFIX}")
                writer.writerow([example.example_id, example.source_patch_id, int(example.label)])
                count += 1
        logger.info(f"Wrote {count} pretext examples to {directory}")
        return csv_path

    @staticmethod
    def read(directory) -> list:
        """Load examples written by ``write``; the patch origin comes back from the source patch id"""
        directory = Path(directory)
        examples = []
        with open(directory / 'pretext.csv', 'r', encoding='utf-8', newline='') as f:
            for row in csv.DictReader(f):
                slice_id, tile_row, tile_col = parse_patch_id(row['source_patch_id'])
                raster = ImageIO.read_image(directory / 'examples' / f"{row['example_id']}{PretextDatasetWriter.IMAGE_SUFFIX}")
                examples.append(PretextExample(
                    patch=PatchImage(raster.pixels, slice_id=slice_id, tile_row=tile_row, tile_col=tile_col),
                    label=DuplicationClass(int(row['label'])),
                    source_patch_id=row['source_patch_id'],
                ))
        return examples

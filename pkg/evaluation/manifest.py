"""
Dataset manifest: slice -> tissue label -> ordered patch records.

The manifest is the single source of truth for splits. Two CSV files back it:
``manifest.csv`` (``slice_id,label,path``) and, once slices are tiled,
``patches.csv`` (``slice_id,patch_id,tile_row,tile_col,path``).
"""
import csv
import logging
import os
from dataclasses import dataclass, field, replace
from enum import IntEnum
from pathlib import Path

from .exceptions import EmptyManifest, InvalidManifest

logger = logging.getLogger(__name__)

MANIFEST_FIELDS = ['slice_id', 'label', 'path']
PATCH_FIELDS = ['slice_id', 'patch_id', 'tile_row', 'tile_col', 'path']


class TissueClass(IntEnum):
    NORMAL = 0
    BENIGN = 1
    IN_SITU = 2
    INVASIVE = 3

    @property
    def label(self) -> str:
        return self.name.lower().replace('_', '-')

    @classmethod
    def from_label(cls, label) -> 'TissueClass':
        if isinstance(label, cls):
            return label
        text = str(label).strip().lower().replace('_', '-')
        for member in cls:
            if member.label == text or str(member.value) == text:
                return member
        raise InvalidManifest(f"Unknown tissue label '{label}'")


@dataclass(frozen=True)
class PatchRecord:
    patch_id: str
    tile_row: int
    tile_col: int
    path: str = ''


@dataclass(frozen=True)
class SliceRecord:
    slice_id: str
    label: TissueClass
    path: str = ''
    patches: tuple = ()

    @property
    def patch_ids(self) -> list:
        return [p.patch_id for p in self.patches]


@dataclass(frozen=True)
class DatasetManifest:
    slices: tuple = field(default_factory=tuple)

    def __post_init__(self):
        slices = tuple(self.slices)
        object.__setattr__(self, 'slices', slices)
        seen = set()
        for record in slices:
            if record.slice_id in seen:
                raise InvalidManifest(f"Duplicate slice id '{record.slice_id}'")
            seen.add(record.slice_id)
        counts = {len(record.patches) for record in slices}
        if len(counts) > 1:
            raise InvalidManifest(f"Slices have differing patch counts: {sorted(counts)}")

    def __len__(self):
        return len(self.slices)

    @property
    def slice_ids(self) -> list:
        return [record.slice_id for record in self.slices]

    @property
    def labels(self) -> list:
        return [record.label for record in self.slices]

    @property
    def patches_per_slice(self) -> int:
        return len(self.slices[0].patches) if self.slices else 0

    @property
    def is_tiled(self) -> bool:
        return self.patches_per_slice > 0

    def require_non_empty(self):
        if not self.slices:
            raise EmptyManifest("Dataset manifest holds no slices")
        return self

    def get(self, slice_id) -> SliceRecord:
        for record in self.slices:
            if record.slice_id == slice_id:
                return record
        raise InvalidManifest(f"Slice '{slice_id}' not in manifest")

    def subset(self, slice_ids) -> 'DatasetManifest':
        wanted = set(slice_ids)
        return DatasetManifest(tuple(r for r in self.slices if r.slice_id in wanted))

    def label_of(self) -> dict:
        return {record.slice_id: record.label for record in self.slices}

    def patch_labels(self) -> dict:
        """patch_id -> tissue label of its slice"""
        return {patch.patch_id: record.label
                for record in self.slices for patch in record.patches}

    def with_patches(self, patches_by_slice) -> 'DatasetManifest':
        return DatasetManifest(tuple(
            replace(record, patches=tuple(patches_by_slice[record.slice_id]))
            for record in self.slices
        ))


class ManifestStore:
    """Utility to load and save manifests as CSV"""

    @staticmethod
    def _resolve(base, value):
        if not value:
            return ''
        path = Path(value)
        return str(path if path.is_absolute() else (base / path))

    @staticmethod
    def load(manifest_path, patches_path=None) -> DatasetManifest:
        """Load ``manifest.csv`` and, when present, its ``patches.csv``"""
        manifest_path = Path(manifest_path)
        if not manifest_path.exists():
            raise InvalidManifest(f"Manifest not found at {manifest_path}")
        base = manifest_path.parent

        with open(manifest_path, 'r', encoding='utf-8', newline='') as f:
            reader = csv.DictReader(f)
            missing = set(MANIFEST_FIELDS[:2]) - set(reader.fieldnames or [])
            if missing:
                raise InvalidManifest(f"{manifest_path.name} lacks columns {sorted(missing)}")
            rows = [
                SliceRecord(
                    slice_id=row['slice_id'],
                    label=TissueClass.from_label(row['label']),
                    path=ManifestStore._resolve(base, row.get('path', '')),
                )
                for row in reader
            ]

        patches_path = Path(patches_path) if patches_path else base / 'patches.csv'
        manifest = DatasetManifest(tuple(rows))
        if patches_path.exists():
            manifest = manifest.with_patches(ManifestStore.load_patches(patches_path, manifest))
        logger.info(f"Loaded {len(manifest)} slices from {manifest_path}")
        return manifest

    @staticmethod
    def load_patches(patches_path, manifest) -> dict:
        patches_path = Path(patches_path)
        by_slice = {slice_id: [] for slice_id in manifest.slice_ids}
        with open(patches_path, 'r', encoding='utf-8', newline='') as f:
            for row in csv.DictReader(f):
                if row['slice_id'] not in by_slice:
                    raise InvalidManifest(
                        f"{patches_path.name}: patch {row['patch_id']} refers to unknown slice {row['slice_id']}"
                    )
                by_slice[row['slice_id']].append(PatchRecord(
                    patch_id=row['patch_id'],
                    tile_row=int(row['tile_row']),
                    tile_col=int(row['tile_col']),
                    path=ManifestStore._resolve(patches_path.parent, row.get('path', '')),
                ))
        for slice_id, patches in by_slice.items():
            patches.sort(key=lambda p: (p.tile_row, p.tile_col))
        return by_slice

    @staticmethod
    def save(manifest, directory) -> Path:
        """Write manifest.csv (and patches.csv when tiled) with paths relative to ``directory``"""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)

        def relative(value):
            if not value:
                return ''
            return Path(os.path.relpath(value, directory)).as_posix()

        manifest_path = directory / 'manifest.csv'
        with open(manifest_path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(MANIFEST_FIELDS)
            for record in manifest.slices:
                writer.writerow([record.slice_id, record.label.label, relative(record.path)])

        if manifest.is_tiled:
            with open(directory / 'patches.csv', 'w', encoding='utf-8', newline='') as f:
                writer = csv.writer(f, lineterminator='\n')
                writer.writerow(PATCH_FIELDS)
                for record in manifest.slices:
                    for patch in record.patches:
                        writer.writerow([record.slice_id, patch.patch_id, patch.tile_row,
                                         patch.tile_col, relative(patch.path)])
        return manifest_path

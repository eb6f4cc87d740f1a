"""
Stage directories, atomic promotion and ``run.json`` provenance records.

Every stage writes into ``<output_dir>/.<name>.partial`` and the directory
is renamed into place only after the stage and its ``run.json`` are
complete, so a failed stage never leaves partial output behind.
"""
import hashlib
import json
import logging
import os
import platform
import shutil
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

from django.db import DatabaseError

from .models import StageRun

logger = logging.getLogger(__name__)

RUN_RECORD = 'run.json'
CHUNK = 1 << 20
TRACKED_PACKAGES = ['Django', 'djangorestframework', 'numpy', 'scipy', 'scikit-learn',
                    'Pillow', 'matplotlib', 'pandas']


class StageLayout:
    """Where each stage lives under the run's output directory"""

    def __init__(self, output_dir):
        self.root = Path(output_dir)

    @property
    def synth(self) -> Path:
        return self.root / 'synth'

    @property
    def tiles(self) -> Path:
        return self.root / 'tiles'

    def pretext(self, tag) -> Path:
        return self.root / 'pretext' / tag

    def model(self, tag) -> Path:
        return self.root / 'models' / tag

    def embeddings(self, tag) -> Path:
        return self.root / 'embeddings' / tag

    def aggregate(self, tag) -> Path:
        return self.root / 'aggregate' / tag

    def svm(self, tag) -> Path:
        return self.root / 'svm' / tag

    @property
    def eval(self) -> Path:
        return self.root / 'eval'

    def tsne(self, tag) -> Path:
        return self.root / 'tsne' / tag

    def relative(self, path) -> str:
        try:
            return Path(os.path.relpath(path, self.root)).as_posix()
        except ValueError:
            return Path(path).as_posix()


def file_digest(path) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(CHUNK), b''):
            digest.update(chunk)
    return digest.hexdigest()


def tree_digests(directory, exclude=(RUN_RECORD,)) -> dict:
    """Relative posix path -> sha256 for every file below ``directory``"""
    directory = Path(directory)
    return {
        path.relative_to(directory).as_posix(): file_digest(path)
        for path in sorted(directory.rglob('*'))
        if path.is_file() and path.name not in exclude
    }


def combined_digest(digests: dict) -> str:
    return hashlib.sha256(json.dumps(digests, sort_keys=True).encode()).hexdigest()


def library_versions() -> dict:
    versions = {'python': platform.python_version()}
    for package in TRACKED_PACKAGES:
        try:
            versions[package] = version(package)
        except PackageNotFoundError:
            versions[package] = None
    return versions


class StageOutput:
    """Context manager for one stage directory.

    Use ``add_input`` for every file the stage reads, then write outputs
    under ``path``. On a clean exit ``run.json`` is written and the staging
    directory replaces the final one; on error the staging directory is
    removed.
    """

    def __init__(self, layout: StageLayout, stage: str, final_dir, config=None):
        self.layout = layout
        self.stage = stage
        self.final_dir = Path(final_dir)
        self.path = self.final_dir.with_name(f".{self.final_dir.name}.partial")
        self.config = config
        self.inputs = {}
        self.details = {}
        self.record = None

    def add_input(self, path):
        path = Path(path)
        if path.is_dir():
            for name, digest in tree_digests(path, exclude=()).items():
                self.inputs[self.layout.relative(path / name)] = digest
        else:
            self.inputs[self.layout.relative(path)] = file_digest(path)

    def add_upstream(self, stage_dir):
        """Chain the run record of the stage that produced an input"""
        record = Path(stage_dir) / RUN_RECORD
        if record.exists():
            self.add_input(record)

    def __enter__(self):
        if self.path.exists():
            shutil.rmtree(self.path)
        self.path.mkdir(parents=True)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            shutil.rmtree(self.path, ignore_errors=True)
            StageRecorder.record(self.stage, self.final_dir, self.inputs, {}, self.config,
                                 status='FAILED', message=str(exc))
            return False
        outputs = tree_digests(self.path)
        self.record = {
            'stage': self.stage,
            'config': self.config.to_dict() if self.config is not None else {},
            'details': self.details,
            'inputs': self.inputs,
            'outputs': outputs,
            'versions': library_versions(),
        }
        with open(self.path / RUN_RECORD, 'w', encoding='utf-8') as f:
            json.dump(self.record, f, indent=2, sort_keys=True)
            f.write('\n')
        self._promote()
        StageRecorder.record(self.stage, self.final_dir, self.inputs, outputs, self.config)
        logger.info(f"Stage {self.stage}: {len(outputs)} files in {self.final_dir}")
        return False

    def _promote(self):
        retired = self.final_dir.with_name(f".{self.final_dir.name}.retired")
        if retired.exists():
            shutil.rmtree(retired)
        if self.final_dir.exists():
            os.replace(self.final_dir, retired)
        os.replace(self.path, self.final_dir)
        shutil.rmtree(retired, ignore_errors=True)


class StageRecorder:
    """Best-effort ledger of executed stages"""

    @staticmethod
    def record(stage, output_dir, inputs, outputs, config, status='SUCCEEDED', message=''):
        try:
            return StageRun.objects.create(
                stage=stage,
                output_dir=str(output_dir),
                input_digest=combined_digest(inputs),
                output_digest=combined_digest(outputs) if outputs else '',
                config=config.to_dict() if config is not None else {},
                status=status,
                message=message[:2000],
            )
        except DatabaseError as e:
            logger.warning(f"Could not record stage {stage} in the run ledger: {e}")
            return None
